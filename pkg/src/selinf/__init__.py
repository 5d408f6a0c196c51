"""Selective inference for linear models after AIC/BIC, test-based or significance-hunting selection.

Every data-driven decision of a selection procedure is recorded as a
quadratic event ``y'Ay + c >= 0``.  Conditioning on all events restricts
the null distribution of a coefficient (or group) statistic to a union of
intervals, from which exact selective p-values and confidence intervals
follow.
"""

__version__ = "0.1.0"

from .errors import (
    BracketError,
    DegenerateDirectionError,
    InconsistentEventError,
    InputError,
    NumericalError,
    PrecisionError,
    RankDeficiencyError,
    SaturatedModelError,
    SelinfError,
)
from .events import (
    EventLog,
    QuadraticEvent,
    event_drop_smallest_t,
    event_f_test,
    event_lrt,
    event_penalized_likelihood,
    event_t_nonsignificant,
    penalty_aic,
    penalty_bic,
)
from .inference import (
    CoefficientResult,
    ConfidenceInterval,
    SelectiveTest,
    analyze_coefficients,
    analyze_group,
    group_chi_p_value,
    selective_confidence_interval,
    selective_p_value,
    truncated_chi_survival,
    truncated_normal_survival,
)
from .intervals import IntervalSet, intersect
from .io import load_csv, load_event_log, save_event_log, write_csv
from .linalg import (
    Dataset,
    FittedModel,
    fit_ols,
    group_projection,
    projection_matrix,
    reml_variance,
    test_vector,
)
from .selection import backward_significance_hunting, forward_testing, stepwise_forward
from .truncation import (
    chi_truncation,
    coefficient_truncations,
    line_coefficients,
    solve_t_region,
    to_statistic_space,
    truncation_for_coefficient,
)
