"""Quadratic selection events ``y'Ay + c >= 0`` for common model comparisons.

Every constructor encodes the decision *as it was made*: the observed
response satisfies the returned inequality.  Scale estimates inside the
likelihood use ``RSS_k / (n - p_k)``; this is what makes the
``(n - p_k)`` factors in the penalized-likelihood matrix appear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import linalg
from .distributions import chi_square_quantile, f_quantile, student_t_quantile
from .errors import InputError, SaturatedModelError
from .linalg import Dataset, ModelSubset, check_subset

SELF_CONSISTENCY_RTOL = 1e-8

Projector = Callable[[ModelSubset], np.ndarray]


SYMMETRY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class QuadraticEvent:
    A: np.ndarray
    c: float = 0.0
    label: str = ""

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InputError(f"event matrix must be square, got shape {A.shape}")
        if A.size and np.max(np.abs(A - A.T)) > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(A)))):
            raise InputError("event matrix must be symmetric")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", float(self.c))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def value(self, y: np.ndarray) -> float:
        """``y'Ay + c``."""
        return float(y @ self.A @ y) + self.c

    def is_satisfied(self, y: np.ndarray, rtol: float = SELF_CONSISTENCY_RTOL) -> bool:
        quad = float(y @ self.A @ y)
        return quad + self.c >= -rtol * (1.0 + abs(quad))

    def negated(self, label: Optional[str] = None) -> "QuadraticEvent":
        return QuadraticEvent(-self.A, -self.c, label if label is not None else f"not({self.label})")


@dataclass
class EventLog:
    """Ordered selection events plus the model they led to."""

    events: list = field(default_factory=list)
    selected: ModelSubset = ()
    trace: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.events)

    def extend(self, other: "EventLog") -> None:
        """Append another procedure's events; its selection becomes current."""
        self.events.extend(other.events)
        self.trace.extend(other.trace)
        self.selected = other.selected

    def violations(self, y: np.ndarray) -> list:
        return [k for k, ev in enumerate(self.events) if not ev.is_satisfied(y)]


def penalty_aic(p_k: int) -> float:
    return 2.0 * (p_k + 1)


def penalty_bic(p_k: int, n: float) -> float:
    return math.log(n) * (p_k + 1)


def _projector(data: Dataset, projector: Optional[Projector]) -> Projector:
    if projector is not None:
        return projector
    return lambda subset: linalg.projection_matrix(data, subset)


def _names(data: Dataset, subset) -> str:
    return "{" + ",".join(data.subset_names(subset)) + "}"


def _require_residual_df(data: Dataset, *subsets) -> None:
    for s in subsets:
        if len(s) >= data.n:
            raise SaturatedModelError(
                f"model {_names(data, s)} has {len(s)} columns for n={data.n}; scale estimate undefined"
            )


def _require_nested(m_small, m_large) -> None:
    if not set(m_small) < set(m_large):
        raise InputError(f"model {m_small} is not strictly nested in {m_large}")


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def event_penalized_likelihood(data: Dataset, m1: Sequence[int], m2: Sequence[int],
                               pen1: float, pen2: float, *,
                               projector: Optional[Projector] = None) -> QuadraticEvent:
    """Event "model 1 is preferred over model 2" under ``-2 loglik + pen``."""
    m1, m2 = check_subset(data, m1), check_subset(data, m2)
    _require_residual_df(data, m1, m2)
    if not (math.isfinite(pen1) and math.isfinite(pen2)):
        raise InputError("penalties must be finite")
    n, p1, p2 = data.n, len(m1), len(m2)
    gamma = p2 - p1 + pen1 - pen2
    label = (f"penlik {_names(data, m1)} over {_names(data, m2)}: "
             f"pen1={pen1:.12g} pen2={pen2:.12g} gamma={gamma:.12g}")
    if m1 == m2 and pen1 == pen2:
        return QuadraticEvent(np.zeros((n, n)), 0.0, label)
    proj = _projector(data, projector)
    P1, P2 = proj(m1), proj(m2)
    a = (n - p1) * math.exp(-gamma / n)
    b = float(n - p2)
    # a (I - P2) - b (I - P1)
    A = b * P1 - a * P2
    A[np.diag_indices(n)] += a - b
    return QuadraticEvent(A, 0.0, label)


def event_lrt(data: Dataset, m_small: Sequence[int], m_large: Sequence[int], alpha: float,
              keep_small: bool, *, projector: Optional[Projector] = None) -> QuadraticEvent:
    """Likelihood-ratio test decision between nested models at level ``alpha``."""
    m_small, m_large = check_subset(data, m_small), check_subset(data, m_large)
    _require_nested(m_small, m_large)
    alpha = _check_alpha(alpha)
    crit = chi_square_quantile(1.0 - alpha, len(m_large) - len(m_small))
    ev = event_penalized_likelihood(data, m_small, m_large, 0.0, crit, projector=projector)
    base = f"LRT alpha={alpha:.12g} crit={crit:.12g} {_names(data, m_small)} vs {_names(data, m_large)}"
    if keep_small:
        return QuadraticEvent(ev.A, ev.c, base + ": keep small")
    return ev.negated(base + ": choose large")


def event_f_test(data: Dataset, m_small: Sequence[int], m_large: Sequence[int], alpha: float,
                 keep_small: bool, *, projector: Optional[Projector] = None) -> QuadraticEvent:
    """F-test decision between nested models at level ``alpha``."""
    m_small, m_large = check_subset(data, m_small), check_subset(data, m_large)
    _require_nested(m_small, m_large)
    _require_residual_df(data, m_large)
    alpha = _check_alpha(alpha)
    n, p1, p2 = data.n, len(m_small), len(m_large)
    fcrit = f_quantile(1.0 - alpha, p2 - p1, n - p2)
    kappa = fcrit * (p2 - p1) / (n - p2)
    proj = _projector(data, projector)
    P1, P2 = proj(m_small), proj(m_large)
    # P1 + kappa (I - P2) - P2
    A = P1 - (1.0 + kappa) * P2
    A[np.diag_indices(n)] += kappa
    base = (f"F alpha={alpha:.12g} crit={fcrit:.12g} kappa={kappa:.12g} "
            f"{_names(data, m_small)} vs {_names(data, m_large)}")
    if keep_small:
        return QuadraticEvent(A, 0.0, base + ": keep small")
    return QuadraticEvent(-A, 0.0, base + ": choose large")


def _unit_projector(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v) / (v @ v)


def _positions(model, *positions) -> None:
    for j in positions:
        if not 0 <= j < len(model):
            raise InputError(f"coefficient position {j} out of range for a model with {len(model)} columns")


def event_drop_smallest_t(data: Dataset, model: Sequence[int], j_star: int, j: int, *,
                          V: Optional[np.ndarray] = None) -> QuadraticEvent:
    """Event ``|t_{j_star}| <= |t_j|`` within one model.

    ``V`` may carry the model's precomputed test vectors (columns).
    """
    model = check_subset(data, model)
    _positions(model, j_star, j)
    if j == j_star:
        raise InputError("j and j_star must differ")
    if V is None:
        V = linalg.test_vectors(data, model)
    A = _unit_projector(V[:, j]) - _unit_projector(V[:, j_star])
    names = data.names
    return QuadraticEvent(A, 0.0, f"|t({names[model[j_star]]})| <= |t({names[model[j]]})| in {_names(data, model)}")


def event_t_nonsignificant(data: Dataset, model: Sequence[int], j_star: int, alpha: float, *,
                           V: Optional[np.ndarray] = None,
                           projector: Optional[Projector] = None) -> QuadraticEvent:
    """Event ``|t_{j_star}| <= t_{1 - alpha/2, n - p}`` within one model."""
    model = check_subset(data, model)
    _positions(model, j_star)
    _require_residual_df(data, model)
    alpha = _check_alpha(alpha)
    n, p = data.n, len(model)
    q = student_t_quantile(1.0 - alpha / 2.0, n - p)
    if V is None:
        V = linalg.test_vectors(data, model)
    P = _projector(data, projector)(model)
    w = q * q / (n - p)
    A = -w * P - _unit_projector(V[:, j_star])
    A[np.diag_indices(n)] += w
    return QuadraticEvent(
        A, 0.0,
        f"|t({data.names[model[j_star]]})| <= {q:.12g} (alpha={alpha:.12g}) in {_names(data, model)}",
    )
