"""Selective p-values and confidence intervals from truncation sets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special

from . import linalg
from .distributions import (
    chi_sf,
    log_diff_exp,
    log_gammainc,
    log_gammaincc,
    std_normal_quantile,
)
from .errors import (
    DegenerateDirectionError,
    InputError,
    NumericalError,
    PrecisionError,
    SaturatedModelError,
)
from .events import EventLog
from .intervals import IntervalSet
from .linalg import Dataset
from .roots import solve_monotone
from .truncation import chi_truncation, coefficient_truncations

VARIANCE_MODES = ("known", "reml_plugin")
EXACT_FIT_RTOL = 1e-10
_SQRT1_2 = math.sqrt(0.5)


@dataclass(frozen=True)
class SelectiveTest:
    statistic: float
    theta0: float
    sigma: float
    v_norm2: float
    truncation: IntervalSet
    p_value: float
    variance_mode: str = "known"
    df: Optional[float] = None  # set for group chi tests

    @property
    def scale(self) -> float:
        return self.sigma * math.sqrt(self.v_norm2)


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass
class CoefficientResult:
    """Adjusted and unadjusted inference for one selected coefficient."""

    name: str
    column: int
    estimate: float
    naive_p_value: float
    naive_ci: ConfidenceInterval
    test: Optional[SelectiveTest] = None
    ci: Optional[ConfidenceInterval] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


# ---------------------------------------------------------------------------
# log interval masses
# ---------------------------------------------------------------------------

def _normal_log_mass(a: float, b: float) -> float:
    """log P(a <= Z <= b) for standard normal Z, stable in either tail."""
    if a >= 0.0:
        return float(log_diff_exp(special.log_ndtr(-a), special.log_ndtr(-b)))
    if b <= 0.0:
        return float(log_diff_exp(special.log_ndtr(b), special.log_ndtr(a)))
    width = 0.5 * (math.erf(b * _SQRT1_2) - math.erf(a * _SQRT1_2))
    return math.log(width) if width > 0 else -math.inf


class _ChiFamily:
    def __init__(self, df: float):
        self.s = 0.5 * df
        # Wilson-Hilferty median; only used to pick the accurate branch
        self.median = math.sqrt(df * (1.0 - 2.0 / (9.0 * df)) ** 3)

    def log_mass(self, a: float, b: float) -> float:
        s = self.s
        if a >= self.median:
            la = log_gammaincc(s, 0.5 * a * a)
            lb = log_gammaincc(s, 0.5 * b * b) if math.isfinite(b) else -math.inf
            return float(log_diff_exp(la, lb))
        if b <= self.median:
            lb = log_gammainc(s, 0.5 * b * b)
            la = log_gammainc(s, 0.5 * a * a)
            return float(log_diff_exp(lb, la))
        lower = special.gammainc(s, 0.5 * a * a)
        upper = special.gammaincc(s, 0.5 * b * b) if math.isfinite(b) else 0.0
        return math.log1p(-(lower + upper))


def _logsumexp(values) -> float:
    m = max(values)
    if m == -math.inf:
        return m
    return m + math.log(sum(math.exp(v - m) for v in values))


def _split_log_masses(x: float, loc: int, intervals, log_mass) -> tuple:
    """log masses of the truncation set below and above ``x``, which lies in interval ``loc``."""
    a_l, b_l = intervals[loc]
    x = min(max(x, a_l), b_l)
    below = [log_mass(a, b) for a, b in intervals[:loc]] + [log_mass(a_l, x)]
    above = [log_mass(x, b_l)] + [log_mass(a, b) for a, b in intervals[loc + 1:]]
    return _logsumexp(below), _logsumexp(above)


def _locate(x: float, trunc: IntervalSet) -> int:
    loc = trunc.locate(x)
    if loc < 0:
        raise InputError(f"statistic {x:.10g} is not inside the truncation set {trunc}")
    return loc


def _normal_split(x: float, theta: float, scale: float, trunc: IntervalSet, loc: Optional[int] = None) -> tuple:
    if not scale > 0:
        raise InputError(f"scale must be positive, got {scale}")
    if trunc.is_empty:
        raise InputError("empty truncation set")
    if loc is None:
        loc = _locate(x, trunc)
    z = [((a - theta) / scale, (b - theta) / scale) for a, b in trunc]
    lo, hi = _split_log_masses((x - theta) / scale, loc, z, _normal_log_mass)
    if lo == -math.inf and hi == -math.inf:
        raise PrecisionError(
            f"truncation set {trunc} has zero mass under N({theta:.6g}, {scale:.6g}^2) even in log space"
        )
    return lo, hi


def _survival_from_split(lo: float, hi: float) -> float:
    total = np.logaddexp(lo, hi)
    return float(math.exp(hi - total))


def truncated_normal_survival(x: float, theta: float, scale: float, trunc: IntervalSet) -> float:
    """P(X > x) for X ~ N(theta, scale^2) restricted to ``trunc``."""
    return _survival_from_split(*_normal_split(float(x), float(theta), float(scale), trunc))


def selective_p_value(statistic: float, theta0: float, sigma: float, v_norm2: float,
                      trunc: IntervalSet) -> float:
    """Two-sided selective p-value ``2 min(p~, 1 - p~)``."""
    scale = sigma * math.sqrt(v_norm2)
    lo, hi = _normal_split(float(statistic), float(theta0), scale, trunc)
    total = np.logaddexp(lo, hi)
    return float(min(1.0, 2.0 * math.exp(min(lo, hi) - total)))


def selective_confidence_interval(statistic: float, sigma: float, v_norm2: float,
                                  trunc: IntervalSet, level: float = 0.95,
                                  max_doublings: int = 60) -> ConfidenceInterval:
    """Invert the truncated-normal survival in its mean.

    The lower limit solves ``survival(theta) = alpha/2`` and the upper limit
    ``survival(theta) = 1 - alpha/2``; survival is nondecreasing in theta.
    """
    if not 0.0 < level < 1.0:
        raise InputError(f"level must lie in (0, 1), got {level}")
    x = float(statistic)
    scale = sigma * math.sqrt(v_norm2)
    alpha = 1.0 - level

    loc = _locate(x, trunc)

    def tails(theta: float) -> tuple:
        lo, hi = _normal_split(x, theta, scale, trunc, loc)
        total = float(np.logaddexp(lo, hi))
        return math.exp(lo - total), math.exp(hi - total)

    def solve(target: float, which: str) -> float:
        # match the smaller tail so targets near 1 keep full precision
        if target <= 0.5:
            f = lambda th: tails(th)[1] - target  # noqa: E731
        else:
            f = lambda th: (1.0 - target) - tails(th)[0]  # noqa: E731
        try:
            return solve_monotone(f, x - 10.0 * scale, x + 10.0 * scale,
                                  max_doublings=max_doublings, xtol=1e-12 * scale, rtol=1e-15)
        except NumericalError as exc:
            raise type(exc)(f"{which} confidence limit: {exc}") from exc

    lower = solve(alpha / 2.0, "lower")
    upper = solve(1.0 - alpha / 2.0, "upper")
    return ConfidenceInterval(lower, upper, level)


def _chi_split(T_obs: float, df: float, trunc: IntervalSet) -> tuple:
    if trunc.is_empty or trunc.lower < 0:
        raise InputError(f"chi truncation set must be a non-empty subset of [0, inf), got {trunc}")
    loc = _locate(T_obs, trunc)
    fam = _ChiFamily(df)
    lo, hi = _split_log_masses(T_obs, loc, list(trunc.intervals), fam.log_mass)
    if lo == -math.inf and hi == -math.inf:
        raise PrecisionError(f"truncation set {trunc} has zero chi_{df:g} mass even in log space")
    return lo, hi


def truncated_chi_survival(T_obs: float, df: float, trunc: IntervalSet) -> float:
    """P(T > T_obs) for T ~ chi_df restricted to ``trunc``; the group-test p-value."""
    return _survival_from_split(*_chi_split(float(T_obs), float(df), trunc))


group_chi_p_value = truncated_chi_survival


# ---------------------------------------------------------------------------
# assembled analyses
# ---------------------------------------------------------------------------

def _naive(estimate: float, scale: float, level: float) -> tuple:
    z = abs(estimate) / scale
    p = float(2.0 * special.ndtr(-z))
    q = std_normal_quantile(0.5 + level / 2.0)
    return p, ConfidenceInterval(estimate - q * scale, estimate + q * scale, level)


def resolve_sigma(data: Dataset, selected, variance_mode: str, sigma_known: Optional[float]) -> float:
    if variance_mode not in VARIANCE_MODES:
        raise InputError(f"variance_mode must be one of {VARIANCE_MODES}, got {variance_mode!r}")
    if variance_mode == "known":
        if sigma_known is None or not sigma_known > 0:
            raise InputError("variance_mode 'known' needs a positive sigma_known")
        return float(sigma_known)
    if sigma_known is not None:
        raise InputError("sigma_known must not be given with variance_mode 'reml_plugin'")
    fit = linalg.fit_ols(data, selected)
    s2 = linalg.reml_variance(data, fit)
    # residuals at rounding level relative to y mean an exact fit
    if not fit.rss > (EXACT_FIT_RTOL * float(np.linalg.norm(data.y))) ** 2:
        raise SaturatedModelError("plug-in variance is zero (exact fit); use a known sigma")
    return math.sqrt(s2)


def analyze_coefficients(data: Dataset, log: EventLog, variance_mode: str = "known",
                         sigma_known: Optional[float] = None, level: float = 0.95,
                         truncations: Optional[list] = None) -> list:
    """Selective test (theta0 = 0) and interval for every selected coefficient.

    Failures for a single coefficient (degenerate direction, bracket or
    precision problems) are recorded on that result; the rest still run.
    ``truncations`` may pass precomputed sets from :func:`coefficient_truncations`.
    """
    selected = linalg.check_subset(data, log.selected)
    sigma = resolve_sigma(data, selected, variance_mode, sigma_known)
    V = linalg.test_vectors(data, selected)
    if truncations is None:
        truncations = coefficient_truncations(log.events, V, data.y)
    results = []
    for j, col in enumerate(selected):
        v = V[:, j]
        v_norm2 = float(v @ v)
        est = float(v @ data.y)
        scale = sigma * math.sqrt(v_norm2)
        naive_p, naive_ci = _naive(est, scale, level)
        res = CoefficientResult(data.names[col], col, est, naive_p, naive_ci)
        trunc = truncations[j]
        if isinstance(trunc, Exception):
            res.error = f"{type(trunc).__name__}: {trunc}"
            results.append(res)
            continue
        try:
            p = selective_p_value(est, 0.0, sigma, v_norm2, trunc)
            res.test = SelectiveTest(est, 0.0, sigma, v_norm2, trunc, p, variance_mode)
            res.ci = selective_confidence_interval(est, sigma, v_norm2, trunc, level)
        except (NumericalError, InputError) as exc:
            res.error = f"{type(exc).__name__}: {exc}"
        results.append(res)
    return results


def analyze_group(data: Dataset, log: EventLog, group: Sequence[int], sigma: float) -> SelectiveTest:
    """Selective chi test of ``H0: P_g mu = 0`` for a group of selected columns (known sigma)."""
    if sigma is None or not sigma > 0:
        raise InputError("the group test needs a known positive sigma")
    selected = linalg.check_subset(data, log.selected)
    Pg = linalg.group_projection(data, selected, group)
    y = data.y
    proj = Pg @ y
    norm = float(np.linalg.norm(proj))
    if not norm > 1e-12 * np.linalg.norm(y):
        raise DegenerateDirectionError("projection of y onto the group space is zero; direction undefined")
    T_obs = norm / sigma
    u = proj / norm
    z = y - proj
    df = float(round(np.trace(Pg)))
    trunc = chi_truncation(log, u, z, sigma, observed=T_obs)
    p = truncated_chi_survival(T_obs, df, trunc)
    return SelectiveTest(T_obs, 0.0, float(sigma), 1.0, trunc, p, "known", df)


def classical_chi_p_value(T_obs: float, df: float) -> float:
    return chi_sf(T_obs, df).value
