"""Distribution functions: standard normal, chi, chi-square, Student t and F.

CDFs are thin wrappers over :mod:`scipy.special` with an explicit log and
complementary channel.  Quantiles are obtained by bracketed root finding on
the CDFs defined here, so quantile(cdf(x)) == x holds by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import InputError
from .roots import solve_monotone



@dataclass(frozen=True)
class TailProbability:
    value: float
    log_value: float

    def __float__(self) -> float:
        return self.value


def _tail(value: float, log_value: float) -> TailProbability:
    return TailProbability(float(value), float(log_value))


def _check_real(x: float, what: str = "x") -> float:
    x = float(x)
    if math.isnan(x):
        raise InputError(f"{what} is NaN")
    return x


def _check_prob(q: float) -> float:
    q = float(q)
    if not 0.0 < q < 1.0:
        raise InputError(f"probability level must lie in (0, 1), got {q}")
    return q


def _check_df(df, integer: bool = False) -> float:
    if integer and (int(df) != df):
        raise InputError(f"degrees of freedom must be an integer, got {df}")
    df = float(df)
    if not df > 0 or math.isinf(df):
        raise InputError(f"degrees of freedom must be positive and finite, got {df}")
    return df


# ---------------------------------------------------------------------------
# log-space helpers shared with the truncated distributions
# ---------------------------------------------------------------------------

def log1mexp(a):
    """log(1 - exp(a)) for a <= 0, accurate near both ends."""
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(a > -math.log(2.0), np.log(-np.expm1(a)), np.log1p(-np.exp(a)))


def log_diff_exp(la, lb):
    """log(exp(la) - exp(lb)) for la >= lb."""
    la = np.asarray(la, dtype=float)
    lb = np.asarray(lb, dtype=float)
    with np.errstate(invalid="ignore"):
        out = la + log1mexp(np.minimum(lb - la, 0.0))
    return np.where(np.isneginf(la), -np.inf, out)


def _log_gammaincc_cf(s: float, x: float) -> float:
    """log Q(s, x) by the Lentz continued fraction, usable once x > s + 1."""
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return -x + s * math.log(x) - math.lgamma(s) + math.log(h)


def log_gammaincc(s: float, x: float) -> float:
    """log of the regularized upper incomplete gamma, finite far into the tail."""
    q = special.gammaincc(s, x)
    if q > 1e-250:
        return math.log(q)
    if q == 1.0:
        return 0.0
    return _log_gammaincc_cf(s, x)


def log_gammainc(s: float, x: float) -> float:
    if x <= 0.0:
        return -math.inf
    pv = special.gammainc(s, x)
    if pv > 1e-250:
        return math.log(pv)
    # series for the far lower tail: P(s,x) ~ x^s e^-x / Gamma(s+1) * sum
    term = 1.0 / s
    total = term
    for k in range(1, 1000):
        term *= x / (s + k)
        total += term
        if term < total * 1e-17:
            break
    return s * math.log(x) - x - math.lgamma(s) + math.log(total)


# ---------------------------------------------------------------------------
# standard normal
# ---------------------------------------------------------------------------

def std_normal_cdf(x: float) -> TailProbability:
    x = _check_real(x)
    return _tail(special.ndtr(x), special.log_ndtr(x))


def std_normal_sf(x: float) -> TailProbability:
    x = _check_real(x)
    return _tail(special.ndtr(-x), special.log_ndtr(-x))


def std_normal_quantile(q: float) -> float:
    q = _check_prob(q)
    if q == 0.5:
        return 0.0
    if q > 0.5:
        # 1 - q is exact for q in [0.5, 1)
        return -std_normal_quantile(1.0 - q)
    logq = math.log(q)
    return solve_monotone(lambda x: float(special.log_ndtr(x)) - logq, -40.0, 0.0)


# ---------------------------------------------------------------------------
# chi / chi-square
# ---------------------------------------------------------------------------

def chi_cdf(x: float, df: float) -> TailProbability:
    """CDF of the chi distribution, i.e. P(df/2, x^2/2)."""
    x = _check_real(x)
    df = _check_df(df)
    if x < 0:
        raise InputError(f"chi_cdf needs x >= 0, got {x}")
    if math.isinf(x):
        return _tail(1.0, 0.0)
    h = 0.5 * x * x
    s = 0.5 * df
    return _tail(special.gammainc(s, h), log_gammainc(s, h))


def chi_sf(x: float, df: float) -> TailProbability:
    x = _check_real(x)
    df = _check_df(df)
    if x < 0:
        raise InputError(f"chi_sf needs x >= 0, got {x}")
    if math.isinf(x):
        return _tail(0.0, -math.inf)
    h = 0.5 * x * x
    s = 0.5 * df
    return _tail(special.gammaincc(s, h), log_gammaincc(s, h))


def chi_square_quantile(q: float, df: int) -> float:
    """Point x with P(chi2_df <= x) == q (the probability level is taken as given)."""
    q = _check_prob(q)
    df = _check_df(df, integer=True)
    s = 0.5 * df
    if q <= 0.5:
        f = lambda x: float(special.gammainc(s, 0.5 * x)) - q  # noqa: E731
    else:
        target = math.log1p(-q)
        f = lambda x: target - log_gammaincc(s, 0.5 * x)  # noqa: E731
    guess = max(df, 1.0)
    return solve_monotone(f, 0.0, 2.0 * guess, lower_bound=0.0)


# ---------------------------------------------------------------------------
# Student t and F
# ---------------------------------------------------------------------------

def student_t_cdf(x: float, df: float) -> TailProbability:
    x = _check_real(x)
    df = _check_df(df)
    val = special.stdtr(df, x)
    return _tail(val, math.log(val) if val > 0 else -math.inf)


def student_t_quantile(q: float, df: int) -> float:
    q = _check_prob(q)
    df = _check_df(df, integer=True)
    if q == 0.5:
        return 0.0
    if q > 0.5:
        return -student_t_quantile(1.0 - q, df)
    # lower half: solve stdtr(df, x) = q on x < 0; symmetric, so precision is kept
    return solve_monotone(lambda x: float(special.stdtr(df, x)) - q, -10.0, 0.0, upper_bound=0.0)


def f_cdf(x: float, df1: float, df2: float) -> TailProbability:
    x = _check_real(x)
    df1, df2 = _check_df(df1), _check_df(df2)
    if x <= 0:
        return _tail(0.0, -math.inf)
    val = special.fdtr(df1, df2, x)
    return _tail(val, math.log(val) if val > 0 else -math.inf)


def f_quantile(q: float, df1: int, df2: int) -> float:
    q = _check_prob(q)
    df1 = _check_df(df1, integer=True)
    df2 = _check_df(df2, integer=True)
    if q <= 0.5:
        f = lambda x: float(special.fdtr(df1, df2, x)) - q  # noqa: E731
    else:
        f = lambda x: (1.0 - q) - float(special.fdtrc(df1, df2, x))  # noqa: E731
    return solve_monotone(f, 0.0, 4.0, lower_bound=0.0)


# ---------------------------------------------------------------------------
# vectorized log channels used by the truncated distributions
# ---------------------------------------------------------------------------

def normal_log_cdf(z):
    return special.log_ndtr(z)


def normal_log_sf(z):
    return special.log_ndtr(-np.asarray(z, dtype=float))


def chi_log_cdf(x, df: float):
    s = 0.5 * df
    return np.array([log_gammainc(s, 0.5 * xi * xi) if np.isfinite(xi) else 0.0
                     for xi in np.atleast_1d(x)])


def chi_log_sf(x, df: float):
    s = 0.5 * df
    return np.array([log_gammaincc(s, 0.5 * xi * xi) if np.isfinite(xi) else -math.inf
                     for xi in np.atleast_1d(x)])
