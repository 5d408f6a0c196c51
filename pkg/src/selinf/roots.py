"""Bracketed root finding for monotone scalar functions."""

from __future__ import annotations

import math
from typing import Callable

from scipy.optimize import brentq

from .errors import BracketError


def expand_bracket(f: Callable[[float], float], lo: float, hi: float, *,
                   max_doublings: int = 60, lower_bound: float = -math.inf,
                   upper_bound: float = math.inf) -> tuple:
    """Widen ``[lo, hi]`` around its midpoint until ``f`` changes sign.

    Each side is pushed out independently, doubling its distance from the
    center, and clipped to ``[lower_bound, upper_bound]``.
    """
    center = 0.5 * (lo + hi)
    f_lo, f_hi = f(lo), f(hi)
    for _ in range(max_doublings):
        if f_lo * f_hi <= 0:
            return lo, hi, f_lo, f_hi
        # move whichever end lies on the same side as the root's direction
        if abs(f_lo) < abs(f_hi) or hi >= upper_bound:
            lo = max(center - 2.0 * (center - lo), lower_bound)
            f_lo = f(lo)
        else:
            hi = min(center + 2.0 * (hi - center), upper_bound)
            f_hi = f(hi)
    if f_lo * f_hi <= 0:
        return lo, hi, f_lo, f_hi
    side = "below" if abs(f_lo) < abs(f_hi) else "above"
    raise BracketError(f"no sign change in [{lo:g}, {hi:g}] after {max_doublings} doublings; root lies {side}")


def solve_monotone(f: Callable[[float], float], lo: float, hi: float, *,
                   xtol: float = 1e-300, rtol: float = 1e-15, **bracket_kw) -> float:
    """Root of a monotone ``f`` starting from the guess bracket ``[lo, hi]``."""
    lo, hi, f_lo, f_hi = expand_bracket(f, lo, hi, **bracket_kw)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    return brentq(f, lo, hi, xtol=xtol, rtol=rtol, maxiter=500)
