"""Finite unions of closed intervals over the extended real line."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

MERGE_GAP = 1e-12
CONTAIN_RTOL = 1e-8


def _normalize(pairs: Iterable[Sequence[float]]) -> tuple:
    cleaned = []
    for a, b in pairs:
        a, b = float(a), float(b)
        if math.isnan(a) or math.isnan(b):
            raise ValueError("interval endpoints must not be NaN")
        if a > b or a == math.inf or b == -math.inf:
            continue
        cleaned.append((a, b))
    cleaned.sort()
    merged: list = []
    for a, b in cleaned:
        if merged and a - merged[-1][1] < MERGE_GAP:
            if b > merged[-1][1]:
                merged[-1] = (merged[-1][0], b)
        else:
            merged.append((a, b))
    return tuple(merged)


@dataclass(frozen=True)
class IntervalSet:
    """Sorted, disjoint union of closed intervals ``[a_i, b_i]``.

    Endpoints may be infinite.  Intervals closer than ``MERGE_GAP`` are
    merged on construction, so two sets built from the same point set
    compare equal.
    """

    intervals: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "intervals", _normalize(self.intervals))

    @classmethod
    def real_line(cls) -> "IntervalSet":
        return cls(((-math.inf, math.inf),))

    @classmethod
    def nonnegative(cls) -> "IntervalSet":
        return cls(((0.0, math.inf),))

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls(())

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    def __bool__(self) -> bool:
        return bool(self.intervals)

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    @property
    def is_real_line(self) -> bool:
        return self.intervals == ((-math.inf, math.inf),)

    @property
    def lower(self) -> float:
        return self.intervals[0][0] if self.intervals else math.nan

    @property
    def upper(self) -> float:
        return self.intervals[-1][1] if self.intervals else math.nan

    def contains(self, x: float, rtol: float = 0.0) -> bool:
        tol = rtol * max(1.0, abs(x))
        return any(a - tol <= x <= b + tol for a, b in self.intervals)

    def locate(self, x: float, rtol: float = CONTAIN_RTOL) -> int:
        """Index of the interval holding ``x`` (with endpoint slack), or -1."""
        tol = rtol * max(1.0, abs(x))
        for i, (a, b) in enumerate(self.intervals):
            if a - tol <= x <= b + tol:
                return i
        return -1

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        i = j = 0
        A, B = self.intervals, other.intervals
        while i < len(A) and j < len(B):
            lo = max(A[i][0], B[j][0])
            hi = min(A[i][1], B[j][1])
            if lo <= hi:
                out.append((lo, hi))
            if A[i][1] < B[j][1]:
                i += 1
            else:
                j += 1
        return IntervalSet(out)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self.intervals + other.intervals)

    def scale(self, factor: float) -> "IntervalSet":
        """Image under ``s -> factor * s`` for nonzero ``factor``."""
        if factor == 0 or math.isnan(factor):
            raise ValueError("scale factor must be nonzero")
        if factor > 0:
            return IntervalSet((a * factor, b * factor) for a, b in self.intervals)
        return IntervalSet((b * factor, a * factor) for a, b in self.intervals)

    def to_list(self) -> list:
        return [[a, b] for a, b in self.intervals]

    def __str__(self) -> str:
        if not self.intervals:
            return "{}"

        def fmt(a, b):
            left = "(" if math.isinf(a) else "["
            right = ")" if math.isinf(b) else "]"
            return f"{left}{a:.6g}, {b:.6g}{right}"

        return " U ".join(fmt(a, b) for a, b in self.intervals)


def intersect(sets: Iterable[IntervalSet]) -> IntervalSet:
    """Intersection of any number of sets; the empty family gives the real line."""
    return reduce(IntervalSet.intersect, sets, IntervalSet.real_line())
