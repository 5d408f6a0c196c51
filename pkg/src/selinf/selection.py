"""Selection procedures that log every data-driven decision as an event."""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from . import linalg
from .distributions import chi_square_quantile, f_quantile, student_t_quantile
from .errors import InputError, RankDeficiencyError, SaturatedModelError
from .events import (
    EventLog,
    event_drop_smallest_t,
    event_f_test,
    event_lrt,
    event_penalized_likelihood,
    event_t_nonsignificant,
    penalty_aic,
    penalty_bic,
)
from .linalg import Dataset, check_subset

CRITERIA = ("AIC", "BIC")


class ModelCache:
    """Per-procedure memo of QR-derived quantities keyed by column subset.

    RSS and projectors only need an orthonormal basis of the column space,
    so a model one column larger than a cached one reuses that basis plus a
    single (reorthogonalized) Gram-Schmidt step instead of a fresh QR.
    """

    def __init__(self, data: Dataset):
        self.data = data
        self._qr: dict = {}
        self._basis: dict = {}
        self._proj: dict = {}

    def qr(self, subset):
        subset = tuple(subset)
        if subset not in self._qr:
            self._qr[subset] = linalg._qr(self.data, subset)
        return self._qr[subset]

    def basis(self, subset) -> np.ndarray:
        subset = tuple(subset)
        Q = self._basis.get(subset)
        if Q is not None:
            return Q
        for j in subset:
            parent = tuple(c for c in subset if c != j)
            if parent in self._basis:
                Q = self._extend(self._basis[parent], j)
                break
        else:
            Q = self.qr(subset)[0]
        self._basis[subset] = Q
        return Q

    def _extend(self, Q: np.ndarray, j: int) -> np.ndarray:
        x = self.data.X[:, j]
        r = x - Q @ (Q.T @ x)
        r -= Q @ (Q.T @ r)
        norm = float(np.linalg.norm(r))
        if not norm > linalg.RANK_RTOL * float(np.linalg.norm(x)):
            name = self.data.names[j]
            raise RankDeficiencyError(f"column {name!r} is (numerically) a combination of the others", (name,))
        return np.column_stack([Q, r / norm])

    def rss(self, subset) -> float:
        Q = self.basis(subset)
        r = self.data.y - Q @ (Q.T @ self.data.y)
        return float(r @ r)

    def projector(self, subset) -> np.ndarray:
        subset = tuple(subset)
        if subset not in self._proj:
            Q = self.basis(subset)
            P = Q @ Q.T
            self._proj[subset] = 0.5 * (P + P.T)
        return self._proj[subset]

    def test_vectors(self, subset) -> np.ndarray:
        Q, R = self.qr(subset)
        return solve_triangular(R, Q.T, check_finite=False).T


def information_criterion(rss: float, n: int, p_k: int, pen: float) -> float:
    """``-2 loglik + pen`` (up to the constant ``n log 2 pi``), scale ``RSS/(n - p_k)``."""
    if rss <= 0.0:
        return -math.inf
    return n * math.log(rss / (n - p_k)) + (n - p_k) + pen


def _penalty(criterion: str, p_k: int, n: int) -> float:
    return penalty_aic(p_k) if criterion == "AIC" else penalty_bic(p_k, n)


def stepwise_forward(data: Dataset, criterion: str = "AIC", start: Sequence[int] = (0,),
                     scope: Optional[Sequence[int]] = None, record_events: bool = True) -> EventLog:
    """Forward stepwise selection by AIC or BIC with a full event log.

    At each step the current model competes with every one-column
    augmentation from ``scope``.  The winner is logged as preferred over
    each loser (the "stay" option included), so the log pins down every
    comparison the data decided.  Exact ties go to the smaller model, then to
    the smallest added column index.  ``record_events=False`` walks the same
    path without building event matrices.
    """
    criterion = criterion.upper()
    if criterion not in CRITERIA:
        raise InputError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    current = check_subset(data, start)
    if scope is None:
        scope = [j for j in range(data.p) if j not in current]
    scope = sorted(set(int(j) for j in scope))
    if set(scope) & set(current):
        raise InputError("scope must be disjoint from the start model")
    if any(j < 0 or j >= data.p for j in scope):
        raise InputError(f"scope {scope} out of bounds for p={data.p}")

    n = data.n
    cache = ModelCache(data)
    log = EventLog(selected=current)
    cache.qr(current)
    if len(current) >= n:
        raise SaturatedModelError(f"start model has {len(current)} columns for n={n}")

    step = 0
    while True:
        step += 1
        remaining = [j for j in scope if j not in current]
        candidates = []  # (crit, size, added, subset)
        pen = _penalty(criterion, len(current), n)
        candidates.append((information_criterion(cache.rss(current), n, len(current), pen),
                           len(current), -1, current))
        for j in remaining:
            model = tuple(sorted(current + (j,)))
            if len(model) >= n:
                log.trace.append(f"step {step}: skip {data.names[j]} (no residual degrees of freedom)")
                continue
            try:
                rss = cache.rss(model)
            except RankDeficiencyError:
                log.trace.append(f"step {step}: skip {data.names[j]} (rank deficient)")
                continue
            pen = _penalty(criterion, len(model), n)
            candidates.append((information_criterion(rss, n, len(model), pen), len(model), j, model))
        if len(candidates) == 1:
            log.trace.append(f"step {step}: no admissible candidates left; stop")
            break
        winner = min(candidates, key=lambda c: (c[0], c[1], c[2]))
        w_model = winner[3]
        w_pen = _penalty(criterion, len(w_model), n)
        for cand in candidates:
            if cand is winner or not record_events:
                continue
            log.events.append(event_penalized_likelihood(
                data, w_model, cand[3], w_pen, _penalty(criterion, len(cand[3]), n),
                projector=cache.projector,
            ))
        if winner[2] == -1:
            log.trace.append(
                f"step {step}: keep {data.subset_names(current)} ({criterion}={winner[0]:.6f}); stop"
            )
            break
        log.trace.append(
            f"step {step}: add {data.names[winner[2]]} ({criterion}={winner[0]:.6f})"
        )
        current = w_model
        log.selected = current
    log.selected = current
    return log


TESTS = ("LRT", "F")


def forward_testing(data: Dataset, test: str = "F", alpha: float = 0.05, start: Sequence[int] = (0,),
                    scope: Optional[Sequence[int]] = None) -> EventLog:
    """Forward selection by nested-model tests.

    Each step picks the augmentation with the smallest RSS (logged as an
    equal-penalty comparison against every other augmentation), then tests
    it against the current model with an LRT or F test at level ``alpha``.
    A rejection adds the column; otherwise selection stops, and the
    "keep small" decision is logged as well.
    """
    test = test.upper()
    if test not in TESTS:
        raise InputError(f"test must be one of {TESTS}, got {test!r}")
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    current = check_subset(data, start)
    if scope is None:
        scope = [j for j in range(data.p) if j not in current]
    scope = sorted(set(int(j) for j in scope))
    if set(scope) & set(current):
        raise InputError("scope must be disjoint from the start model")
    if any(j < 0 or j >= data.p for j in scope):
        raise InputError(f"scope {scope} out of bounds for p={data.p}")
    n = data.n
    cache = ModelCache(data)
    log = EventLog(selected=current)
    event = event_lrt if test == "LRT" else event_f_test
    while True:
        candidates = []
        for j in scope:
            if j in current:
                continue
            model = tuple(sorted(current + (j,)))
            if len(model) >= n:
                continue
            try:
                candidates.append((cache.rss(model), j, model))
            except RankDeficiencyError:
                log.trace.append(f"skip {data.names[j]} (rank deficient)")
        if not candidates:
            log.trace.append("no admissible candidates left; stop")
            break
        best = min(candidates, key=lambda c: (c[0], c[1]))
        for cand in candidates:
            if cand is not best:
                log.events.append(event_penalized_likelihood(data, best[2], cand[2], 0.0, 0.0,
                                                             projector=cache.projector))
        large = best[2]
        p_s, p_l = len(current), len(large)
        rss_s, rss_l = cache.rss(current), best[0]
        if test == "F":
            stat = ((rss_s - rss_l) / (p_l - p_s)) / (rss_l / (n - p_l))
            crit = f_quantile(1.0 - alpha, p_l - p_s, n - p_l)
        else:
            stat = (information_criterion(rss_s, n, p_s, 0.0)
                    - information_criterion(rss_l, n, p_l, 0.0))
            crit = chi_square_quantile(1.0 - alpha, p_l - p_s)
        reject = stat > crit
        log.events.append(event(data, current, large, alpha, keep_small=not reject,
                                projector=cache.projector))
        name = data.names[best[1]]
        if not reject:
            log.trace.append(f"{test} for {name}: {stat:.6f} <= {crit:.6f}; stop")
            break
        log.trace.append(f"{test} for {name}: {stat:.6f} > {crit:.6f}; add")
        current = large
        log.selected = current
    log.selected = current
    return log


def t_statistics(data: Dataset, model: Sequence[int], cache: Optional[ModelCache] = None) -> tuple:
    """t statistics of all coefficients plus the model's test vectors and residual variance."""
    cache = cache or ModelCache(data)
    model = tuple(model)
    n, p = data.n, len(model)
    if n - p < 1:
        raise SaturatedModelError(f"model with {p} columns is saturated for n={n}")
    V = cache.test_vectors(model)
    sigma2 = cache.rss(model) / (n - p)
    coef = V.T @ data.y
    with np.errstate(divide="ignore", invalid="ignore"):
        t = coef / np.sqrt(sigma2 * np.einsum("ij,ij->j", V, V))
    return t, V, sigma2


def backward_significance_hunting(data: Dataset, start: Sequence[int], alpha: float = 0.05,
                                  protect: Sequence[int] = ()) -> EventLog:
    """Backward elimination of the least significant coefficient.

    ``protect`` lists dataset column indices (e.g. the intercept) that are
    never dropped.  Each drop logs ``|t_drop| <= |t_j|`` against every other
    unprotected column plus the non-significance of the dropped one.  The
    final "stop" decision is not logged.
    """
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    model = check_subset(data, start)
    protect = set(int(j) for j in protect)
    cache = ModelCache(data)
    cache.qr(model)
    log = EventLog(selected=model)
    n = data.n
    while True:
        unprotected = [pos for pos, col in enumerate(model) if col not in protect]
        if not unprotected:
            log.trace.append("only protected columns remain; stop")
            break
        t, V, sigma2 = t_statistics(data, model, cache)
        abs_t = np.abs(t)
        j_star = min(unprotected, key=lambda pos: (abs_t[pos], pos))
        crit = student_t_quantile(1.0 - alpha / 2.0, n - len(model))
        name = data.names[model[j_star]]
        if not abs_t[j_star] <= crit:
            log.trace.append(f"smallest |t| is {name} ({abs_t[j_star]:.6f} > {crit:.6f}); stop")
            break
        if len(model) == 1:
            log.trace.append(f"{name} not significant but is the last column; stop")
            break
        for pos in unprotected:
            if pos != j_star:
                log.events.append(event_drop_smallest_t(data, model, j_star, pos, V=V))
        log.events.append(event_t_nonsignificant(data, model, j_star, alpha, V=V, projector=cache.projector))
        log.trace.append(f"drop {name} (|t|={abs_t[j_star]:.6f} <= {crit:.6f})")
        model = tuple(c for c in model if c != model[j_star])
        log.selected = model
    return log
