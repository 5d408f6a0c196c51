import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selinf import linalg
from selinf.errors import DegenerateDirectionError, InconsistentEventError, InputError
from selinf.events import EventLog, QuadraticEvent
from selinf.intervals import IntervalSet, intersect
from selinf.selection import stepwise_forward
from selinf.truncation import (
    QuadraticCoefficients,
    chi_line_coefficients,
    chi_truncation,
    coefficient_truncations,
    line_coefficients,
    solve_t_region,
    to_statistic_space,
    truncation_for_coefficient,
)

from conftest import make_dataset

INF = math.inf


def random_event(rng, n, c=0.0):
    B = rng.standard_normal((n, n))
    return QuadraticEvent(B + B.T, c)


def test_line_coefficients_identity_event(rng):
    n = 6
    y, v = rng.standard_normal(n), rng.standard_normal(n)
    q = line_coefficients(QuadraticEvent(np.eye(n), 0.0), v, y)
    Pv_y = (v @ y) / (v @ v) * v
    assert q.delta == pytest.approx(Pv_y @ Pv_y)
    assert q.zeta == pytest.approx(0.0, abs=1e-12)
    assert q(1.0) == pytest.approx(y @ y)


def test_line_coefficients_constant_event(rng):
    q = line_coefficients(QuadraticEvent(np.zeros((4, 4)), 5.0), rng.standard_normal(4), rng.standard_normal(4))
    assert (q.delta, q.zeta, q.xi) == (0.0, 0.0, 5.0)


def test_line_coefficients_polynomial_identity(rng):
    n = 9
    ev = random_event(rng, n, c=-0.7)
    y, v = rng.standard_normal(n), rng.standard_normal(n)
    q = line_coefficients(ev, v, y)
    Pv = np.outer(v, v) / (v @ v)
    for t in rng.uniform(-5, 5, 100):
        Yt = (np.eye(n) - Pv) @ y + t * Pv @ y
        assert abs(q(t) - ev.value(Yt)) < 1e-8


def test_degenerate_direction():
    v = np.array([1.0, 0.0, 0.0])
    y = np.array([0.0, 1.0, 1.0])
    with pytest.raises(DegenerateDirectionError):
        line_coefficients(QuadraticEvent(np.eye(3), 0.0), v, y)


@pytest.mark.parametrize("coef, expected", [
    ((1, 0, -1), ((-INF, -1.0), (1.0, INF))),
    ((-1, 0, 1), ((-1.0, 1.0),)),
    ((0, 2, -4), ((2.0, INF),)),
    ((0, -2, -4), ((-INF, -2.0),)),
    ((1, 0, 1), ((-INF, INF),)),
    ((-1, 0, -1), ()),
    ((0, 0, 1), ((-INF, INF),)),
    ((0, 0, -1), ()),
])
def test_solve_t_region_cases(coef, expected):
    assert solve_t_region(QuadraticCoefficients(*map(float, coef))).intervals == expected


def test_solve_t_region_tiny_delta():
    # delta far below the linear threshold: half-line
    r = solve_t_region(QuadraticCoefficients(1e-20, 1.0, -3.0))
    assert r.intervals == ((3.0, INF),)
    # small but not negligible delta keeps the far root accurate
    r = solve_t_region(QuadraticCoefficients(1e-9, 1.0, -3.0))
    assert r.intervals[1][0] == pytest.approx(3.0, rel=1e-8)


coef = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


@settings(max_examples=500, deadline=None)
@given(coef, coef, coef, st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20))
def test_region_matches_sign(d, z, x, ts):
    q = QuadraticCoefficients(d, z, x)
    region = solve_t_region(q)
    scale = 1 + abs(d) + abs(z) + abs(x)
    for a, b in region:
        for tau in (a, b):
            if math.isfinite(tau):
                assert abs(q(tau)) < 1e-6 * scale * max(1.0, tau * tau)
    for t in ts:
        val = q(t)
        if abs(val) > 1e-8 * scale * max(1.0, t * t):
            assert region.contains(t) == (val >= 0)


def test_to_statistic_space():
    two = IntervalSet([(-INF, -1), (1, INF)])
    assert to_statistic_space(two, 2.0).intervals == ((-INF, -2.0), (2.0, INF))
    assert to_statistic_space(IntervalSet([(-1, 2)]), -1.0).intervals == ((-2.0, 1.0),)
    with pytest.raises(DegenerateDirectionError):
        to_statistic_space(two, 0.0)


def test_truncation_trivial_logs(rng):
    y, v = rng.standard_normal(5), rng.standard_normal(5)
    assert truncation_for_coefficient(EventLog(), v, y).is_real_line
    vac = EventLog(events=[QuadraticEvent(np.zeros((5, 5)), 1.0)])
    assert truncation_for_coefficient(vac, v, y).is_real_line


def test_violated_event_raises(rng):
    y, v = rng.standard_normal(5), rng.standard_normal(5)
    bad = EventLog(events=[QuadraticEvent(-np.eye(5), 0.0)])
    with pytest.raises(InconsistentEventError):
        truncation_for_coefficient(bad, v, y)


def _scalar_truncation(events, v, y):
    t = intersect([solve_t_region(line_coefficients(ev, v, y)) for ev in events])
    return to_statistic_space(t, float(v @ y))


def test_vectorized_matches_scalar():
    for seed in range(5):
        d = make_dataset(30, 5, seed=seed, signal=[1.0, 0.5, 0, 0, 0.3])
        log = stepwise_forward(d, "AIC")
        V = linalg.test_vectors(d, log.selected)
        fast = coefficient_truncations(log.events, V, d.y)
        for j in range(V.shape[1]):
            slow = _scalar_truncation(log.events, V[:, j], d.y)
            # endpoints from nearly linear events sit astronomically far out and carry
            # only rounding information; compare within a window of many standard errors
            w = 1e6 * (abs(V[:, j] @ d.y) + np.linalg.norm(V[:, j]))
            window = IntervalSet([(-w, w)])
            a, b = slow.intersect(window), fast[j].intersect(window)
            assert len(a) == len(b)
            for (a1, b1), (a2, b2) in zip(a, b):
                for e1, e2 in ((a1, a2), (b1, b2)):
                    assert abs(e1 - e2) <= 1e-9 * max(1.0, abs(e1))


def test_event_replay_membership():
    d = make_dataset(30, 5, seed=21, signal=[1.0, -0.6, 0.4, 0, 0])
    log = stepwise_forward(d, "AIC")
    y = d.y
    rng = np.random.default_rng(3)
    checked = 0
    for j in range(len(log.selected)):
        v = linalg.test_vector(d, log.selected, j)
        trunc = truncation_for_coefficient(log, v, y)
        obs = float(v @ y)
        assert trunc.contains(obs, rtol=1e-8)
        Pv = np.outer(v, v) / (v @ v)
        y_perp = y - Pv @ y
        spread = 4 * abs(obs) + 1
        for s in rng.uniform(obs - spread, obs + spread, 200):
            Ys = y_perp + (s / obs) * (Pv @ y)
            vals = np.array([ev.value(Ys) for ev in log.events])
            margin = np.min(np.abs(vals) / (1 + np.abs(vals - np.array([ev.c for ev in log.events]))))
            if margin < 1e-9:
                continue
            assert trunc.contains(s) == bool(np.all(vals >= 0))
            checked += 1
    assert checked > 500


def test_chi_line_coefficients(rng):
    n = 7
    u = rng.standard_normal(n)
    u /= np.linalg.norm(u)
    q = chi_line_coefficients(QuadraticEvent(np.zeros((n, n)), 3.0), u, rng.standard_normal(n), 2.0)
    assert (q.delta, q.zeta, q.xi) == (0.0, 0.0, 3.0)
    ev = random_event(rng, n, c=0.4)
    q = chi_line_coefficients(ev, u, np.zeros(n), 1.5)
    assert q.delta == pytest.approx(2.25 * u @ ev.A @ u)
    assert q.zeta == 0.0 and q.xi == pytest.approx(0.4)
    z = rng.standard_normal(n)
    q = chi_line_coefficients(ev, u, z, 1.5)
    for T in rng.uniform(0, 6, 100):
        assert abs(q(T) - ev.value(z + 1.5 * T * u)) < 1e-8
    with pytest.raises(InputError):
        chi_line_coefficients(ev, 2 * u, z, 1.0)


def _event_with_region(n, lo_root, hi_root, sign):
    # an event whose chi polynomial along (z = 0, sigma = 1, u = e1) plus a linear term gives sign*(T - lo)(T - hi)
    # built as A = sign * (e1 e1' ) and c handled through z: use z = e2, A couples e1/e2
    A = np.zeros((n, n))
    A[0, 0] = sign
    A[0, 1] = A[1, 0] = -sign * (lo_root + hi_root) / 2
    A[1, 1] = sign * lo_root * hi_root
    return QuadraticEvent(A, 0.0)


def test_chi_truncation_examples():
    n = 4
    u = np.eye(n)[0]
    z = np.eye(n)[1]
    assert chi_truncation(EventLog(), u, z, 1.0) == IntervalSet.nonnegative()
    ev = _event_with_region(n, -1.0, 2.0, 1.0)  # (T + 1)(T - 2) >= 0
    assert chi_truncation([ev], u, z, 1.0, observed=3.0).intervals == ((2.0, INF),)
    ev = _event_with_region(n, -3.0, 5.0, -1.0)  # -(T + 3)(T - 5) >= 0
    assert chi_truncation([ev], u, z, 1.0, observed=1.0).intervals == ((0.0, 5.0),)
    with pytest.raises(InconsistentEventError):
        chi_truncation([ev], u, z, 1.0, observed=6.0)


@pytest.mark.parametrize("coef, expected", [
    ((1e300, 1e300, -1e300), (-1.618033988749895, 0.6180339887498948)),
    ((5e-324, 5e-324, -5e-324), (-1.618033988749895, 0.6180339887498948)),
    ((1e-300, 1.0, 1e299), (-8.872983346207417e299, -1.1270166537925831e299)),
])
def test_extreme_magnitudes_keep_roots(coef, expected):
    region = solve_t_region(QuadraticCoefficients(*coef))
    assert region.intervals[0][1] == pytest.approx(expected[0], rel=1e-12)
    assert region.intervals[1][0] == pytest.approx(expected[1], rel=1e-12)
    assert solve_t_region(QuadraticCoefficients(1e300, 1e300, 1e300)).is_real_line
