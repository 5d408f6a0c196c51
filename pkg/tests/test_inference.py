import math

import numpy as np
import pytest
from scipy import integrate, stats

from selinf import linalg
from selinf.errors import DegenerateDirectionError, InputError, PrecisionError
from selinf.events import EventLog, QuadraticEvent
from selinf.inference import (
    analyze_coefficients,
    analyze_group,
    classical_chi_p_value,
    selective_confidence_interval,
    selective_p_value,
    truncated_chi_survival,
    truncated_normal_survival,
)
from selinf.intervals import IntervalSet
from selinf.linalg import Dataset
from selinf.selection import stepwise_forward

from conftest import make_dataset

INF = math.inf
Z975 = stats.norm.ppf(0.975)


def quad_survival(x, theta, scale, trunc):
    pdf = lambda s: stats.norm.pdf(s, theta, scale)  # noqa: E731
    def mass(a, b):
        return integrate.quad(pdf, a, b, epsabs=1e-14, epsrel=1e-12)[0]
    total = sum(mass(a, b) for a, b in trunc)
    above = sum(mass(max(a, x), b) for a, b in trunc if b > x)
    return above / total


def test_survival_examples():
    assert truncated_normal_survival(0.0, 0.0, 1.0, IntervalSet.real_line()) == pytest.approx(0.5)
    box = IntervalSet([(0.3, 2.0)])
    assert truncated_normal_survival(0.3, 0.0, 1.0, box) == pytest.approx(1.0)
    assert truncated_normal_survival(2.0, 0.0, 1.0, box) == pytest.approx(0.0, abs=1e-15)
    half = IntervalSet([(1.0, INF)])
    expected = stats.norm.sf(1.959964) / stats.norm.sf(1.0)
    assert truncated_normal_survival(1.959964, 0.0, 1.0, half) == pytest.approx(expected, rel=1e-10)
    assert truncated_normal_survival(1.959964, 0.0, 1.0, half) == pytest.approx(0.15766, abs=1e-4)


def test_survival_quadrature_random():
    rng = np.random.default_rng(1)
    for _ in range(25):
        ends = np.sort(rng.uniform(-4, 4, 4))
        trunc = IntervalSet([(-INF, ends[0]), (ends[1], ends[2]), (ends[3], INF)])
        x = float(rng.uniform(ends[1], ends[2]))
        theta, scale = float(rng.uniform(-2, 2)), float(rng.uniform(0.5, 2))
        assert truncated_normal_survival(x, theta, scale, trunc) == pytest.approx(
            quad_survival(x, theta, scale, trunc), abs=1e-9)


def test_far_tail_truncation():
    # mass 40 standard deviations out, where naive differences underflow to 0/0
    trunc = IntervalSet([(40.0, 41.0), (45.0, INF)])
    s = truncated_normal_survival(40.5, 0.0, 1.0, trunc)
    # tail ratio via the log channel of the reference implementation
    lm = lambda a, b: stats.norm.logsf(a) + np.log1p(-np.exp(stats.norm.logsf(b) - stats.norm.logsf(a)))  # noqa: E731
    above = np.logaddexp(lm(40.5, 41.0), stats.norm.logsf(45.0))
    total = np.logaddexp(lm(40.0, 41.0), stats.norm.logsf(45.0))
    assert s == pytest.approx(math.exp(above - total), rel=1e-9)
    assert 0 < s < 1


def test_survival_errors():
    with pytest.raises(InputError):
        truncated_normal_survival(5.0, 0.0, 1.0, IntervalSet([(0, 1)]))
    with pytest.raises(PrecisionError):
        truncated_normal_survival(1e200, 0.0, 1.0, IntervalSet([(1e200, 2e200)]))


def test_p_value_examples():
    assert selective_p_value(1.959964, 0.0, 1.0, 1.0, IntervalSet.real_line()) == pytest.approx(0.05, abs=1e-4)
    trunc = IntervalSet([(1.0, INF)])
    med = stats.norm.isf(stats.norm.sf(1.0) / 2)  # conditional median of N(0, 1) on [1, inf)
    assert selective_p_value(med, 0.0, 1.0, 1.0, trunc) == pytest.approx(1.0, abs=1e-12)
    p = selective_p_value(1.959964, 0.0, 1.0, 1.0, trunc)
    pt = quad_survival(1.959964, 0.0, 1.0, trunc)
    assert p == pytest.approx(2 * min(pt, 1 - pt), abs=1e-10)
    assert p == pytest.approx(0.31532, abs=2e-4)


def test_classical_reduction():
    rng = np.random.default_rng(2)
    for _ in range(50):
        x, th = rng.normal(0, 3, 2)
        sigma, vv = rng.uniform(0.2, 3, 2)
        scale = sigma * math.sqrt(vv)
        p = selective_p_value(x, th, sigma, vv, IntervalSet.real_line())
        assert p == pytest.approx(2 * stats.norm.sf(abs(x - th) / scale), abs=1e-10)
        ci = selective_confidence_interval(x, sigma, vv, IntervalSet.real_line(), 0.95)
        assert ci.lower == pytest.approx(x - Z975 * scale, abs=1e-8)
        assert ci.upper == pytest.approx(x + Z975 * scale, abs=1e-8)


def test_ci_duality_and_monotonicity():
    rng = np.random.default_rng(3)
    for _ in range(20):
        ends = np.sort(rng.uniform(-3, 3, 2))
        trunc = IntervalSet([(-INF, ends[0]), (ends[1], INF)])
        x = float(ends[1] + rng.exponential(0.7))
        sigma, vv = float(rng.uniform(0.5, 1.5)), float(rng.uniform(0.5, 1.5))
        ci = selective_confidence_interval(x, sigma, vv, trunc, 0.9)
        assert ci.lower <= x <= ci.upper or ci.lower <= ci.upper
        for th in (ci.lower, ci.upper):
            assert selective_p_value(x, th, sigma, vv, trunc) == pytest.approx(0.1, abs=1e-6)
        scale = sigma * math.sqrt(vv)
        grid = np.linspace(x - 10 * scale, x + 10 * scale, 100)
        surv = [truncated_normal_survival(x, th, scale, trunc) for th in grid]
        assert all(b >= a - 1e-15 for a, b in zip(surv, surv[1:]))


def test_chi_survival():
    assert truncated_chi_survival(2.0, 2, IntervalSet.nonnegative()) == pytest.approx(math.exp(-2), abs=1e-12)
    assert truncated_chi_survival(3.0, 3, IntervalSet([(1, 3)])) == pytest.approx(0.0, abs=1e-15)
    pdf = lambda t: stats.chi.pdf(t, 3)  # noqa: E731
    ref = integrate.quad(pdf, 2, 3)[0] / integrate.quad(pdf, 1, 3)[0]
    assert truncated_chi_survival(2.0, 3, IntervalSet([(1, 3)])) == pytest.approx(ref, abs=1e-10)
    with pytest.raises(InputError):
        truncated_chi_survival(1.0, 2, IntervalSet([(-1, 3)]))


def test_chi_far_tail():
    trunc = IntervalSet([(30.0, 31.0), (35.0, INF)])
    s = truncated_chi_survival(30.5, 4, trunc)
    ls = lambda t: stats.chi.logsf(t, 4)  # noqa: E731
    lm = lambda a, b: ls(a) + np.log1p(-np.exp(ls(b) - ls(a)))  # noqa: E731
    ref = math.exp(np.logaddexp(lm(30.5, 31.0), ls(35.0)) - np.logaddexp(lm(30.0, 31.0), ls(35.0)))
    assert s == pytest.approx(ref, rel=1e-8)


def test_analyze_empty_log_is_naive():
    d = make_dataset(30, 3, seed=4, signal=[1.0, 0.5, 0.0])
    log = EventLog(selected=(0, 1, 2, 3))
    for mode, sigma in (("known", 1.3), ("reml_plugin", None)):
        for res in analyze_coefficients(d, log, mode, sigma, 0.95):
            assert res.ok
            assert res.test.p_value == pytest.approx(res.naive_p_value, abs=1e-8)
            assert res.ci.lower == pytest.approx(res.naive_ci.lower, abs=1e-8)
            assert res.ci.upper == pytest.approx(res.naive_ci.upper, abs=1e-8)


def test_analyze_variance_modes():
    X = np.column_stack([np.ones(8), np.arange(8.0)])
    d = Dataset(X @ [1.0, 0.5], X)
    log = EventLog(selected=(0, 1))
    assert all(r.ok for r in analyze_coefficients(d, log, "known", 1.0))
    with pytest.raises(InputError):
        analyze_coefficients(d, log, "reml_plugin")
    with pytest.raises(InputError):
        analyze_coefficients(d, log, "known", None)


def test_analyze_degenerate_coefficient_reported_inline():
    rng = np.random.default_rng(5)
    n = 20
    X = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
    y = rng.standard_normal(n)
    d0 = Dataset(y, X)
    v = linalg.test_vector(d0, (0, 1, 2), 2)
    d = Dataset(y - (v @ y) / (v @ v) * v, X)  # coefficient 2 is exactly zero
    res = analyze_coefficients(d, EventLog(selected=(0, 1, 2)), "known", 1.0)
    assert res[0].ok and res[1].ok
    assert not res[2].ok and "DegenerateDirection" in res[2].error


def test_rejection_sampling_oracle_post_aic():
    d = make_dataset(30, 5, seed=6, signal=[0.8, -0.4, 0.0, 0.0, 0.3])
    log = stepwise_forward(d, "AIC")
    sigma = 1.0
    res = analyze_coefficients(d, log, "known", sigma)
    rng = np.random.default_rng(7)
    for r in res[:3]:
        scale = r.test.scale
        draws = rng.normal(0.0, scale, 400_000)
        keep = np.zeros(draws.size, bool)
        for a, b in r.test.truncation:
            keep |= (draws >= a) & (draws <= b)
        kept = draws[keep]
        if kept.size < 20_000:
            continue
        pt = np.mean(kept > r.estimate)
        p_mc = 2 * min(pt, 1 - pt)
        se = 2 * math.sqrt(pt * (1 - pt) / kept.size)
        assert abs(r.test.p_value - p_mc) <= 4 * se + 1e-12


def test_group_reduction_and_errors():
    d = make_dataset(25, 3, seed=8, signal=[0.7, 0.3, 0.0])
    log = EventLog(selected=(0, 1, 2, 3))
    res = analyze_group(d, log, (1,), 1.2)
    assert res.df == 1
    Pg = linalg.group_projection(d, (0, 1, 2, 3), (1,))
    T = np.linalg.norm(Pg @ d.y) / 1.2
    assert res.p_value == pytest.approx(stats.chi2.sf(T * T, 1), abs=1e-12)
    res2 = analyze_group(d, log, (2, 3), 1.2)
    assert res2.p_value == pytest.approx(classical_chi_p_value(res2.statistic, 2), abs=1e-12)
    with pytest.raises(InputError):
        analyze_group(d, log, (0, 1, 2, 3), 1.0)
    with pytest.raises(InputError):
        analyze_group(d, log, (1,), None)


def test_group_degenerate():
    rng = np.random.default_rng(9)
    n = 15
    X = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
    y0 = rng.standard_normal(n)
    Pg = linalg.group_projection(Dataset(y0, X), (0, 1, 2), (2,))
    d = Dataset(y0 - Pg @ y0, X)
    with pytest.raises(DegenerateDirectionError):
        analyze_group(d, EventLog(selected=(0, 1, 2)), (2,), 1.0)


def test_group_one_event_rejection_oracle():
    d = make_dataset(40, 4, seed=10, signal=[0.6, 0.4, 0.0, 0.0])
    log = stepwise_forward(d, "AIC")
    group = [c for c in log.selected if c != 0][:2]
    if len(group) == len(log.selected):
        group = group[:1]
    sigma = 1.0
    one = EventLog(events=log.events[:1], selected=log.selected)
    res = analyze_group(d, one, group, sigma)
    rng = np.random.default_rng(11)
    T = np.sqrt(rng.chisquare(res.df, 500_000))
    keep = np.zeros(T.size, bool)
    for a, b in res.truncation:
        keep |= (T >= a) & (T <= b)
    kept = T[keep]
    p_mc = np.mean(kept > res.statistic)
    se = math.sqrt(max(p_mc * (1 - p_mc), 1e-12) / kept.size)
    assert abs(res.p_value - p_mc) <= 4 * se + 1e-6
