"""Truncation regions of test statistics implied by quadratic selection events.

Along the line ``Y(t) = P_v^perp y + t P_v y`` each event becomes the scalar
inequality ``delta t^2 + zeta t + xi >= 0``.  Solving it per event and
intersecting gives the region of ``t``; multiplying by the observed ``v'y``
maps it to the scale of the statistic.  The group test uses the analogous
line ``Y(T) = z + sigma T u`` restricted to ``T >= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateDirectionError, InconsistentEventError, InputError
from .events import EventLog, QuadraticEvent
from .intervals import CONTAIN_RTOL, IntervalSet, intersect

LINEAR_RTOL = 1e-12
DEGENERATE_RTOL = 1e-12
ROOT_RTOL = 1e-12


@dataclass(frozen=True)
class QuadraticCoefficients:
    delta: float
    zeta: float
    xi: float

    def __call__(self, t):
        return (self.delta * t + self.zeta) * t + self.xi


def _check_direction(v: np.ndarray, y: np.ndarray) -> float:
    vy = float(v @ y)
    if not abs(vy) > DEGENERATE_RTOL * np.linalg.norm(v) * np.linalg.norm(y):
        raise DegenerateDirectionError(f"v'y = {vy:.3g} is numerically zero; truncation undefined")
    return vy


def line_coefficients(event: QuadraticEvent, v: np.ndarray, y: np.ndarray) -> QuadraticCoefficients:
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    vy = _check_direction(v, y)
    y_par = (vy / (v @ v)) * v
    y_perp = y - y_par
    A = event.A
    A_par = A @ y_par
    return QuadraticCoefficients(
        delta=float(y_par @ A_par),
        zeta=float(2.0 * (y_perp @ A_par)),
        xi=float(y_perp @ A @ y_perp + event.c),
    )


def _rescale(delta, zeta, xi):
    """Exact power-of-two rescaling when the discriminant's terms would overflow or underflow.

    The region is scale-invariant; the scale ``g`` is that of ``zeta`` and
    ``sqrt(|delta xi|)``, so well-scaled inputs are left untouched.
    """
    with np.errstate(over="ignore"):
        g = np.maximum(np.abs(zeta), np.sqrt(np.abs(delta)) * np.sqrt(np.abs(xi)))
    extreme = (g > 1e150) | ((g < 1e-150) & (g > 0))
    e = np.where(extreme, np.frexp(np.where(extreme, g, 1.0))[1], 0)
    # never scale the largest coefficient past overflow
    m = np.maximum(np.maximum(np.abs(delta), np.abs(zeta)), np.abs(xi))
    e = np.maximum(e, np.frexp(m)[1] - 1000)
    return np.ldexp(delta, -e), np.ldexp(zeta, -e), np.ldexp(xi, -e)


def _is_linear(delta, zeta, xi):
    """Treat ``delta`` as zero when it is tiny and dropping it moves the linear root negligibly.

    At the linear root ``r = -xi/zeta`` the dropped term is ``delta r^2``; it
    must stay below ``ROOT_RTOL |xi|`` (a relative root shift of about
    ``ROOT_RTOL``).  Without this check ``1e-12 t^2 + 1e-300 t + 1`` would
    become a half-line instead of the whole line.
    """
    delta, zeta, xi = (np.asarray(a, dtype=float) for a in (delta, zeta, xi))
    size = np.abs(zeta) + np.abs(xi) + 1.0
    small = np.abs(delta) < LINEAR_RTOL * size
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        root = xi / zeta
        harmless = np.abs(delta) * root * root <= ROOT_RTOL * np.abs(xi)
    return (delta == 0) | (small & (zeta != 0) & harmless)


def quadratic_roots(delta: float, zeta: float, xi: float) -> tuple:
    """Real roots ``tau1 <= tau2`` of a quadratic with positive discriminant.

    The larger-magnitude root comes from the textbook formula with the sign
    chosen to avoid cancellation; its partner follows from ``tau1 tau2 = xi/delta``.
    """
    disc = zeta * zeta - 4.0 * delta * xi
    q = -0.5 * (zeta + math.copysign(math.sqrt(disc), zeta))
    r1 = q / delta
    r2 = xi / q
    return (r1, r2) if r1 <= r2 else (r2, r1)


def solve_t_region(q: QuadraticCoefficients) -> IntervalSet:
    """``{t : delta t^2 + zeta t + xi >= 0}`` as an interval set."""
    delta, zeta, xi = q.delta, q.zeta, q.xi
    if not all(math.isfinite(x) for x in (delta, zeta, xi)):
        raise InputError(f"non-finite quadratic coefficients {q}")
    delta, zeta, xi = (float(a) for a in _rescale(delta, zeta, xi))
    if _is_linear(delta, zeta, xi):
        if zeta > 0:
            return IntervalSet(((-xi / zeta, math.inf),))
        if zeta < 0:
            return IntervalSet(((-math.inf, -xi / zeta),))
        return IntervalSet.real_line() if xi >= 0 else IntervalSet.empty()
    disc = zeta * zeta - 4.0 * delta * xi
    if disc <= 0:
        return IntervalSet.real_line() if delta > 0 else IntervalSet.empty()
    t1, t2 = quadratic_roots(delta, zeta, xi)
    if delta > 0:
        return IntervalSet(((-math.inf, t1), (t2, math.inf)))
    return IntervalSet(((t1, t2),))


def to_statistic_space(t_region: IntervalSet, observed: float) -> IntervalSet:
    if observed == 0 or not math.isfinite(observed):
        raise DegenerateDirectionError("observed statistic is zero; cannot rescale the truncation region")
    return t_region.scale(observed)


# ---------------------------------------------------------------------------
# vectorized path: all events x all directions at once
# ---------------------------------------------------------------------------

def stack_events(events: Sequence[QuadraticEvent], n: Optional[int] = None) -> tuple:
    if not events:
        if n is None:
            raise InputError("cannot infer n from an empty event list")
        return np.zeros((0, n, n)), np.zeros(0)
    return np.stack([ev.A for ev in events]), np.array([ev.c for ev in events])


def batch_line_coefficients(A: np.ndarray, c: np.ndarray, V: np.ndarray, y: np.ndarray) -> tuple:
    """Line coefficients for ``m`` stacked events and ``k`` directions (columns of V).

    Returns three ``(m, k)`` arrays ``delta, zeta, xi``.
    """
    m, n, _ = A.shape
    k = V.shape[1]
    W = np.concatenate([y[:, None], V], axis=1)
    AW = (A.reshape(m * n, n) @ W).reshape(m, n, k + 1)
    Ay, AV = AW[:, :, 0], AW[:, :, 1:]
    s = (V.T @ y) / np.einsum("ij,ij->j", V, V)
    y_perp = y[:, None] - V * s
    A_perp = Ay[:, :, None] - AV * s  # A (y - s v) per direction
    vAv = np.einsum("ij,eij->ej", V, AV)
    delta = s * s * vAv
    zeta = 2.0 * s * np.einsum("ij,eij->ej", V, A_perp)
    xi = np.einsum("ij,eij->ej", y_perp, A_perp) + c[:, None]
    return delta, zeta, xi


def _region_parts(delta, zeta, xi) -> tuple:
    """Per-event region as hull ``[lo, hi]`` minus an open gap ``(g_lo, g_hi)``.

    Empty regions get ``lo = +inf``; missing gaps are NaN.
    """
    delta, zeta, xi = _rescale(*np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (delta, zeta, xi))))
    lo = np.full(delta.shape, -np.inf)
    hi = np.full(delta.shape, np.inf)
    g_lo = np.full(delta.shape, np.nan)
    g_hi = np.full(delta.shape, np.nan)

    linear = _is_linear(delta, zeta, xi)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        root = -xi / zeta
        lo = np.where(linear & (zeta > 0), root, lo)
        hi = np.where(linear & (zeta < 0), root, hi)
        lo = np.where(linear & (zeta == 0) & (xi < 0), np.inf, lo)

        disc = zeta * zeta - 4.0 * delta * xi
        quad = ~linear
        lo = np.where(quad & (disc <= 0) & (delta < 0), np.inf, lo)
        two = quad & (disc > 0)
        q = -0.5 * (zeta + np.copysign(np.sqrt(np.where(two, disc, 0.0)), zeta))
        r1 = q / delta
        r2 = xi / q
    t1 = np.minimum(r1, r2)
    t2 = np.maximum(r1, r2)
    lo = np.where(two & (delta < 0), t1, lo)
    hi = np.where(two & (delta < 0), t2, hi)
    g_lo = np.where(two & (delta > 0), t1, g_lo)
    g_hi = np.where(two & (delta > 0), t2, g_hi)
    return lo, hi, g_lo, g_hi


def _assemble(lo, hi, g_lo, g_hi, floor: float = -math.inf) -> IntervalSet:
    """Intersect per-event regions given as 1-d arrays of hull and gap bounds."""
    L = max(float(np.max(lo, initial=-np.inf)), floor)
    U = float(np.min(hi, initial=np.inf))
    if L > U:
        return IntervalSet.empty()
    has_gap = ~np.isnan(g_lo)
    gl, gh = g_lo[has_gap], g_hi[has_gap]
    keep = (gh > L) & (gl < U)
    pieces = []
    cursor = L
    for a, b in sorted(zip(gl[keep].tolist(), gh[keep].tolist())):
        if a > cursor:
            pieces.append((cursor, a))
        cursor = max(cursor, b)
    if cursor <= U:
        pieces.append((cursor, U))
    return IntervalSet(pieces)


def _t_regions(delta, zeta, xi) -> list:
    """t-space intersection over events (axis 0) for every direction (axis 1)."""
    lo, hi, g_lo, g_hi = _region_parts(delta, zeta, xi)
    return [_assemble(lo[:, j], hi[:, j], g_lo[:, j], g_hi[:, j]) for j in range(delta.shape[1])]


def _check_contains(region: IntervalSet, observed: float, what: str) -> IntervalSet:
    if region.is_empty:
        raise InconsistentEventError(f"{what}: empty truncation set; the data violate a logged event")
    if region.locate(observed, CONTAIN_RTOL) < 0:
        raise InconsistentEventError(
            f"{what}: observed statistic {observed:.10g} lies outside its truncation set {region}"
        )
    return region


def coefficient_truncations(events, V: np.ndarray, y: np.ndarray, stacked: Optional[tuple] = None) -> list:
    """Truncation set (statistic scale) for each column of ``V``.

    Entries are :class:`IntervalSet` or the exception raised for that
    direction, so one degenerate coefficient does not hide the others.
    """
    y = np.asarray(y, dtype=float)
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    k = V.shape[1]
    out: list = [None] * k
    good = []
    for j in range(k):
        try:
            _check_direction(V[:, j], y)
            good.append(j)
        except DegenerateDirectionError as exc:
            out[j] = exc
    if not good:
        return out
    A, c = stacked if stacked is not None else stack_events(list(events), n=y.shape[0])
    Vg = V[:, good]
    observed = Vg.T @ y
    if A.shape[0] == 0:
        regions = [IntervalSet.real_line()] * len(good)
    else:
        regions = _t_regions(*batch_line_coefficients(A, c, Vg, y))
    for j, region, obs in zip(good, regions, observed):
        try:
            _check_contains(region, 1.0, f"direction {j}")
            out[j] = to_statistic_space(region, float(obs))
        except InconsistentEventError as exc:
            out[j] = exc
    return out


def truncation_for_coefficient(log, v: np.ndarray, y: np.ndarray) -> IntervalSet:
    """Truncation set of ``v'Y`` given every event in ``log`` (an EventLog or event list)."""
    events = log.events if isinstance(log, EventLog) else list(log)
    (res,) = coefficient_truncations(events, v, y)
    if isinstance(res, Exception):
        raise res
    return res


# ---------------------------------------------------------------------------
# group (chi) test
# ---------------------------------------------------------------------------

def chi_line_coefficients(event: QuadraticEvent, u: np.ndarray, z: np.ndarray, sigma: float) -> QuadraticCoefficients:
    u = np.asarray(u, dtype=float)
    z = np.asarray(z, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > 1e-10:
        raise InputError("u must be a unit vector")
    if not sigma > 0:
        raise InputError(f"sigma must be positive, got {sigma}")
    Au = event.A @ u
    return QuadraticCoefficients(
        delta=float(sigma * sigma * (u @ Au)),
        zeta=float(2.0 * sigma * (z @ Au)),
        xi=float(z @ event.A @ z + event.c),
    )


def chi_truncation(log, u: np.ndarray, z: np.ndarray, sigma: float,
                   observed: Optional[float] = None) -> IntervalSet:
    """Truncation set of the group statistic ``T >= 0``.

    When ``observed`` is given, the result is checked to contain it.
    """
    events = log.events if isinstance(log, EventLog) else list(log)
    region = intersect([solve_t_region(chi_line_coefficients(ev, u, z, sigma)) for ev in events]
                       + [IntervalSet.nonnegative()])
    if region.is_empty:
        raise InconsistentEventError("empty chi truncation set; the data violate a logged event")
    if observed is not None:
        _check_contains(region, observed, "group statistic")
    return region
