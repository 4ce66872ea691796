"""Convergence diagnostics: residuals, descent potentials, rate certificates.

Every check here consumes a :class:`~alavi.trace.RunTrace` (or raw points)
and produces a :class:`CertificateReport` designed to be falsifiable: it
states the inequality checked, whether it held at every iteration, the
first violating iteration if not, and the worst margin observed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import ConeSpec, ReferencePoint, VIProblem, as_point, prox_apply
from .errors import InsufficientDataError, UsageError
from .params import DerivedConstants
from .trace import RunTrace


@dataclass
class CertificateReport:
    """Outcome of one check over a trace."""

    check: str
    holds: bool
    first_violation: Optional[int] = None
    margin: float = math.inf
    details: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "check": self.check,
            "holds": self.holds,
            "first_violation": self.first_violation,
            "margin": None if math.isinf(self.margin) else float(self.margin),
            "details": _jsonable(self.details),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [float(x) for x in obj.ravel()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# KKT residuals


@dataclass(frozen=True)
class KktBreakdown:
    """Stationarity / primal feasibility / complementarity split of the residual.

    ``exact`` is False when the stationarity part had to fall back to the
    natural-map surrogate (non-separable regularizer on a box), a documented
    lower-fidelity mode.
    """

    stationarity: float
    feasibility: float
    complementarity: float
    exact: bool

    @property
    def total(self) -> float:
        return self.stationarity + self.feasibility + self.complementarity

    @property
    def experiment_error(self) -> float:
        """Stationarity plus feasibility (the metric the run plots use)."""
        return self.stationarity + self.feasibility


def _interval_distance(point: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, np.maximum(lo - point, point - hi))


def kkt_components(u: np.ndarray, p: np.ndarray, problem: VIProblem) -> KktBreakdown:
    """Exact distance-to-inclusion residual split at a primal-dual pair.

    Stationarity is the Euclidean distance from ``-(G(u) + Dtheta(u)^T p)``
    to the componentwise set ``dJ(u) + N_U(u)`` (interval arithmetic, exact
    for separable regularizers over a box).  Feasibility measures the
    violation of ``theta(u) in -C``; complementarity is ``|<p, theta(u)>|``
    for the orthant cone.
    """
    u = as_point(u, problem.n)
    p = as_point(p, problem.m)
    theta_val = problem.theta(u)
    grad = problem.G(u)
    if problem.m > 0:
        grad = grad + problem.theta.jacobian(u).T @ p

    lo_u, hi_u = problem.feasible.bounds()
    if problem.J.is_separable():
        j_lo, j_hi = problem.J.subdiff_interval(u)
        n_lo = np.where(u <= lo_u, -np.inf, 0.0)
        n_hi = np.where(u >= hi_u, np.inf, 0.0)
        dist = _interval_distance(-grad, j_lo + n_lo, j_hi + n_hi)
        stationarity = float(np.linalg.norm(dist))
        exact = True
    else:
        # natural-map surrogate with unit step
        moved = prox_apply(problem.J, u - grad, 1.0)
        stationarity = float(np.linalg.norm(u - problem.feasible.project(moved)))
        exact = False

    if problem.cone.kind == ConeSpec.ORTHANT:
        feasibility = float(np.linalg.norm(np.maximum(theta_val, 0.0)))
        complementarity = float(abs(p @ theta_val))
    else:
        feasibility = float(np.linalg.norm(theta_val))
        complementarity = 0.0
    return KktBreakdown(stationarity, feasibility, complementarity, exact)


def kkt_residual(u: np.ndarray, p: np.ndarray, problem: VIProblem) -> float:
    """Scalar residual: stationarity + feasibility + complementarity."""
    return kkt_components(u, p, problem).total


# ---------------------------------------------------------------------------
# descent potential


def lyapunov_value(
    v: np.ndarray,
    u_prev: np.ndarray,
    u: np.ndarray,
    p_prev: np.ndarray,
    ref: ReferencePoint,
    consts: DerivedConstants,
) -> float:
    """beta1*||v - u_ref||^2 + beta2*||u_prev - u||^2 + beta3*||p_prev - p_ref||^2."""
    dv = v - ref.u
    du = u_prev - u
    dp = p_prev - ref.p
    return float(consts.beta1 * dv @ dv + consts.beta2 * du @ du + consts.beta3 * dp @ dp)


def _ref_matches(trace: RunTrace, ref: Optional[ReferencePoint]) -> bool:
    if ref is None or trace.ref is None:
        return ref is None and trace.ref is not None
    return (
        trace.ref.u.shape == ref.u.shape
        and np.array_equal(trace.ref.u, ref.u)
        and np.array_equal(trace.ref.p, ref.p)
    )


def lyapunov_series(trace: RunTrace, ref: Optional[ReferencePoint] = None) -> np.ndarray:
    """Per-iteration potential values for ``ref`` (recomputing from snapshots
    when the trace was recorded against a different reference)."""
    if _ref_matches(trace, ref):
        series = trace.lyapunov
        if np.all(np.isfinite(series)):
            return series
    ref = ref or trace.ref
    if ref is None:
        raise UsageError("no reference point available for the potential")
    if not trace.has_dense_snapshots():
        raise InsufficientDataError("potential recomputation needs stride-1 snapshots")
    out = np.empty(len(trace))
    u_prev, p_prev = trace.initial_u, trace.initial_p
    for i, k in enumerate(trace.snap_iters):
        out[i] = lyapunov_value(trace.snaps_v[i], u_prev, trace.snaps_u[i], p_prev, ref, trace.consts)
        u_prev, p_prev = trace.snaps_u[i], trace.snaps_p[i]
    return out


def check_descent(trace: RunTrace, ref: Optional[ReferencePoint] = None) -> CertificateReport:
    """Per-step decrease of the potential.

    Checks ``L[k] - L[k+1] >= rho*(step_norm[k]^2 + dual_gap[k]^2) - eps``
    with ``eps = 1e-9*(1 + L[k])`` for every consecutive recorded pair,
    where ``L`` is the potential anchored at a weak-solution reference.
    """
    effective = ref or trace.ref
    if effective is not None and effective.role != "minty":
        raise UsageError("descent certificates need a weak-solution (minty) reference")
    lam = lyapunov_series(trace, ref)
    if len(trace) < 2:
        raise InsufficientDataError("descent check needs at least two iterations")
    rho = trace.consts.rho
    drops = lam[:-1] - lam[1:]
    required = rho * (trace.step_norm[:-1] ** 2 + trace.dual_gap_norm[:-1] ** 2)
    eps = 1e-9 * (1.0 + lam[:-1])
    slack = drops - required
    violations = np.where(slack < -eps)[0]
    first = int(trace.iters[violations[0]]) if violations.size else None
    return CertificateReport(
        check="descent",
        holds=violations.size == 0,
        first_violation=first,
        margin=float(slack.min()) if slack.size else math.inf,
        details={"iterations": len(trace), "rho": rho},
    )


def check_monotone_potential(trace: RunTrace, ref: Optional[ReferencePoint] = None) -> CertificateReport:
    """Non-increase of the potential itself, relative tolerance 1e-9."""
    lam = lyapunov_series(trace, ref)
    rises = lam[1:] - lam[:-1]
    tol = 1e-9 * (1.0 + lam[:-1])
    bad = np.where(rises > tol)[0]
    return CertificateReport(
        check="potential-nonincreasing",
        holds=bad.size == 0,
        first_violation=int(trace.iters[bad[0] + 1]) if bad.size else None,
        margin=float(-(rises.max())) if rises.size else math.inf,
    )


def summed_squares_certificate(trace: RunTrace, ref: Optional[ReferencePoint] = None) -> CertificateReport:
    """Dyadic-window bound tying the smallest step in (K, 2K] to the potential.

    For each dyadic ``K`` with ``2K <= len(trace)`` asserts
    ``rho * K * min_{K+1<=k<=2K} step_norm[k]^2 <= L[K+1] + 1e-9`` and
    reports ``sqrt(K) * min-step`` per window for trend display.
    """
    lam = lyapunov_series(trace, ref)
    n = len(trace)
    if n < 2:
        raise InsufficientDataError("summed-squares check needs at least two iterations")
    rho = trace.consts.rho
    trend = []
    worst = math.inf
    first = None
    k_window = 1
    while 2 * k_window <= n:
        window = trace.step_norm[k_window : 2 * k_window]  # iterations K+1 .. 2K
        min_step = float(window.min())
        lhs = rho * k_window * min_step**2
        rhs = float(lam[k_window])  # L at iteration K+1
        slack = rhs + 1e-9 - lhs
        worst = min(worst, rhs - lhs)
        if slack < 0 and first is None:
            first = k_window
        trend.append((k_window, math.sqrt(k_window) * min_step))
        k_window *= 2
    return CertificateReport(
        check="summed-squares",
        holds=first is None,
        first_violation=first,
        margin=worst,
        details={"sqrt_k_min_step": trend},
    )


def stationarity_bound(trace: RunTrace, consts: Optional[DerivedConstants] = None) -> tuple[np.ndarray, CertificateReport]:
    """Bound series ``sigma * step_norm[k]`` and its comparison to the residual.

    The comparison ``kkt[k] <= sigma*step_norm[k] + 1e-8`` is asserted only
    when the trace's residuals were computed exactly (affine constraints,
    separable regularizer).
    """
    consts = consts or trace.consts
    series = consts.sigma * trace.step_norm
    if not trace.kkt_exact:
        report = CertificateReport(
            check="stationarity-bound", holds=True,
            details={"skipped": "residuals are natural-map surrogates"},
        )
        return series, report
    slack = series + 1e-8 - trace.kkt_residual
    bad = np.where(slack < 0)[0]
    report = CertificateReport(
        check="stationarity-bound",
        holds=bad.size == 0,
        first_violation=int(trace.iters[bad[0]]) if bad.size else None,
        margin=float((series - trace.kkt_residual).min()) if len(trace) else math.inf,
        details={"sigma": consts.sigma},
    )
    return series, report


# ---------------------------------------------------------------------------
# ergodic certificates


def ergodic_averages(trace: RunTrace, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Running means of the primal iterates and the extrapolated duals up to ``t``.

    The dual average deliberately uses the extrapolated multiplier sequence,
    not the plain dual iterates.
    """
    if t < 1:
        raise UsageError("t must be at least 1")
    try:
        i = trace.ergodic_iters.index(t)
    except ValueError:
        raise UsageError(f"no ergodic record at t={t} (recorded: up to {trace.ergodic_iters[-1:]})")
    return trace.ergodic_u[i], trace.ergodic_q[i]


def gap_certificate(
    u_avg: np.ndarray,
    p_avg: np.ndarray,
    zeta: np.ndarray,
    lam: np.ndarray,
    problem: VIProblem,
) -> float:
    """Saddle-gap value at a certificate pair.

    ``<G(zeta), u_avg - zeta> + J(u_avg) - J(zeta) + <lam, theta(u_avg)>
    - <p_avg, theta(zeta)>``; evaluated at a saddle point this lower-bounds
    the restricted primal-dual gap of the averaged iterates.
    """
    zeta = as_point(zeta, problem.n)
    lam = as_point(lam, problem.m)
    if not problem.feasible.contains(zeta, tol=1e-9):
        raise UsageError("certificate point zeta lies outside the feasible set")
    if not problem.cone.in_dual(lam, tol=1e-9):
        raise UsageError("certificate multiplier lam lies outside the dual cone")
    u_avg = as_point(u_avg, problem.n)
    p_avg = as_point(p_avg, problem.m)
    g_zeta = problem.G(zeta)
    return (
        float(g_zeta @ (u_avg - zeta))
        + problem.J.value(u_avg)
        - problem.J.value(zeta)
        + float(lam @ problem.theta(u_avg))
        - float(p_avg @ problem.theta(zeta))
    )


def check_ergodic_gap(
    trace: RunTrace,
    problem: VIProblem,
    ref: Optional[ReferencePoint] = None,
    t_max: Optional[int] = None,
) -> CertificateReport:
    """O(1/t) bound on the gap of averaged iterates (monotone mappings).

    Asserts ``Psi(u_avg_t, p_avg_t, u_ref, p_ref) <= L[1]/t`` at every
    recorded ergodic index ``t``.
    """
    ref = ref or trace.ref
    if ref is None:
        raise UsageError("ergodic gap check needs a reference saddle point")
    if not trace.ergodic_iters:
        raise InsufficientDataError("trace has no ergodic records")
    lam1 = float(lyapunov_series(trace, ref)[0])
    worst = math.inf
    first = None
    checked = 0
    for i, t in enumerate(trace.ergodic_iters):
        if t_max is not None and t > t_max:
            break
        psi = gap_certificate(trace.ergodic_u[i], trace.ergodic_q[i], ref.u, ref.p, problem)
        slack = lam1 / t - psi
        worst = min(worst, slack)
        if slack < 0 and first is None:
            first = t
        checked += 1
    return CertificateReport(
        check="ergodic-gap",
        holds=first is None,
        first_violation=first,
        margin=worst,
        details={"t_checked": checked, "potential_at_1": lam1},
    )


# ---------------------------------------------------------------------------
# weighted distance and linear rate


def weighted_distance(
    z: tuple[np.ndarray, np.ndarray],
    ref_set: Sequence[ReferencePoint],
    consts: DerivedConstants,
) -> float:
    """Squared weighted distance from ``z = (v, p_prev)`` to a finite
    candidate solution set: ``min_ref beta1*||v-u||^2 + beta3*||p_prev-p||^2``."""
    if not ref_set:
        raise UsageError("weighted_distance needs a nonempty candidate set")
    v, p_prev = z
    best = math.inf
    for ref in ref_set:
        dv = as_point(v) - ref.u
        dp = as_point(p_prev) - ref.p
        best = min(best, float(consts.beta1 * dv @ dv + consts.beta3 * dp @ dp))
    return best


@dataclass(frozen=True)
class RateFit:
    rate: float
    r_squared: float
    floored: bool = False


def fit_linear_rate(series: np.ndarray, floor: float = 1e-16) -> RateFit:
    """Least-squares geometric decay factor of a positive series.

    Fits ``log(series_k)`` against ``k``; returns ``exp(slope)`` and the
    R^2 of the fit.  Nonpositive entries are floored at ``floor`` and
    flagged.
    """
    series = np.asarray(series, dtype=float)
    if series.size < 10:
        raise UsageError("rate fitting needs at least 10 points")
    floored = bool(np.any(series <= 0))
    series = np.maximum(series, floor)
    k = np.arange(series.size, dtype=float)
    logs = np.log(series)
    slope, intercept = np.polyfit(k, logs, 1)
    fitted = slope * k + intercept
    ss_res = float(np.sum((logs - fitted) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return RateFit(rate=float(math.exp(slope)), r_squared=r2, floored=floored)


def distance_plus_step_series(
    trace: RunTrace, ref_set: Sequence[ReferencePoint], consts: Optional[DerivedConstants] = None
) -> np.ndarray:
    """Series ``wd^2(z_k) + beta2*||u_{k-1}-u_k||^2`` from dense snapshots."""
    consts = consts or trace.consts
    if not trace.has_dense_snapshots():
        raise InsufficientDataError("distance series needs stride-1 snapshots")
    out = np.empty(len(trace))
    u_prev, p_prev = trace.initial_u, trace.initial_p
    for i in range(len(trace)):
        wd = weighted_distance((trace.snaps_v[i], p_prev), ref_set, consts)
        du = u_prev - trace.snaps_u[i]
        out[i] = wd + consts.beta2 * float(du @ du)
        u_prev, p_prev = trace.snaps_u[i], trace.snaps_p[i]
    return out


def check_linear_rate(
    trace: RunTrace,
    ref_set: Sequence[ReferencePoint],
    transient_fraction: float = 0.2,
    rate_max: float = 0.999,
    r2_min: float = 0.9,
) -> tuple[CertificateReport, RateFit]:
    """Geometric decay of the weighted distance-plus-step series.

    Checks the series is non-increasing (relative tolerance 1e-9) and that
    the square root of its post-transient tail fits a geometric decay with
    ``rate < rate_max`` and ``R^2 >= r2_min``.  The transient trim length
    is configurable because the error-bound regime only kicks in
    eventually.
    """
    series = distance_plus_step_series(trace, ref_set)
    rises = series[1:] - series[:-1]
    tol = 1e-9 * np.maximum(1.0, series[:-1])
    bad = np.where(rises > tol)[0]
    start = int(len(series) * transient_fraction)
    window = np.sqrt(np.maximum(series[start:], 0.0))
    fit = fit_linear_rate(window)
    holds = bad.size == 0 and fit.rate < rate_max and fit.r_squared >= r2_min
    report = CertificateReport(
        check="linear-rate",
        holds=holds,
        first_violation=int(trace.iters[bad[0] + 1]) if bad.size else None,
        margin=float(-rises.max()) if rises.size else math.inf,
        details={"rate": fit.rate, "r_squared": fit.r_squared, "window_start": start,
                 "nonincreasing": bool(bad.size == 0)},
    )
    return report, fit


# ---------------------------------------------------------------------------
# refined per-step inequality (small instances, dense snapshots)


def check_master_inequality(
    trace: RunTrace, problem: VIProblem, ref: Optional[ReferencePoint] = None
) -> CertificateReport:
    """Per-step potential drop against its full lower bound.

    The drop must dominate the frozen-mapping Lagrangian bracket plus the
    mapping-variation term plus ``rho*(step^2 + dual gap^2)``; this is the
    refined inequality behind the plain descent check, evaluable when the
    regularizer and constraint values are cheap.
    """
    ref = ref or trace.ref
    if ref is None:
        raise UsageError("master inequality needs a reference point")
    if not trace.has_dense_snapshots():
        raise InsufficientDataError("master inequality needs stride-1 snapshots")
    lam = lyapunov_series(trace, ref)
    g_ref = problem.G(ref.u)
    rho = trace.consts.rho
    worst = math.inf
    first = None
    for i in range(len(trace) - 1):
        u_i = trace.snaps_u[i]
        q_i = trace.snaps_q[i]
        bracket = problem.lagrangian_linear(g_ref, u_i, ref.p) - problem.lagrangian_linear(g_ref, ref.u, q_i)
        variation = float((problem.G(u_i) - g_ref) @ (u_i - ref.u))
        required = bracket + variation + rho * (trace.step_norm[i] ** 2 + trace.dual_gap_norm[i] ** 2)
        slack = (lam[i] - lam[i + 1]) - required
        eps = 1e-9 * (1.0 + abs(lam[i]))
        worst = min(worst, slack)
        if slack < -eps and first is None:
            first = int(trace.iters[i])
    return CertificateReport(
        check="master-inequality",
        holds=first is None,
        first_violation=first,
        margin=worst,
    )


# ---------------------------------------------------------------------------
# bundled pipeline


def certify_run(
    trace: RunTrace,
    problem: VIProblem,
    ref: Optional[ReferencePoint] = None,
    monotone: bool = False,
) -> dict[str, CertificateReport]:
    """Run the standard certificate battery on a finished trace."""
    ref = ref or trace.ref or problem.reference
    reports: dict[str, CertificateReport] = {}
    reports["descent"] = check_descent(trace, ref)
    reports["potential-nonincreasing"] = check_monotone_potential(trace, ref)
    reports["summed-squares"] = summed_squares_certificate(trace, ref)
    _, reports["stationarity-bound"] = stationarity_bound(trace)
    if monotone:
        reports["ergodic-gap"] = check_ergodic_gap(trace, problem, ref)
    return reports
