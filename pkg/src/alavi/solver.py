"""The primal-dual iteration engine.

One iteration extrapolates the primal iterate, lifts the multiplier
through the dual-cone projection of a penalized constraint value, solves a
strongly convex primal subproblem built around the frozen mapping value,
and re-projects the multiplier at the new point:

    v <- (1-eta)*u + eta*v
    q <- P(p + gamma*theta(u))
    u <- argmin_{u' in U}  <G(u), u'> + J(u') + <q, theta(u')> + ||u'-v||^2/(2*alpha)
    p <- P(p + gamma*theta(u))

The subproblem decomposes coordinatewise whenever the regularizer is
separable and the constraint term is (or has been linearized to) an affine
function, which covers every built-in experiment family in closed form.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    ConstraintMap,
    FeasibleSet,
    MappingSpec,
    ProxFunction,
    ReferencePoint,
    VIProblem,
    as_point,
    problem_hash,
    prox_apply,
)
from .certify import kkt_components, lyapunov_value
from .errors import (
    CapabilityError,
    ConvergenceError,
    DivergenceError,
    EstimationError,
    ParameterError,
    UsageError,
)
from .params import SolverParams, StopRule, resolve_params
from .rng import PortableRng
from .trace import IterationRecord, RunTrace

CLOSED_FORM = "closed-form"
INNER_ITERATIVE = "inner-iterative"
AUTO = "auto"


@dataclass(frozen=True)
class IterateState:
    """Solver state after ``k`` completed iterations.

    ``u`` and ``p`` are the current primal/dual iterates, ``v`` the latest
    extrapolation point, ``q`` the multiplier used by the last subproblem
    (None before the first step).  ``theta_u`` and ``g_u`` cache the
    constraint and mapping values at ``u``.
    """

    k: int
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    q: Optional[np.ndarray]
    theta_u: np.ndarray
    g_u: np.ndarray

    @staticmethod
    def initial(problem: VIProblem, u0, p0=None) -> "IterateState":
        u0 = problem.feasible.project(as_point(u0, problem.n))
        p0 = np.zeros(problem.m) if p0 is None else as_point(p0, problem.m)
        p0 = problem.cone.dual_project(p0)
        return IterateState(
            k=0, u=u0, v=u0.copy(), p=p0, q=None,
            theta_u=problem.theta(u0), g_u=problem.G(u0),
        )


def _closed_form_minimizer(
    j: ProxFunction, feasible: FeasibleSet, v: np.ndarray, alpha: float, lin: np.ndarray
) -> np.ndarray:
    """argmin <lin,u> + J(u) + ||u-v||^2/(2*alpha) over a box, coordinatewise.

    Valid for separable J: the box clamp after the scalar prox is the exact
    per-coordinate minimizer of the piecewise-quadratic objective.
    """
    candidate = prox_apply(j, v - alpha * lin, alpha)
    return feasible.project(candidate)


def solve_primal_subproblem(
    problem: VIProblem,
    g_at_uk: np.ndarray,
    q: np.ndarray,
    v: np.ndarray,
    alpha: float,
    strategy: str = AUTO,
    inner_tol: float = 1e-10,
    max_inner: int = 20000,
    linearize_at: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Solve the regularized primal subproblem at an extrapolation point.

    Parameters
    ----------
    g_at_uk : frozen mapping value entering the linear term.
    q : multiplier weighting the constraint term; must be dual-feasible.
    v : extrapolation point anchoring the quadratic.
    alpha : positive primal step.
    strategy : "closed-form", "inner-iterative" or "auto".
    linearize_at : when given, the constraint term is replaced by its
        first-order expansion at this point, making the closed form
        applicable to nonlinear constraint maps.
    """
    if alpha <= 0:
        raise ParameterError("alpha must be positive")
    q = as_point(q, problem.m)
    if not problem.cone.in_dual(q, tol=1e-9):
        raise UsageError("subproblem multiplier q must lie in the dual cone")
    v = as_point(v, problem.n)
    g_at_uk = as_point(g_at_uk, problem.n)

    affine_like = problem.theta.kind == ConstraintMap.AFFINE or linearize_at is not None
    closed_ok = affine_like and problem.J.kind != ProxFunction.CUSTOM
    if strategy == AUTO:
        strategy = CLOSED_FORM if closed_ok else INNER_ITERATIVE
    if strategy == CLOSED_FORM:
        if not closed_ok:
            raise CapabilityError("closed form needs an affine(ized) constraint and a separable regularizer")
        jac = problem.theta.jacobian(linearize_at if linearize_at is not None else v)
        lin = g_at_uk + (jac.T @ q if problem.m > 0 else 0.0)
        return _closed_form_minimizer(problem.J, problem.feasible, v, alpha, lin)
    if strategy != INNER_ITERATIVE:
        raise UsageError(f"unknown subproblem strategy {strategy!r}")

    return _inner_prox_gradient(problem, g_at_uk, q, v, alpha, inner_tol, max_inner, linearize_at)


def _inner_prox_gradient(
    problem: VIProblem,
    g0: np.ndarray,
    q: np.ndarray,
    v: np.ndarray,
    alpha: float,
    inner_tol: float,
    max_inner: int,
    linearize_at: Optional[np.ndarray],
) -> np.ndarray:
    """Proximal gradient with backtracking on the smooth part.

    The objective is (1/alpha)-strongly convex, so the fixed-point residual
    contracts linearly; the loop stops once it drops below ``inner_tol``.
    """
    theta = problem.theta
    if theta.kind == ConstraintMap.GENERAL and theta.jacobian_fn is None:
        raise CapabilityError("inner-iterative subproblem needs a constraint jacobian")
    if problem.J.kind == ProxFunction.CUSTOM and problem.J.prox_fn is None:
        raise CapabilityError("custom regularizer lacks a prox")

    frozen_jac = theta.jacobian(linearize_at) if linearize_at is not None else None

    def smooth_val(u):
        if frozen_jac is not None:
            cons = float(q @ (frozen_jac @ u))
        else:
            cons = float(q @ theta(u)) if problem.m > 0 else 0.0
        d = u - v
        return float(g0 @ u) + cons + float(d @ d) / (2.0 * alpha)

    def smooth_grad(u):
        if frozen_jac is not None:
            jac = frozen_jac
        else:
            jac = theta.jacobian(u)
        g = g0 + (u - v) / alpha
        if problem.m > 0:
            g = g + jac.T @ q
        return g

    def prox_feasible(x, t):
        return problem.feasible.project(prox_apply(problem.J, x, t))

    u = problem.feasible.project(v)
    t = alpha
    f_u = smooth_val(u)
    residual = np.inf
    for _ in range(max_inner):
        grad = smooth_grad(u)
        while True:
            u_new = prox_feasible(u - t * grad, t)
            d = u_new - u
            if smooth_val(u_new) <= f_u + float(grad @ d) + float(d @ d) / (2.0 * t) + 1e-15:
                break
            t *= 0.5
            if t < 1e-18:
                raise ConvergenceError("backtracking step underflow", float(np.linalg.norm(d) / max(t, 1e-30)))
        residual = float(np.linalg.norm(u_new - u) / t)
        u = u_new
        f_u = smooth_val(u)
        if residual <= inner_tol:
            return u
        t = min(t * 1.25, alpha)
    raise ConvergenceError("inner subproblem iteration cap exceeded", residual)


def alavi_step(
    state: IterateState,
    problem: VIProblem,
    params: SolverParams,
    strategy: str = AUTO,
    inner_tol: float = 1e-10,
) -> IterateState:
    """One full iteration from a resolved parameter triple."""
    if not params.resolved():
        raise ParameterError("params must be resolved before stepping")
    eta, gamma, alpha = float(params.eta), float(params.gamma), float(params.alpha)
    v_new = (1.0 - eta) * state.u + eta * state.v
    q_new = problem.cone.dual_project(state.p + gamma * state.theta_u)
    try:
        u_next = solve_primal_subproblem(
            problem, state.g_u, q_new, v_new, alpha, strategy=strategy, inner_tol=inner_tol
        )
    except ConvergenceError as err:
        raise ConvergenceError(f"subproblem failed at iteration {state.k + 1}", err.residual) from err
    theta_next = problem.theta(u_next)
    p_next = problem.cone.dual_project(state.p + gamma * theta_next)
    return IterateState(
        k=state.k + 1, u=u_next, v=v_new, p=p_next, q=q_new,
        theta_u=theta_next, g_u=problem.G(u_next),
    )


def alavi_step_linearized(
    state: IterateState,
    problem: VIProblem,
    params: SolverParams,
    inner_tol: float = 1e-10,
) -> IterateState:
    """Iteration with the constraint term linearized at the current iterate.

    For affine constraint maps this reproduces :func:`alavi_step` exactly.
    Treated as experimental: excluded from the certified descent checks.
    """
    if not params.resolved():
        raise ParameterError("params must be resolved before stepping")
    eta, gamma, alpha = float(params.eta), float(params.gamma), float(params.alpha)
    v_new = (1.0 - eta) * state.u + eta * state.v
    q_new = problem.cone.dual_project(state.p + gamma * state.theta_u)
    u_next = solve_primal_subproblem(
        problem, state.g_u, q_new, v_new, alpha,
        strategy=CLOSED_FORM, inner_tol=inner_tol, linearize_at=state.u,
    )
    theta_next = problem.theta(u_next)
    p_next = problem.cone.dual_project(state.p + gamma * theta_next)
    return IterateState(
        k=state.k + 1, u=u_next, v=v_new, p=p_next, q=q_new,
        theta_u=theta_next, g_u=problem.G(u_next),
    )


def estimate_lipschitz(
    mapping: MappingSpec,
    domain: FeasibleSet,
    samples: int = 200,
    seed: int = 0,
    power_points: int = 24,
    power_steps: int = 6,
) -> float:
    """Sampled Lipschitz bound: 1.5x the largest difference quotient.

    Returns ``1.5 * max ||G(u)-G(v)|| / ||u-v||`` over a sampled pair set;
    deterministic given the seed.  Random far pairs alone miss stiff
    low-rank directions by a dimension-dependent factor, so each base
    point also contributes close pairs (scale 1e-4) along a random
    direction, along the mapping value itself, and along the far-pair
    difference of mapping values; at ``power_points`` of the base points a
    short forward-difference power iteration hunts the locally steepest
    direction before the close pair is taken.
    """
    if samples < 2:
        raise UsageError("need at least 2 sample pairs")
    lo, hi = domain.bounds()
    if domain.is_finite_box() and np.all(lo == hi):
        raise EstimationError("degenerate (single-point) sampling domain")
    rng = PortableRng(seed, "lipschitz")
    n = domain.n
    if domain.is_finite_box():
        points = rng.uniform_box(lo, hi, 2 * samples)
    else:
        raw = rng.normal(2 * samples * n).reshape(2 * samples, n)
        scales = np.where(np.arange(2 * samples) % 2 == 0, 1.0, 10.0)[:, None]
        points = np.stack([domain.project(row) for row in raw * scales])

    best = 0.0
    usable = 0

    def ratio_of(a, g_a, b):
        nonlocal best, usable
        dist = float(np.linalg.norm(a - b))
        if dist < 1e-12:
            return
        usable += 1
        best = max(best, float(np.linalg.norm(g_a - mapping(b))) / dist)

    def unit(vec):
        nrm = float(np.linalg.norm(vec))
        return vec / nrm if nrm > 0 else None

    for i in range(samples):
        u, w = points[2 * i], points[2 * i + 1]
        g_u = mapping(u)
        ratio_of(u, g_u, w)
        for direction in (rng.normal(n), g_u, g_u - mapping(w)):
            d_hat = unit(direction)
            if d_hat is not None:
                ratio_of(u, g_u, domain.project(u + 1e-4 * d_hat))
    for j in range(min(power_points, samples)):
        u = points[2 * j]
        g_u = mapping(u)
        d_hat = unit(rng.normal(n))
        for _ in range(power_steps):
            if d_hat is None:
                break
            probe = domain.project(u + 1e-4 * d_hat)
            diff = mapping(probe) - g_u
            step = float(np.linalg.norm(probe - u))
            if step < 1e-12:
                d_hat = None
                break
            d_hat = unit(diff)
        if d_hat is not None:
            ratio_of(u, g_u, domain.project(u + 1e-4 * d_hat))
    if usable == 0:
        raise EstimationError("no usable sample pairs")
    return 1.5 * best


def _stack_norm(dv: np.ndarray, du: np.ndarray, dp: np.ndarray) -> float:
    return float(np.sqrt(dv @ dv + du @ du + dp @ dp))


def alavi_run(
    problem: VIProblem,
    params: SolverParams = SolverParams(),
    stop: StopRule = StopRule(max_iters=10000, kkt_tol=1e-8),
    u0=None,
    p0=None,
    ref: Optional[ReferencePoint] = None,
    callbacks: Sequence[Callable[[IterationRecord], None]] = (),
    snapshot_stride: int = 10,
    ergodic_stride: Optional[int] = None,
    strategy: str = AUTO,
    dynamic_inner_tol: bool = True,
) -> RunTrace:
    """Run the solver until a stop rule fires, recording a full trace.

    Parameters
    ----------
    problem : the instance; its attached reference point (if any) feeds the
        potential column unless ``ref`` overrides it.
    params : possibly-"auto" parameters, resolved internally.
    stop : iteration budget plus residual/step tolerances.
    u0, p0 : start point (projected onto the feasible set; defaults to the
        projection of the all-ones vector) and start multiplier (default 0).
    callbacks : called synchronously with each IterationRecord; they must
        not mutate solver state.
    snapshot_stride : record full state every this many iterations
        (<=0 keeps only the final state); the final iterate is always kept.
    ergodic_stride : record running iterate means at this stride (<=0 off).

    Returns
    -------
    RunTrace with dense scalar series. Rows are indexed so that every pair
    of consecutive rows satisfies the certified descent inequality; the
    extrapolation/multiplier recurrences are warmed up internally, so no
    leading rows need to be discarded by the certificates.

    Raises
    ------
    DivergenceError when non-finite values appear (the error carries the
    last finite state and the partial trace).
    """
    resolved, consts = resolve_params(problem, params)
    eta, gamma, alpha = float(resolved.eta), float(resolved.gamma), float(resolved.alpha)
    if ref is None:
        ref = problem.reference
    if ergodic_stride is None:
        ergodic_stride = snapshot_stride

    u = problem.feasible.project(as_point(u0 if u0 is not None else np.ones(problem.n), problem.n))
    p = problem.cone.dual_project(np.zeros(problem.m) if p0 is None else as_point(p0, problem.m))
    v = u.copy()
    theta_u = problem.theta(u)
    g_u = problem.G(u)
    q = problem.cone.dual_project(p + gamma * theta_u)

    cap = stop.max_iters
    iters = np.zeros(cap, dtype=int)
    step_norms = np.zeros(cap)
    dual_gaps = np.zeros(cap)
    kkts = np.zeros(cap)
    lyaps = np.full(cap, np.nan)
    walls = np.zeros(cap)

    try:
        phash = problem_hash(problem)
    except CapabilityError:
        phash = ""
    trace = RunTrace(
        params=resolved, consts=consts, ref=ref,
        initial_u=u.copy(), initial_v=v.copy(), initial_p=p.copy(),
        problem_hash=phash,
    )
    trace.max_u_norm = float(np.linalg.norm(u))
    trace.max_q_norm = float(np.linalg.norm(q))

    sum_u = np.zeros(problem.n)
    sum_q = np.zeros(problem.m)
    t_start = time.perf_counter()
    count = 0
    kkt_val = np.inf
    stop_reason = "max_iters"
    try:
        for r in range(1, cap + 1):
            inner_tol = min(1e-10, 1e-2 * kkt_val) if dynamic_inner_tol and np.isfinite(kkt_val) else 1e-10
            try:
                u_new = solve_primal_subproblem(
                    problem, g_u, q, v, alpha, strategy=strategy, inner_tol=inner_tol
                )
            except ConvergenceError as err:
                raise ConvergenceError(f"subproblem failed at iteration {r}", err.residual) from err
            theta_new = problem.theta(u_new)
            if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(theta_new))):
                raise DivergenceError(f"non-finite iterate at iteration {r}", r - 1, u, p)
            p_new = problem.cone.dual_project(p + gamma * theta_new)
            v_new = (1.0 - eta) * u_new + eta * v
            g_new = problem.G(u_new)
            if not np.all(np.isfinite(g_new)):
                raise DivergenceError(f"non-finite mapping value at iteration {r}", r - 1, u, p)
            q_new = problem.cone.dual_project(p_new + gamma * theta_new)

            breakdown = kkt_components(u_new, p_new, problem)
            kkt_val = breakdown.total
            trace.kkt_exact = breakdown.exact
            step_norm = _stack_norm(v_new - v, u_new - u, p_new - p)
            dual_gap = float(np.linalg.norm(p_new - q_new))
            lyap = (
                lyapunov_value(v_new, u, u_new, p, ref, consts) if ref is not None else np.nan
            )
            wall = (time.perf_counter() - t_start) * 1e3

            i = r - 1
            iters[i] = r
            step_norms[i] = step_norm
            dual_gaps[i] = dual_gap
            kkts[i] = kkt_val
            lyaps[i] = lyap
            walls[i] = wall
            count = r

            sum_u += u_new
            sum_q += q_new
            trace.max_u_norm = max(trace.max_u_norm, float(np.linalg.norm(u_new)))
            trace.max_q_norm = max(trace.max_q_norm, float(np.linalg.norm(q_new)))

            take_snapshot = snapshot_stride > 0 and r % snapshot_stride == 0
            take_ergodic = ergodic_stride > 0 and r % ergodic_stride == 0
            if take_snapshot:
                _append_snapshot(trace, r, u_new, v_new, p_new, q_new)
            if take_ergodic:
                trace.ergodic_iters.append(r)
                trace.ergodic_u.append(sum_u / r)
                trace.ergodic_q.append(sum_q / r)

            if callbacks:
                record = IterationRecord(
                    k=r, u=_readonly(u_new), v=_readonly(v_new), p=_readonly(p_new),
                    q=_readonly(q_new), step_norm=step_norm, dual_gap_norm=dual_gap,
                    kkt_residual=kkt_val, lyapunov=lyap, wall_ms=wall,
                )
                for cb in callbacks:
                    cb(record)

            u, v, p, q = u_new, v_new, p_new, q_new
            theta_u, g_u = theta_new, g_new

            if stop.kkt_tol > 0 and kkt_val <= stop.kkt_tol:
                stop_reason = "kkt_tol"
                break
            if stop.step_tol > 0 and step_norm <= stop.step_tol:
                stop_reason = "step_tol"
                break
    except DivergenceError as err:
        _finalize(trace, iters, step_norms, dual_gaps, kkts, lyaps, walls, count, u, p, t_start, "diverged")
        err.trace = trace
        raise

    if count > 0 and (not trace.snap_iters or trace.snap_iters[-1] != count):
        _append_snapshot(trace, count, u, v, p, q)
    if count > 0 and ergodic_stride > 0 and (not trace.ergodic_iters or trace.ergodic_iters[-1] != count):
        trace.ergodic_iters.append(count)
        trace.ergodic_u.append(sum_u / count)
        trace.ergodic_q.append(sum_q / count)
    _finalize(trace, iters, step_norms, dual_gaps, kkts, lyaps, walls, count, u, p, t_start, stop_reason)
    return trace


def _append_snapshot(trace, r, u, v, p, q):
    trace.snap_iters.append(r)
    trace.snaps_u.append(u.copy())
    trace.snaps_v.append(v.copy())
    trace.snaps_p.append(p.copy())
    trace.snaps_q.append(q.copy())


def _readonly(arr: np.ndarray) -> np.ndarray:
    view = arr.view()
    view.setflags(write=False)
    return view


def _finalize(trace, iters, step_norms, dual_gaps, kkts, lyaps, walls, count, u, p, t_start, reason):
    trace.iters = iters[:count].copy()
    trace.step_norm = step_norms[:count].copy()
    trace.dual_gap_norm = dual_gaps[:count].copy()
    trace.kkt_residual = kkts[:count].copy()
    trace.lyapunov = lyaps[:count].copy()
    trace.wall_ms = walls[:count].copy()
    trace.final_u = u.copy()
    trace.final_p = p.copy()
    trace.stop_reason = reason
    trace.total_wall_ms = (time.perf_counter() - t_start) * 1e3
