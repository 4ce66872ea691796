import numpy as np
import pytest

import alavi
from alavi.core import ConeSpec, ConstraintMap, FeasibleSet, MappingSpec, ProxFunction
from alavi.errors import DivergenceError, EstimationError, ParameterError
from alavi.params import ETA_FLOOR, derive_constants
from alavi.solver import IterateState, CLOSED_FORM, INNER_ITERATIVE
from oracles import convex_scalar_argmin


def _toy_problem(n=1, g=None, j=None, theta_A=None, theta_b=None, lo=None, hi=None,
                 lipschitz=1.0, tau=None, cone_kind=ConeSpec.ORTHANT):
    g = g or (lambda u: u)
    theta_A = np.ones((1, n)) if theta_A is None else np.atleast_2d(theta_A)
    theta_b = np.zeros(theta_A.shape[0]) if theta_b is None else np.asarray(theta_b, float)
    feasible = FeasibleSet.whole_space(n) if lo is None else FeasibleSet.box(lo, hi)
    return alavi.VIProblem(
        n=n, m=theta_A.shape[0],
        G=MappingSpec(eval=g, n=n, lipschitz=lipschitz),
        J=j or ProxFunction.zero(n),
        theta=ConstraintMap.affine(theta_A, theta_b, tau=tau),
        cone=ConeSpec(cone_kind, theta_A.shape[0]),
        feasible=feasible,
    )


# ---------------------------------------------------------------------------
# parameter resolution


def test_resolve_auto_matches_hand_arithmetic():
    problem = _toy_problem(tau=1.0)
    params, consts = alavi.resolve_params(problem)
    assert params.eta == pytest.approx(0.6180339887498949, rel=1e-14)
    assert params.gamma == pytest.approx(0.9)
    assert params.alpha == pytest.approx(0.2789713773706715, rel=1e-12)
    assert params.alpha == pytest.approx(0.27900, abs=5e-5)
    assert consts.rho == pytest.approx(1.0 / 18.0, rel=1e-12)


def test_resolve_rejects_small_eta():
    with pytest.raises(ParameterError, match="eta"):
        alavi.resolve_params(_toy_problem(tau=1.0), alavi.SolverParams(eta=0.5))


def test_resolve_rejects_gamma_at_bound():
    with pytest.raises(ParameterError, match="gamma"):
        alavi.resolve_params(_toy_problem(tau=1.0), alavi.SolverParams(gamma=1.0))


def test_resolve_alpha_cap_inclusive():
    problem = _toy_problem(tau=1.0)
    cap = 1.0 / (2.0 * (0.9 + 1.0 + 1.0) * ETA_FLOOR)
    params, _ = alavi.resolve_params(problem, alavi.SolverParams(gamma=0.9, alpha=cap))
    assert params.alpha == cap
    with pytest.raises(ParameterError, match="alpha"):
        alavi.resolve_params(problem, alavi.SolverParams(gamma=0.9, alpha=cap * (1 + 1e-9)))


def test_resolve_idempotent_and_deterministic():
    problem = _toy_problem(tau=1.0)
    p1, c1 = alavi.resolve_params(problem)
    p2, c2 = alavi.resolve_params(problem, p1)
    assert p1 == p2
    assert c1 == c2


def test_derived_constants_formulas():
    eta, gamma, alpha, lip, tau = 0.7, 0.3, 0.05, 2.0, 1.5
    c = derive_constants(eta, gamma, alpha, lip, tau)
    assert c.beta1 == pytest.approx(1 / (2 * alpha * (1 - eta)))
    assert c.beta2 == pytest.approx((gamma * tau**2 + lip + tau) / 2)
    assert c.beta3 == pytest.approx(1 / (2 * gamma))
    assert c.rho == pytest.approx(min(eta / (2 * alpha * (1 - eta) ** 2), tau / 2,
                                      (1 - tau * gamma) / (2 * gamma), 1 / gamma))
    assert c.sigma**2 == pytest.approx(max(c.c1, c.c2 / (1 - eta) ** 2, c.c3))
    assert c.c1 == pytest.approx(3 * (lip + gamma * tau**2) ** 2)
    assert c.rho > 0


# ---------------------------------------------------------------------------
# single steps


def test_step_stationary_fixed_point():
    problem = _toy_problem(n=2, g=lambda u: np.zeros(2), theta_A=np.zeros((1, 2)),
                           lipschitz=0.0, cone_kind=ConeSpec.ZERO)
    params, _ = alavi.resolve_params(problem)
    state = IterateState.initial(problem, np.array([0.3, -0.7]))
    new = alavi.alavi_step(state, problem, params)
    assert np.array_equal(new.u, state.u)
    assert np.array_equal(new.v, state.v)
    assert np.array_equal(new.p, state.p)


def test_step_one_dimensional_hand_oracle():
    problem = _toy_problem(n=1, g=lambda u: u.copy(), tau=1.0)
    eta, gamma = 0.618, 0.5
    alpha = 1.0 / (2.0 * (gamma + 1.0 + 1.0) * eta)
    params = alavi.SolverParams(eta=eta, gamma=gamma, alpha=alpha)
    state = IterateState.initial(problem, np.array([1.0]), np.array([0.0]))
    new = alavi.alavi_step(state, problem, params)
    # by hand: v' = 1, q = max(0, 0 + 0.5*1) = 0.5, u+ = v' - a*(G(u) + q),
    # p+ = max(0, 0.5 * u+)
    assert new.v[0] == pytest.approx(1.0)
    assert new.q[0] == pytest.approx(0.5)
    u_plus = 1.0 - alpha * 1.5
    assert new.u[0] == pytest.approx(u_plus, rel=1e-15)
    assert new.p[0] == pytest.approx(max(0.0, 0.5 * u_plus), rel=1e-15)


def test_step_matches_explicit_budget_scheme(ncvi1_small):
    problem = ncvi1_small
    n = problem.n
    params, _ = alavi.resolve_params(problem)
    eta, gamma, alpha = params.eta, params.gamma, params.alpha
    gen = np.random.default_rng(17)
    for _ in range(10):
        u = gen.uniform(size=n)
        v = gen.uniform(size=n)
        p = np.array([abs(gen.normal())])
        state = IterateState(k=0, u=u, v=v, p=p, q=None,
                             theta_u=problem.theta(u), g_u=problem.G(u))
        new = alavi.alavi_step(state, problem, params)
        # explicit scheme: scalar multiplier against the all-ones row
        v_hand = (1 - eta) * u + eta * v
        q_hand = max(0.0, p[0] + gamma * (u.sum() - n / 2.0))
        u_hand = np.clip(v_hand - alpha * (problem.G(u) + q_hand), 0.0, 1.0)
        p_hand = max(0.0, p[0] + gamma * (u_hand.sum() - n / 2.0))
        assert np.allclose(new.v, v_hand, atol=1e-12)
        assert new.q[0] == pytest.approx(q_hand, abs=1e-12)
        assert np.allclose(new.u, u_hand, atol=1e-12)
        assert new.p[0] == pytest.approx(p_hand, abs=1e-12)


# ---------------------------------------------------------------------------
# primal subproblem


def test_subproblem_box_shift():
    problem = _toy_problem(n=4, lo=np.zeros(4), hi=np.ones(4))
    out = alavi.solve_primal_subproblem(
        problem, g_at_uk=2.0 * np.ones(4) - problem.theta.A.T @ np.zeros(1),
        q=np.zeros(1), v=0.5 * np.ones(4), alpha=0.1,
    )
    assert np.allclose(out, 0.3 * np.ones(4), atol=1e-15)


def test_subproblem_l1_pulls_into_kink():
    j = ProxFunction.weighted_l1(np.ones(1), 1.0)
    problem = _toy_problem(n=1, j=j, lo=np.array([-10.0]), hi=np.array([10.0]))
    out = alavi.solve_primal_subproblem(
        problem, g_at_uk=np.zeros(1), q=np.zeros(1), v=np.array([1.05]), alpha=0.1,
    )
    assert out[0] == pytest.approx(1.0, abs=1e-15)
    oracle = convex_scalar_argmin(lambda x: np.sign(x - 1.0) + (x - 1.05) / 0.1, -10, 10)
    assert out[0] == pytest.approx(oracle, abs=1e-10)


def test_subproblem_keeps_optimal_point():
    problem = _toy_problem(n=3, theta_A=np.zeros((1, 3)))
    v = np.array([0.2, -0.4, 1.0])
    out = alavi.solve_primal_subproblem(problem, np.zeros(3), np.zeros(1), v, alpha=0.5)
    assert np.array_equal(out, v)


def test_subproblem_variational_characterization(ncvi2_small):
    problem = ncvi2_small
    gen = np.random.default_rng(4)
    g0 = gen.normal(size=problem.n)
    q = np.abs(gen.normal(size=problem.m))
    v = gen.uniform(-2, 2, size=problem.n)
    alpha = 0.05
    u_new = alavi.solve_primal_subproblem(problem, g0, q, v, alpha)
    theta_new = problem.theta(u_new)
    j_new = problem.J.value(u_new)
    for _ in range(100):
        u = gen.uniform(-10, 10, size=problem.n)
        slack = (
            g0 @ (u - u_new)
            + problem.J.value(u) - j_new
            + q @ (problem.theta(u) - theta_new)
            + (u_new - v) @ (u - u_new) / alpha
        )
        assert slack >= -1e-9


def test_subproblem_decomposes_blockwise():
    # block-diagonal constraint, separable regularizer, product box
    A = np.zeros((2, 4))
    A[0, :2] = [1.0, -1.0]
    A[1, 2:] = [2.0, 0.5]
    j = ProxFunction.weighted_l1(np.zeros(4), 0.7)
    problem = _toy_problem(n=4, j=j, theta_A=A, theta_b=np.array([0.3, -0.2]),
                           lo=-np.ones(4), hi=np.ones(4))
    gen = np.random.default_rng(8)
    g0 = gen.normal(size=4)
    q = np.abs(gen.normal(size=2))
    v = gen.uniform(-1, 1, size=4)
    joint = alavi.solve_primal_subproblem(problem, g0, q, v, alpha=0.2)
    for block, rows in (((0, 2), 0), ((2, 4), 1)):
        s = slice(*block)
        sub = _toy_problem(n=2, j=ProxFunction.weighted_l1(np.zeros(2), 0.7),
                           theta_A=A[[rows], s], theta_b=problem.theta.b[[rows]],
                           lo=-np.ones(2), hi=np.ones(2))
        part = alavi.solve_primal_subproblem(sub, g0[s], q[[rows]], v[s], alpha=0.2)
        assert np.max(np.abs(part - joint[s])) <= 1e-12


def test_inner_iterative_agrees_with_closed_form():
    j = ProxFunction.weighted_l1(np.zeros(3), 1.2)
    problem = _toy_problem(n=3, j=j, theta_A=np.array([[1.0, 0.5, -0.3]]),
                           lo=-2 * np.ones(3), hi=2 * np.ones(3))
    gen = np.random.default_rng(12)
    g0, v = gen.normal(size=3), gen.normal(size=3)
    q = np.array([0.8])
    closed = alavi.solve_primal_subproblem(problem, g0, q, v, 0.3, strategy=CLOSED_FORM)
    inner = alavi.solve_primal_subproblem(problem, g0, q, v, 0.3, strategy=INNER_ITERATIVE,
                                          inner_tol=1e-12)
    assert np.allclose(closed, inner, atol=1e-8)


def test_inner_iterative_general_constraint_against_oracle():
    # theta(u) = u^2 with its jacobian; scalar problem solved by sign bisection
    theta = ConstraintMap.general(lambda u: np.array([u[0] ** 2]),
                                  lambda u: np.array([[2.0 * u[0]]]), 1, 1, tau=4.0)
    problem = alavi.VIProblem(
        n=1, m=1, G=MappingSpec(eval=lambda u: u, n=1, lipschitz=1.0),
        J=ProxFunction.zero(1), theta=theta, cone=ConeSpec(ConeSpec.ORTHANT, 1),
        feasible=FeasibleSet.box([-2.0], [2.0]),
    )
    g0, q, v, alpha = np.array([0.4]), np.array([0.6]), np.array([0.9]), 0.2
    out = alavi.solve_primal_subproblem(problem, g0, q, v, alpha,
                                        strategy=INNER_ITERATIVE, inner_tol=1e-12)
    oracle = convex_scalar_argmin(lambda x: 0.4 + 0.6 * 2 * x + (x - 0.9) / alpha, -2, 2)
    assert out[0] == pytest.approx(oracle, abs=1e-8)


# ---------------------------------------------------------------------------
# linearized variant


def test_linearized_matches_plain_step_for_affine(ncvi2_small):
    problem = ncvi2_small
    params, _ = alavi.resolve_params(problem)
    state = IterateState.initial(problem, np.ones(problem.n))
    a = alavi.alavi_step(state, problem, params)
    b = alavi.alavi_step_linearized(state, problem, params)
    assert np.array_equal(a.u, b.u)
    assert np.array_equal(a.p, b.p)


def test_linearized_uses_jacobian_at_iterate():
    theta = ConstraintMap.general(lambda u: np.array([u[0] ** 2]),
                                  lambda u: np.array([[2.0 * u[0]]]), 1, 1, tau=4.0)
    problem = alavi.VIProblem(
        n=1, m=1, G=MappingSpec(eval=lambda u: u, n=1, lipschitz=1.0),
        J=ProxFunction.zero(1), theta=theta, cone=ConeSpec(ConeSpec.ORTHANT, 1),
        feasible=FeasibleSet.whole_space(1),
    )
    eta, gamma = 0.62, 0.2
    alpha = 0.05
    params = alavi.SolverParams(eta=eta, gamma=gamma, alpha=alpha)
    state = IterateState.initial(problem, np.array([1.0]), np.array([0.5]))
    new = alavi.alavi_step_linearized(state, problem, params)
    # subproblem linear coefficient: G(u) + jacobian^T q with jacobian = 2u = 2
    q = max(0.0, 0.5 + gamma * 1.0)
    expected = 1.0 - alpha * (1.0 + 2.0 * q)
    assert new.u[0] == pytest.approx(expected, rel=1e-14)


def test_linearized_zero_jacobian_drops_constraint_term():
    theta = ConstraintMap.general(lambda u: np.array([u[0] ** 2]),
                                  lambda u: np.array([[0.0]]), 1, 1, tau=4.0)
    problem = alavi.VIProblem(
        n=1, m=1, G=MappingSpec(eval=lambda u: np.zeros(1), n=1, lipschitz=0.0),
        J=ProxFunction.zero(1), theta=theta, cone=ConeSpec(ConeSpec.ORTHANT, 1),
        feasible=FeasibleSet.whole_space(1),
    )
    params = alavi.SolverParams(eta=0.7, gamma=0.1, alpha=0.3)
    state = IterateState.initial(problem, np.array([0.4]), np.array([1.0]))
    new = alavi.alavi_step_linearized(state, problem, params)
    assert new.u[0] == pytest.approx(0.4)  # pure proximal pull toward v = u


# ---------------------------------------------------------------------------
# Lipschitz estimation


def test_estimate_lipschitz_linear_map():
    mapping = MappingSpec(eval=lambda u: 3.0 * u, n=4)
    est = alavi.estimate_lipschitz(mapping, FeasibleSet.box(np.zeros(4), np.ones(4)), seed=1)
    assert 3.0 <= est <= 4.5 + 1e-9


def test_estimate_lipschitz_constant_map():
    mapping = MappingSpec(eval=lambda u: np.ones(3), n=3)
    est = alavi.estimate_lipschitz(mapping, FeasibleSet.box(np.zeros(3), np.ones(3)), seed=2)
    assert est == 0.0


def test_estimate_lipschitz_degenerate_domain():
    mapping = MappingSpec(eval=lambda u: u, n=2)
    with pytest.raises(EstimationError):
        alavi.estimate_lipschitz(mapping, FeasibleSet.box(np.ones(2), np.ones(2)))


def test_estimate_lipschitz_deterministic_and_dominates_denser_sampling(ncvi1_small):
    domain = ncvi1_small.feasible
    est = alavi.estimate_lipschitz(ncvi1_small.G, domain, samples=200, seed=7)
    est_again = alavi.estimate_lipschitz(ncvi1_small.G, domain, samples=200, seed=7)
    assert est == est_again
    denser = alavi.estimate_lipschitz(ncvi1_small.G, domain, samples=2000, seed=7)
    assert est >= denser / 1.5  # safety factor covers the denser raw maximum


# ---------------------------------------------------------------------------
# full runs


def test_run_stationary_start_stops_immediately(affine_small):
    ref = affine_small.reference
    trace = alavi.alavi_run(
        affine_small, stop=alavi.StopRule(max_iters=100, kkt_tol=1e-10),
        u0=ref.u, p0=ref.p, snapshot_stride=1,
    )
    assert len(trace) == 1
    assert trace.kkt_residual[0] <= 1e-10
    assert trace.stop_reason == "kkt_tol"


def test_run_zero_budget_gives_empty_trace(affine_small):
    trace = alavi.alavi_run(affine_small, stop=alavi.StopRule(max_iters=0))
    assert len(trace) == 0


def test_run_duals_stay_in_cone_exactly(ncvi1_small_trace, ncvi1_small):
    for p in ncvi1_small_trace.snaps_p:
        assert np.array_equal(ncvi1_small.cone.dual_project(p), p)
    for q in ncvi1_small_trace.snaps_q:
        assert np.array_equal(ncvi1_small.cone.dual_project(q), q)


def test_run_converges_with_descending_potential(ncvi1_small_trace):
    assert ncvi1_small_trace.stop_reason == "kkt_tol"
    lam = ncvi1_small_trace.lyapunov
    assert np.all(lam[1:] <= lam[:-1] * (1 + 1e-9) + 1e-12)


def test_run_matches_repeated_steps(ncvi2_small):
    problem = ncvi2_small
    params, _ = alavi.resolve_params(problem)
    trace = alavi.alavi_run(problem, params, alavi.StopRule(max_iters=10),
                            snapshot_stride=1)
    state = IterateState.initial(problem, np.ones(problem.n))
    for k in range(10):
        state = alavi.alavi_step(state, problem, params)
        assert np.array_equal(state.u, trace.snaps_u[k])
        assert np.array_equal(state.p, trace.snaps_p[k])


@pytest.mark.filterwarnings("ignore:overflow")
def test_run_divergence_reports_last_finite_state():
    problem = _toy_problem(
        n=1, g=lambda u: u**3, theta_A=np.zeros((1, 1)), lipschitz=1e-6,
    )
    with pytest.raises(DivergenceError) as err:
        alavi.alavi_run(problem, stop=alavi.StopRule(max_iters=10000),
                        u0=np.array([10.0]), snapshot_stride=0)
    assert np.all(np.isfinite(err.value.u))
    assert err.value.trace is not None


def test_run_callbacks_are_readonly(ncvi1_small):
    seen = []

    def cb(record):
        seen.append(record.k)
        with pytest.raises(ValueError):
            record.u[0] = 99.0

    alavi.alavi_run(ncvi1_small, stop=alavi.StopRule(max_iters=3), callbacks=[cb])
    assert seen == [1, 2, 3]


def test_run_acceptance_scale_small():
    from alavi.certify import check_monotone_potential

    problem = alavi.gen_ncvi1(100, seed=1)
    trace = alavi.alavi_run(problem, stop=alavi.StopRule(max_iters=200000, kkt_tol=1e-6),
                            snapshot_stride=0, ergodic_stride=0)
    assert trace.stop_reason == "kkt_tol"
    assert len(trace) < 200000
    assert check_monotone_potential(trace).holds
