"""Augmented-Lagrangian primal-dual solver for conically constrained,
possibly non-monotone mixed variational inequalities, with convergence
certificates, a generalized-monotonicity classifier and seeded experiment
generators."""

from .core import (
    ConeSpec,
    ConstraintMap,
    FeasibleSet,
    MappingSpec,
    ProxFunction,
    ReferencePoint,
    VIProblem,
    eval_phi,
    load_problem,
    phi_grad_p,
    phi_grad_theta,
    problem_hash,
    project_box,
    project_dual_cone,
    prox_apply,
    save_problem,
)
from .params import DerivedConstants, SolverParams, StopRule, resolve_params
from .solver import (
    IterateState,
    alavi_run,
    alavi_step,
    alavi_step_linearized,
    estimate_lipschitz,
    solve_primal_subproblem,
)
from .trace import IterationRecord, RunTrace
from .certify import (
    CertificateReport,
    KktBreakdown,
    RateFit,
    certify_run,
    check_descent,
    check_ergodic_gap,
    check_linear_rate,
    check_master_inequality,
    ergodic_averages,
    fit_linear_rate,
    gap_certificate,
    kkt_components,
    kkt_residual,
    lyapunov_value,
    stationarity_bound,
    summed_squares_certificate,
    weighted_distance,
)
from .instances import (
    compute_sharp_point,
    gen_monotone_affine,
    gen_ncvi1,
    gen_ncvi2,
    generate_family,
    write_instance,
)
from .monotonicity import (
    WorkedFixture,
    MonotonicityReport,
    worked_fixtures,
    classify,
    classify_fixtures,
    verify_minty,
    verify_witness,
)
from .rng import PortableRng

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
