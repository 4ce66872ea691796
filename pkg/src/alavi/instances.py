"""Seeded generators for the experiment families and constructed test instances.

Families
--------
``rank2-field`` (family "ncvi1"): a highly non-monotone mapping built from
a rank-2 state-dependent Gram matrix, one aggregate budget constraint on
the unit box.  The point ``0.25 * ones`` zeroes the mapping and, paired
with a zero multiplier, is a verified weak primal-dual solution.

``hadamard-field`` (family "ncvi2"): a coordinate-reversing Hadamard-power
mapping centered at the minimizer of an l1 objective over a random
polytope; that minimizer and its multiplier (computed here by running the
solver itself on the zero-mapping convex program) form the attached weak
solution.

``monotone-affine``: symmetric PSD linear mapping with a linear
regularizer and a constructed exact saddle point, for the ergodic-gap and
linear-rate certificates.

All randomness flows through the portable RNG, so instances replay
bit-for-bit from (dims, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (
    ConeSpec,
    ConstraintMap,
    FeasibleSet,
    MappingSpec,
    ProxFunction,
    ReferencePoint,
    VIProblem,
    as_point,
    problem_hash,
    save_problem,
)
from .errors import CapabilityError, GenerationError, UsageError
from .params import SolverParams, StopRule
from .rng import PortableRng, stream_seed


def _logistic(u: np.ndarray) -> np.ndarray:
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    ez = np.exp(u[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def build_mapping(kind: str, n: int, params: dict, lipschitz: Optional[float] = None) -> MappingSpec:
    """Reconstruct a named mapping from its serialized parameters."""
    if kind == "zero":
        zero = np.zeros(n)
        return MappingSpec(eval=lambda u: zero.copy(), n=n, lipschitz=lipschitz if lipschitz is not None else 0.0,
                           kind="zero", params={})
    if kind == "linear":
        q_mat = np.atleast_2d(np.asarray(params["Q"], dtype=float))
        c = as_point(params.get("c", np.zeros(n)), n)
        return MappingSpec(
            eval=lambda u: q_mat @ u + c, n=n,
            lipschitz=lipschitz if lipschitz is not None else float(np.linalg.norm(q_mat, 2)),
            jacobian=lambda u: q_mat, kind="linear", params={"Q": q_mat, "c": c},
        )
    if kind == "rank2-field":
        a_mat = np.atleast_2d(np.asarray(params["A"], dtype=float))
        b_mat = np.atleast_2d(np.asarray(params["B"], dtype=float))
        center = as_point(params.get("center", np.full(n, 0.25)), n)

        def eval_fn(u, _a=a_mat, _b=b_mat, _c=center):
            t1 = _a @ np.cos(u)
            t2 = _b @ _logistic(u)
            d = u - _c
            return t1 * (t1 @ d) + t2 * (t2 @ d)

        return MappingSpec(eval=eval_fn, n=n, lipschitz=lipschitz, kind="rank2-field",
                           params={"A": a_mat, "B": b_mat, "center": center})
    if kind == "hadamard-field":
        center = as_point(params["center"], n)

        def eval_fn(u, _c=center):
            rev = u[::-1]
            return rev * rev * (u - _c)

        return MappingSpec(eval=eval_fn, n=n, lipschitz=lipschitz, kind="hadamard-field",
                           params={"center": center})
    raise CapabilityError(f"unknown mapping kind {kind!r}")


# ---------------------------------------------------------------------------
# family 1: rank-2 field on the unit box


def gen_ncvi1(
    n: int,
    seed: int,
    a_matrix=None,
    b_matrix=None,
    lipschitz: Optional[float] = None,
    lipschitz_samples: int = 200,
) -> VIProblem:
    """Rank-2 non-monotone instance on ``[0,1]^n`` with a budget constraint.

    The two mixing matrices are standard-normal draws from per-matrix
    substreams of ``seed`` (pass ``a_matrix``/``b_matrix`` to override).
    The constraint row is all-ones, so its exact operator norm ``sqrt(n)``
    is used; the mapping's Lipschitz constant is sampled unless supplied.
    """
    if n < 2:
        raise UsageError("n must be at least 2")
    if a_matrix is None:
        a_matrix = PortableRng(seed, "ncvi1.A").normal_matrix(n, n)
    if b_matrix is None:
        b_matrix = PortableRng(seed, "ncvi1.B").normal_matrix(n, n)
    mapping = build_mapping("rank2-field", n, {"A": a_matrix, "B": b_matrix}, lipschitz=lipschitz)
    feasible = FeasibleSet.box(np.zeros(n), np.ones(n))
    if mapping.lipschitz is None:
        from .solver import estimate_lipschitz

        lip = estimate_lipschitz(mapping, feasible, samples=lipschitz_samples, seed=stream_seed(seed, "ncvi1.L"))
        mapping = MappingSpec(eval=mapping.eval, n=n, lipschitz=lip, kind=mapping.kind, params=mapping.params)
    theta = ConstraintMap.affine(np.ones((1, n)), np.array([n / 2.0]), tau=float(np.sqrt(n)))
    ref = ReferencePoint(np.full(n, 0.25), np.zeros(1), role="minty")
    return VIProblem(
        n=n, m=1, G=mapping, J=ProxFunction.zero(n), theta=theta,
        cone=ConeSpec(ConeSpec.ORTHANT, 1), feasible=feasible, reference=ref,
        label=f"ncvi1-n{n}-s{seed}",
    )


# ---------------------------------------------------------------------------
# family 2: Hadamard field over a random polytope


def compute_sharp_point(
    box: FeasibleSet,
    A: np.ndarray,
    b: np.ndarray,
    kkt_tol: float = 1e-9,
    max_iters: int = 1_000_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Primal and dual solutions of ``min ||u - 1||_1`` over ``box  ∩ {Au <= b}``.

    Solved by the solver itself with a zero mapping (a monotone instance,
    so convergence is certified); returns the primal limit and the
    multiplier limit.  The constraint map uses the exact operator norm so
    the dual step is as large as the admissible range allows.
    """
    from .solver import alavi_run

    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    problem = VIProblem(
        n=n, m=m,
        G=build_mapping("zero", n, {}),
        J=ProxFunction.weighted_l1(np.ones(n), 1.0),
        theta=ConstraintMap.affine(A, as_point(b, m), exact_norm=True),
        cone=ConeSpec(ConeSpec.ORTHANT, m),
        feasible=box,
        label="sharp-point-program",
    )
    start = np.full(n, 0.5)
    trace = alavi_run(
        problem,
        SolverParams(),
        StopRule(max_iters=max_iters, kkt_tol=kkt_tol),
        u0=start,
        snapshot_stride=0,
        ergodic_stride=0,
    )
    if trace.stop_reason != "kkt_tol":
        raise GenerationError(
            f"embedded convex solve stopped by {trace.stop_reason} at residual {trace.kkt_residual[-1]:.3e}"
        )
    return trace.final_u, trace.final_p


def gen_ncvi2(
    n: int,
    seed: int,
    m: Optional[int] = None,
    lipschitz: Optional[float] = None,
    lipschitz_samples: int = 200,
    sharp_kkt_tol: float = 1e-10,
) -> VIProblem:
    """Hadamard-power non-monotone instance over a random polytope.

    ``m`` defaults to ``n/50`` (rounded, floored at 1 for desk-scale
    dims).  The polytope offset is ``A @ (ones/2)``, so the half-ones
    point is always feasible.  The mapping's center and the attached weak
    solution come from the embedded l1 program.
    """
    if n < 2:
        raise UsageError("n must be at least 2")
    if m is None:
        m = n // 50 if n % 50 == 0 else max(1, round(n / 50))
    if m < 1:
        raise UsageError("m must be at least 1")
    A = PortableRng(seed, "ncvi2.A").normal_matrix(m, n)
    b = A @ np.full(n, 0.5)
    feasible = FeasibleSet.box(np.full(n, -10.0), np.full(n, 10.0))
    u_sharp, p_sharp = compute_sharp_point(feasible, A, b, kkt_tol=sharp_kkt_tol)
    mapping = build_mapping("hadamard-field", n, {"center": u_sharp}, lipschitz=lipschitz)
    if mapping.lipschitz is None:
        from .solver import estimate_lipschitz

        lip = estimate_lipschitz(mapping, feasible, samples=lipschitz_samples, seed=stream_seed(seed, "ncvi2.L"))
        mapping = MappingSpec(eval=mapping.eval, n=n, lipschitz=lip, kind=mapping.kind, params=mapping.params)
    theta = ConstraintMap.affine(A, b, exact_norm=True)
    ref = ReferencePoint(u_sharp, p_sharp, role="minty")
    return VIProblem(
        n=n, m=m, G=mapping, J=ProxFunction.weighted_l1(np.ones(n), 1.0), theta=theta,
        cone=ConeSpec(ConeSpec.ORTHANT, m), feasible=feasible, reference=ref,
        label=f"ncvi2-n{n}-s{seed}",
    )


# ---------------------------------------------------------------------------
# constructed monotone affine family


def gen_monotone_affine(
    n: int,
    m: int,
    seed: int,
    kind: str = "psd-linear",
    n_active: Optional[int] = None,
) -> VIProblem:
    """Monotone affine instance with an exact constructed saddle point.

    ``kind``: ``psd-linear`` takes ``Q = R^T R`` (PSD, possibly singular);
    ``strongly-monotone`` adds the identity.  A solution is built by
    placing the primal point strictly inside the box, marking ``n_active``
    constraint rows active with positive multipliers, padding the rest
    with slack, and choosing the linear regularizer so stationarity holds
    exactly at the pair.
    """
    if kind not in ("psd-linear", "strongly-monotone"):
        raise UsageError(f"unknown kind {kind!r}")
    if m < 0:
        raise UsageError("m must be nonnegative")
    rng_r = PortableRng(seed, "affine.R")
    # tall factor keeps the Gram matrix well conditioned (still exactly R^T R)
    r_mat = rng_r.normal_matrix(2 * n, n) / np.sqrt(2.0 * n)
    q_mat = r_mat.T @ r_mat
    if kind == "strongly-monotone":
        q_mat = q_mat + np.eye(n)
    box = FeasibleSet.box(np.full(n, -5.0), np.full(n, 5.0))
    u_star = -1.0 + 2.0 * PortableRng(seed, "affine.u").uniform(n)

    if m > 0:
        a_mat = PortableRng(seed, "affine.A").normal_matrix(m, n)
        if n_active is None:
            n_active = max(1, m // 2)
        n_active = min(n_active, m)
        p_star = np.zeros(m)
        p_star[:n_active] = 0.5 + PortableRng(seed, "affine.p").uniform(n_active)
        slack = 0.5 + PortableRng(seed, "affine.slack").uniform(m)
        b = a_mat @ u_star
        b[n_active:] += slack[n_active:]
        theta = ConstraintMap.affine(a_mat, b)
        coeff = -(q_mat @ u_star + a_mat.T @ p_star)
    else:
        a_mat = np.zeros((0, n))
        p_star = np.zeros(0)
        theta = ConstraintMap.affine(a_mat, np.zeros(0))
        coeff = -(q_mat @ u_star)

    mapping = build_mapping("linear", n, {"Q": q_mat, "c": np.zeros(n)})
    ref = ReferencePoint(u_star, p_star, role="minty")
    return VIProblem(
        n=n, m=m, G=mapping, J=ProxFunction.linear(coeff), theta=theta,
        cone=ConeSpec(ConeSpec.ORTHANT, m), feasible=box, reference=ref,
        label=f"affine-{kind}-n{n}-m{m}-s{seed}",
    )


# ---------------------------------------------------------------------------
# manifests


@dataclass(frozen=True)
class InstanceManifest:
    family: str
    n: int
    m: int
    seed: int
    tau: float
    lipschitz: Optional[float]
    reference_u: list
    reference_p: list
    problem_hash: str

    def to_dict(self) -> dict:
        return {
            "family": self.family, "n": self.n, "m": self.m, "seed": self.seed,
            "tau": self.tau, "L_estimate": self.lipschitz,
            "reference_point": {"u": self.reference_u, "p": self.reference_p},
            "problem_hash": self.problem_hash,
        }


def write_instance(problem: VIProblem, family: str, seed: int, out_dir: Path) -> Path:
    """Write problem.json, matrix CSVs and the manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_problem(problem, out_dir / "problem.json")
    ref = problem.reference
    manifest = InstanceManifest(
        family=family, n=problem.n, m=problem.m, seed=seed,
        tau=problem.theta.tau, lipschitz=problem.G.lipschitz,
        reference_u=[float(x) for x in (ref.u if ref else [])],
        reference_p=[float(x) for x in (ref.p if ref else [])],
        problem_hash=problem_hash(problem),
    )
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def generate_family(family: str, n: int, seed: int, m: Optional[int] = None, kind: str = "psd-linear") -> VIProblem:
    """Dispatch by family name (the CLI entry point)."""
    if family == "ncvi1":
        return gen_ncvi1(n, seed)
    if family == "ncvi2":
        return gen_ncvi2(n, seed, m=m)
    if family == "monotone-affine":
        return gen_monotone_affine(n, m if m is not None else max(1, n // 4), seed, kind=kind)
    raise UsageError(f"unknown family {family!r}; choose from ncvi1, ncvi2, monotone-affine")
