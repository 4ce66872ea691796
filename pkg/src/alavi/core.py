"""Problem substrate: mappings, regularizers, constraint maps, cones, boxes.

A problem instance couples a (possibly non-monotone) mapping ``G`` with a
convex nonsmooth regularizer ``J``, a cone-valued constraint ``theta`` and
a simple feasible set.  Everything here is immutable after construction
and purely functional, so problems can be shared across concurrent runs.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import CapabilityError, ParameterError, UsageError

DUAL_FEAS_TOL = 1e-10  # absolute; problem data is O(1)-O(n) in all built-in families


def as_point(x, n: int | None = None) -> np.ndarray:
    """Coerce to a float64 1-D array, optionally checking the dimension."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise UsageError(f"expected a 1-D point, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise UsageError(f"dimension mismatch: expected {n}, got {arr.shape[0]}")
    return arr


# ---------------------------------------------------------------------------
# projections


def project_box(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Componentwise clamp of ``x`` to ``[lo, hi]``."""
    x = np.asarray(x, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), x.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), x.shape)
    if x.shape != lo.shape or x.shape != hi.shape:
        raise UsageError("project_box: shape mismatch")
    if np.any(lo > hi):
        raise UsageError("project_box: lo > hi on some coordinate")
    return np.minimum(np.maximum(x, lo), hi)


@dataclass(frozen=True)
class ConeSpec:
    """A closed convex cone, represented through projection onto its dual.

    Supported kinds: ``nonneg-orthant`` (self-dual, projection is a clamp at
    zero) and ``zero-cone`` (dual is the whole space, projection is the
    identity).
    """

    kind: str
    m: int

    ORTHANT = "nonneg-orthant"
    ZERO = "zero-cone"

    def __post_init__(self):
        if self.kind not in (self.ORTHANT, self.ZERO):
            raise CapabilityError(f"unsupported cone kind {self.kind!r}")
        if self.m < 0:
            raise UsageError("cone dimension must be nonnegative")

    def dual_project(self, y: np.ndarray) -> np.ndarray:
        y = as_point(y, self.m)
        if self.kind == self.ORTHANT:
            return np.maximum(y, 0.0)
        return y.copy()

    def in_dual(self, p: np.ndarray, tol: float = DUAL_FEAS_TOL) -> bool:
        p = as_point(p, self.m)
        if self.kind == self.ORTHANT:
            return bool(self.m == 0 or p.min(initial=0.0) >= -tol)
        return True

    def in_minus_cone(self, theta_val: np.ndarray, tol: float = DUAL_FEAS_TOL) -> bool:
        """Whether ``theta_val`` lies in -C (the feasible side)."""
        theta_val = as_point(theta_val, self.m)
        if self.m == 0:
            return True
        if self.kind == self.ORTHANT:
            return bool(theta_val.max() <= tol)
        return bool(np.abs(theta_val).max() <= tol)


def project_dual_cone(cone: ConeSpec, y: np.ndarray) -> np.ndarray:
    """Projection onto the dual cone of ``cone``."""
    return cone.dual_project(y)


@dataclass(frozen=True)
class FeasibleSet:
    """A simple feasible set with a closed-form projection: a box or all of R^n."""

    kind: str
    n: int
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None

    BOX = "box"
    WHOLE = "whole-space"

    @staticmethod
    def box(lo, hi) -> "FeasibleSet":
        lo = as_point(lo)
        hi = as_point(hi, lo.shape[0])
        if np.any(lo > hi):
            raise UsageError("box feasible set needs lo <= hi")
        return FeasibleSet(FeasibleSet.BOX, lo.shape[0], lo, hi)

    @staticmethod
    def whole_space(n: int) -> "FeasibleSet":
        return FeasibleSet(FeasibleSet.WHOLE, n)

    def project(self, x: np.ndarray) -> np.ndarray:
        x = as_point(x, self.n)
        if self.kind == self.WHOLE:
            return x.copy()
        return project_box(x, self.lo, self.hi)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        x = as_point(x, self.n)
        if self.kind == self.WHOLE:
            return True
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def is_finite_box(self) -> bool:
        return (
            self.kind == self.BOX
            and bool(np.all(np.isfinite(self.lo)))
            and bool(np.all(np.isfinite(self.hi)))
        )

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == self.WHOLE:
            full = np.full(self.n, np.inf)
            return -full, full
        return self.lo, self.hi


# ---------------------------------------------------------------------------
# the mapping G and the constraint map theta


@dataclass(frozen=True)
class MappingSpec:
    """The problem mapping ``u -> G(u)`` with its Lipschitz constant.

    ``lipschitz`` may be None ("unknown"); step-size resolution then needs
    an estimate first.  ``jacobian``, when provided, is only consumed by
    diagnostics.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    n: int
    lipschitz: Optional[float] = None
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lipschitz is not None and self.lipschitz < 0:
            raise UsageError("lipschitz constant must be nonnegative")

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.eval(u)


@dataclass(frozen=True)
class ConstraintMap:
    """The constraint mapping ``u -> theta(u)`` into the cone's space.

    ``affine`` means ``theta(u) = A u - b``; the general form carries a
    Jacobian evaluator (required by the linearized primal step and by exact
    stationarity residuals).
    """

    kind: str
    n: int
    m: int
    tau: float
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    eval_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jacobian_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None

    AFFINE = "affine"
    GENERAL = "general-with-jacobian"

    @staticmethod
    def affine(A, b, tau: float | None = None, exact_norm: bool = False) -> "ConstraintMap":
        """Affine constraint map.

        ``tau`` defaults to the Frobenius norm of ``A`` (cheap valid upper
        bound on the operator 2-norm); pass ``exact_norm=True`` to use the
        2-norm itself, which tightens the admissible step sizes.
        """
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = as_point(b, A.shape[0]) if A.shape[0] > 0 else np.zeros(0)
        if tau is None:
            tau = float(np.linalg.norm(A, 2) if exact_norm else np.linalg.norm(A, "fro"))
            tau = max(tau, 1e-12)  # keep gamma = 0.9/tau well defined for zero maps
        if tau <= 0:
            raise ParameterError("tau must be positive")
        return ConstraintMap(ConstraintMap.AFFINE, A.shape[1], A.shape[0], float(tau), A=A, b=b)

    @staticmethod
    def general(eval_fn, jacobian_fn, n: int, m: int, tau: float) -> "ConstraintMap":
        if tau <= 0:
            raise ParameterError("tau must be positive")
        return ConstraintMap(
            ConstraintMap.GENERAL, n, m, float(tau), eval_fn=eval_fn, jacobian_fn=jacobian_fn
        )

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = as_point(u, self.n)
        if self.kind == self.AFFINE:
            return self.A @ u - self.b
        return as_point(self.eval_fn(u), self.m)

    def jacobian(self, u: np.ndarray) -> np.ndarray:
        """m x n Jacobian of theta at u."""
        if self.kind == self.AFFINE:
            return self.A
        if self.jacobian_fn is None:
            raise CapabilityError("general constraint map lacks a jacobian evaluator")
        return np.atleast_2d(np.asarray(self.jacobian_fn(u), dtype=float))


# ---------------------------------------------------------------------------
# the regularizer J and proximal steps


def _soft_threshold(z: np.ndarray, level: np.ndarray) -> np.ndarray:
    return np.sign(z) * np.maximum(np.abs(z) - level, 0.0)


@dataclass(frozen=True)
class ProxFunction:
    """Convex l.s.c. regularizer with a closed-form (or supplied) prox.

    Kinds: ``zero``, ``weighted-l1`` (about a center), ``linear``,
    ``box-indicator``, ``custom-separable``.
    """

    kind: str
    n: int
    center: Optional[np.ndarray] = None
    weight: Optional[np.ndarray] = None
    coeff: Optional[np.ndarray] = None
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    value_fn: Optional[Callable[[np.ndarray], float]] = None
    prox_fn: Optional[Callable[[np.ndarray, float], np.ndarray]] = None

    ZERO = "zero"
    L1 = "weighted-l1"
    LINEAR = "linear"
    BOX = "box-indicator"
    CUSTOM = "custom-separable"

    @staticmethod
    def zero(n: int) -> "ProxFunction":
        return ProxFunction(ProxFunction.ZERO, n)

    @staticmethod
    def weighted_l1(center, weight, n: int | None = None) -> "ProxFunction":
        if np.ndim(center) == 0:
            if n is None:
                raise UsageError("scalar center needs an explicit dimension")
            center = np.full(n, float(center))
        else:
            center = as_point(center)
        n = center.shape[0]
        w = np.broadcast_to(np.asarray(weight, dtype=float), (n,)).copy()
        if np.any(w < 0):
            raise UsageError("l1 weights must be nonnegative")
        return ProxFunction(ProxFunction.L1, n, center=center, weight=w)

    @staticmethod
    def linear(coeff) -> "ProxFunction":
        coeff = as_point(coeff)
        return ProxFunction(ProxFunction.LINEAR, coeff.shape[0], coeff=coeff)

    @staticmethod
    def box_indicator(lo, hi) -> "ProxFunction":
        lo = as_point(lo)
        hi = as_point(hi, lo.shape[0])
        return ProxFunction(ProxFunction.BOX, lo.shape[0], lo=lo, hi=hi)

    @staticmethod
    def custom(value_fn, prox_fn, n: int) -> "ProxFunction":
        return ProxFunction(ProxFunction.CUSTOM, n, value_fn=value_fn, prox_fn=prox_fn)

    def value(self, x: np.ndarray) -> float:
        x = as_point(x, self.n)
        if self.kind == self.ZERO:
            return 0.0
        if self.kind == self.L1:
            return float(np.sum(self.weight * np.abs(x - self.center)))
        if self.kind == self.LINEAR:
            return float(self.coeff @ x)
        if self.kind == self.BOX:
            inside = np.all(x >= self.lo - 1e-12) and np.all(x <= self.hi + 1e-12)
            return 0.0 if inside else float("inf")
        return float(self.value_fn(x))

    def is_separable(self) -> bool:
        return self.kind in (self.ZERO, self.L1, self.LINEAR, self.BOX)

    def subdiff_interval(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Componentwise subdifferential [lo_i, hi_i] for separable kinds."""
        x = as_point(x, self.n)
        if self.kind == self.ZERO:
            z = np.zeros(self.n)
            return z, z
        if self.kind == self.LINEAR:
            return self.coeff.copy(), self.coeff.copy()
        if self.kind == self.L1:
            lo = np.where(x > self.center, self.weight, -self.weight)
            hi = lo.copy()
            at_kink = x == self.center
            lo = np.where(at_kink, -self.weight, lo)
            hi = np.where(at_kink, self.weight, hi)
            return lo, hi
        if self.kind == self.BOX:
            lo = np.where(x <= self.lo, -np.inf, 0.0)
            hi = np.where(x >= self.hi, np.inf, 0.0)
            return lo, hi
        raise CapabilityError(f"no subdifferential interval for kind {self.kind!r}")


def prox_apply(f: ProxFunction, x: np.ndarray, t: float) -> np.ndarray:
    """argmin_u f(u) + ||u - x||^2 / (2t)."""
    if t <= 0:
        raise ParameterError("prox step t must be positive")
    x = as_point(x, f.n)
    if f.kind == ProxFunction.ZERO:
        return x.copy()
    if f.kind == ProxFunction.L1:
        return f.center + _soft_threshold(x - f.center, f.weight * t)
    if f.kind == ProxFunction.LINEAR:
        return x - t * f.coeff
    if f.kind == ProxFunction.BOX:
        return project_box(x, f.lo, f.hi)
    if f.kind == ProxFunction.CUSTOM:
        if f.prox_fn is None:
            raise CapabilityError("custom regularizer lacks a prox")
        return as_point(f.prox_fn(x, t), f.n)
    raise CapabilityError(f"unsupported regularizer kind {f.kind!r}")


# ---------------------------------------------------------------------------
# smoothed constraint penalty


def _check_phi_args(p: np.ndarray, gamma: float, cone: ConeSpec) -> np.ndarray:
    if gamma <= 0:
        raise ParameterError("gamma must be positive")
    p = as_point(p, cone.m)
    if not cone.in_dual(p):
        raise UsageError("multiplier p must lie in the dual cone")
    return p


def eval_phi(theta_val: np.ndarray, p: np.ndarray, gamma: float, cone: ConeSpec) -> float:
    """Smoothed penalty value: (||P(p + gamma*theta)||^2 - ||p||^2) / (2*gamma).

    ``P`` projects onto the dual cone.  Convex in ``theta_val``, concave in
    ``p``, differentiable in both (see :func:`phi_grad_theta`,
    :func:`phi_grad_p`).
    """
    p = _check_phi_args(p, gamma, cone)
    theta_val = as_point(theta_val, cone.m)
    proj = cone.dual_project(p + gamma * theta_val)
    return float(proj @ proj - p @ p) / (2.0 * gamma)


def phi_grad_theta(theta_val: np.ndarray, p: np.ndarray, gamma: float, cone: ConeSpec) -> np.ndarray:
    """Gradient of the penalty in its first argument: P(p + gamma*theta)."""
    p = _check_phi_args(p, gamma, cone)
    return cone.dual_project(p + gamma * as_point(theta_val, cone.m))


def phi_grad_p(theta_val: np.ndarray, p: np.ndarray, gamma: float, cone: ConeSpec) -> np.ndarray:
    """Gradient of the penalty in the multiplier: (P(p + gamma*theta) - p) / gamma."""
    p = _check_phi_args(p, gamma, cone)
    proj = cone.dual_project(p + gamma * as_point(theta_val, cone.m))
    return (proj - p) / gamma


# ---------------------------------------------------------------------------
# the assembled problem


@dataclass(frozen=True)
class ReferencePoint:
    """A distinguished primal-dual pair attached to a problem.

    ``role`` records the strongest property the pair is believed to satisfy:
    ``minty`` (weak primal-dual solution; enables descent certificates),
    ``kkt`` (stationary pair) or ``saddle-candidate``.
    """

    u: np.ndarray
    p: np.ndarray
    role: str = "minty"

    ROLES = ("minty", "kkt", "saddle-candidate")

    def __post_init__(self):
        object.__setattr__(self, "u", as_point(self.u))
        object.__setattr__(self, "p", as_point(self.p))
        if self.role not in self.ROLES:
            raise UsageError(f"unknown reference role {self.role!r}")


@dataclass(frozen=True)
class VIProblem:
    """A conically constrained mixed variational inequality instance.

    The feasible region is ``{u in U : theta(u) in -C}`` with ``U`` the
    simple set carried by ``feasible``.  The constraint-qualification
    hypothesis (nonempty interior intersection) is declared, not verified:
    ``cq_assumed`` records the declaration.
    """

    n: int
    m: int
    G: MappingSpec
    J: ProxFunction
    theta: ConstraintMap
    cone: ConeSpec
    feasible: FeasibleSet
    reference: Optional[ReferencePoint] = None
    cq_assumed: bool = True
    label: str = ""

    def __post_init__(self):
        if self.G.n != self.n:
            raise UsageError("mapping dimension disagrees with n")
        if self.J.n != self.n:
            raise UsageError("regularizer dimension disagrees with n")
        if self.theta.n != self.n or self.theta.m != self.m:
            raise UsageError("constraint map dimensions disagree with (n, m)")
        if self.cone.m != self.m:
            raise UsageError("cone dimension disagrees with m")
        if self.feasible.n != self.n:
            raise UsageError("feasible set dimension disagrees with n")
        if self.reference is not None:
            ref = self.reference
            if ref.u.shape[0] != self.n or ref.p.shape[0] != self.m:
                raise UsageError("reference point has wrong dimensions")
            if not self.cone.in_dual(ref.p, DUAL_FEAS_TOL):
                raise UsageError("reference multiplier is not dual-feasible")
            if not self.cone.in_minus_cone(self.theta(ref.u), DUAL_FEAS_TOL):
                raise UsageError("reference point violates the conic constraint")

    def lagrangian_linear(self, anchor_g: np.ndarray, u: np.ndarray, p: np.ndarray) -> float:
        """<g*, u> + J(u) + <p, theta(u)> for a frozen mapping value g*."""
        return float(anchor_g @ u) + self.J.value(u) + float(as_point(p, self.m) @ self.theta(u))


# ---------------------------------------------------------------------------
# problem-definition files

_MATRIX_KEYS = {"A", "B", "Q"}


def _vector_out(v) -> list:
    return [float(x) for x in np.asarray(v, dtype=float).ravel()]


def _matrix_out(mat, name: str, csv_dir: Optional[Path]) -> object:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if csv_dir is None:
        return [[float(x) for x in row] for row in mat]
    path = Path(csv_dir) / f"{name}.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in mat:
            writer.writerow([repr(float(x)) for x in row])
    return {"csv": path.name}


def _matrix_in(obj, base_dir: Optional[Path]) -> np.ndarray:
    if isinstance(obj, dict) and "csv" in obj:
        path = Path(obj["csv"])
        if not path.is_absolute():
            if base_dir is None:
                raise UsageError("matrix csv reference needs a base directory")
            path = Path(base_dir) / path
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if row:
                    rows.append([float(x) for x in row])
        return np.asarray(rows, dtype=float)
    return np.atleast_2d(np.asarray(obj, dtype=float))


def problem_to_dict(problem: VIProblem, csv_dir: Optional[Path] = None) -> dict:
    """Serializable description of a problem; matrices spill to CSV if
    ``csv_dir`` is given (referenced by file name)."""
    g = problem.G
    if g.kind == "custom":
        raise CapabilityError("custom mappings cannot be serialized")
    if problem.theta.kind != ConstraintMap.AFFINE:
        raise CapabilityError("only affine constraint maps serialize to problem files")
    g_params = {}
    for key, val in g.params.items():
        if key in _MATRIX_KEYS:
            g_params[key] = _matrix_out(val, key, csv_dir)
        else:
            g_params[key] = _vector_out(val) if np.ndim(val) else float(val)
    doc: dict = {
        "n": problem.n,
        "m": problem.m,
        "G": {"kind": g.kind, "lipschitz": g.lipschitz, "params": g_params},
        "J": _prox_to_dict(problem.J),
        "theta": {
            "kind": problem.theta.kind,
            "A": _matrix_out(problem.theta.A, "A_theta", csv_dir),
            "b": _vector_out(problem.theta.b),
            "tau": problem.theta.tau,
        },
        "cone": {"kind": problem.cone.kind},
        "feasible": _feasible_to_dict(problem.feasible),
        "cq_assumed": problem.cq_assumed,
        "label": problem.label,
    }
    if problem.reference is not None:
        doc["reference_point"] = {
            "u": _vector_out(problem.reference.u),
            "p": _vector_out(problem.reference.p),
            "role": problem.reference.role,
        }
    return doc


def _prox_to_dict(j: ProxFunction) -> dict:
    if j.kind == ProxFunction.ZERO:
        return {"kind": j.kind, "params": {}}
    if j.kind == ProxFunction.L1:
        return {"kind": j.kind, "params": {"center": _vector_out(j.center), "weight": _vector_out(j.weight)}}
    if j.kind == ProxFunction.LINEAR:
        return {"kind": j.kind, "params": {"coeff": _vector_out(j.coeff)}}
    if j.kind == ProxFunction.BOX:
        return {"kind": j.kind, "params": {"lo": _vector_out(j.lo), "hi": _vector_out(j.hi)}}
    raise CapabilityError("custom regularizers cannot be serialized")


def _feasible_to_dict(u_set: FeasibleSet) -> dict:
    if u_set.kind == FeasibleSet.WHOLE:
        return {"kind": u_set.kind}
    return {"kind": u_set.kind, "lo": _vector_out(u_set.lo), "hi": _vector_out(u_set.hi)}


def problem_from_dict(doc: dict, base_dir: Optional[Path] = None) -> VIProblem:
    """Rebuild a problem from its file representation."""
    from . import instances  # mapping kinds live with their generators

    n = int(doc["n"])
    m = int(doc["m"])
    theta_doc = doc["theta"]
    theta = ConstraintMap.affine(
        _matrix_in(theta_doc["A"], base_dir), np.asarray(theta_doc["b"], dtype=float), tau=theta_doc["tau"]
    )
    cone = ConeSpec(doc["cone"]["kind"], m)
    feas_doc = doc["feasible"]
    if feas_doc["kind"] == FeasibleSet.WHOLE:
        feasible = FeasibleSet.whole_space(n)
    else:
        feasible = FeasibleSet.box(np.asarray(feas_doc["lo"], float), np.asarray(feas_doc["hi"], float))
    j_doc = doc["J"]
    j_params = j_doc.get("params", {})
    if j_doc["kind"] == ProxFunction.ZERO:
        j = ProxFunction.zero(n)
    elif j_doc["kind"] == ProxFunction.L1:
        j = ProxFunction.weighted_l1(np.asarray(j_params["center"], float), np.asarray(j_params["weight"], float))
    elif j_doc["kind"] == ProxFunction.LINEAR:
        j = ProxFunction.linear(np.asarray(j_params["coeff"], float))
    elif j_doc["kind"] == ProxFunction.BOX:
        j = ProxFunction.box_indicator(np.asarray(j_params["lo"], float), np.asarray(j_params["hi"], float))
    else:
        raise CapabilityError(f"unknown regularizer kind {j_doc['kind']!r}")
    g_doc = doc["G"]
    g_params = {
        key: (_matrix_in(val, base_dir) if key in _MATRIX_KEYS else np.asarray(val, dtype=float))
        for key, val in g_doc.get("params", {}).items()
    }
    mapping = instances.build_mapping(g_doc["kind"], n, g_params, lipschitz=g_doc.get("lipschitz"))
    ref = None
    if "reference_point" in doc:
        rp = doc["reference_point"]
        ref = ReferencePoint(np.asarray(rp["u"], float), np.asarray(rp["p"], float), rp.get("role", "minty"))
    return VIProblem(
        n=n, m=m, G=mapping, J=j, theta=theta, cone=cone, feasible=feasible,
        reference=ref, cq_assumed=bool(doc.get("cq_assumed", True)), label=doc.get("label", ""),
    )


def save_problem(problem: VIProblem, path: Path, matrices_as_csv: bool = True) -> Path:
    """Write the problem-definition JSON (and matrix CSV sidecars) to ``path``."""
    path = Path(path)
    if path.suffix != ".json":
        path = path / "problem.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = problem_to_dict(problem, csv_dir=path.parent if matrices_as_csv else None)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def load_problem(path: Path) -> VIProblem:
    path = Path(path)
    if path.is_dir():
        path = path / "problem.json"
    if not path.is_file():
        raise UsageError(f"problem file not found: {path}")
    with open(path) as fh:
        doc = json.load(fh)
    return problem_from_dict(doc, base_dir=path.parent)


def problem_hash(problem: VIProblem) -> str:
    """Content hash used to tie traces to the instance they came from."""
    doc = problem_to_dict(problem, csv_dir=None)
    blob = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()
