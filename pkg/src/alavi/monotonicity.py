"""Sampling-based classification against the generalized-monotonicity ladder.

The classifier is refutation-only: each class is a universally quantified
inequality (or implication), so sampling can falsify but never prove.
Verdicts are ``refuted`` (with a re-verifiable witness pair), ``not-refuted``
(after N pairs) or ``skipped`` (star-anchored classes without a reference).

Classes, in roughly decreasing strength:

==================== =========================================================
monotone             <G(u)-G(v), u-v> >= 0
co-coercive          <G(u)-G(v), u-v> >= mu * ||G(u)-G(v)||^2
star-monotone        monotonicity tested only against a fixed solution point
pseudo               <G(a), b-a> >= 0  =>  <G(b), b-a> >= 0
j-pseudo             same with the regularizer difference added to both sides
lagrangian-pseudo    j-pseudo shifted further by <p*, theta(b)-theta(a)>
quasi                <G(a), b-a> > 0  =>  <G(b), b-a> >= 0
j-quasi              quasi with the regularizer difference
lagrangian-quasi     j-quasi with the multiplier-weighted constraint shift
==================== =========================================================

Implication classes are tested on ordered pairs whose premise clears a
strict positive margin (``tol``), which keeps boundary noise from
producing unsound refutations; caller-supplied witness pairs are instead
evaluated with the exact premise (>= 0), since they are expected to be
analytically constructed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

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
)
from .errors import UsageError
from .rng import PortableRng

CLASSES = (
    "monotone",
    "co-coercive",
    "star-monotone",
    "pseudo",
    "j-pseudo",
    "lagrangian-pseudo",
    "quasi",
    "j-quasi",
    "lagrangian-quasi",
)

_STAR_CLASSES = ("star-monotone", "lagrangian-pseudo", "lagrangian-quasi")
_IMPLICATION = {
    # class -> (uses_j, uses_lagrangian_shift, strict_premise)
    "pseudo": (False, False, False),
    "j-pseudo": (True, False, False),
    "lagrangian-pseudo": (True, True, False),
    "quasi": (False, False, True),
    "j-quasi": (True, False, True),
    "lagrangian-quasi": (True, True, True),
}


@dataclass
class ClassVerdict:
    verdict: str  # "refuted" | "not-refuted" | "skipped"
    witness_u: Optional[np.ndarray] = None
    witness_v: Optional[np.ndarray] = None
    premise: Optional[float] = None
    conclusion: Optional[float] = None
    margin: Optional[float] = None
    checked: int = 0
    reason: str = ""

    def to_json_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "witness_u": None if self.witness_u is None else [float(x) for x in self.witness_u],
            "witness_v": None if self.witness_v is None else [float(x) for x in self.witness_v],
            "premise": self.premise,
            "conclusion": self.conclusion,
            "margin": self.margin,
            "checked": self.checked,
            "reason": self.reason,
        }


@dataclass
class MonotonicityReport:
    """Per-class verdicts plus the sampling configuration that produced them."""

    entries: dict[str, ClassVerdict]
    samples: int
    seed: int
    tol: float
    mu: float
    label: str = ""

    def verdict(self, cls: str) -> str:
        return self.entries[cls].verdict

    def to_json_dict(self) -> dict:
        out = {}
        for cls, entry in self.entries.items():
            d = entry.to_json_dict()
            d["samples"] = self.samples
            d["seed"] = self.seed
            out[cls] = d
        return {"label": self.label, "mu": self.mu, "tol": self.tol, "classes": out}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=1, sort_keys=True)


@dataclass(frozen=True)
class _PairData:
    a: np.ndarray
    b: np.ndarray
    ga: np.ndarray
    gb: np.ndarray
    ga_d: float
    gb_d: float
    jdiff: float
    tshift: Optional[float]  # <p*, theta(b) - theta(a)>, None without a reference


def _pair_data(problem: VIProblem, star: Optional[ReferencePoint], a: np.ndarray, b: np.ndarray) -> _PairData:
    ga = problem.G(a)
    gb = problem.G(b)
    d = b - a
    jdiff = problem.J.value(b) - problem.J.value(a)
    tshift = None
    if star is not None and problem.m > 0:
        tshift = float(star.p @ (problem.theta(b) - problem.theta(a)))
    elif star is not None:
        tshift = 0.0
    return _PairData(a, b, ga, gb, float(ga @ d), float(gb @ d), jdiff, tshift)


def _implication_values(pair: _PairData, cls: str) -> tuple[float, float]:
    uses_j, uses_shift, _ = _IMPLICATION[cls]
    extra = 0.0
    if uses_j:
        extra += pair.jdiff
    if uses_shift:
        extra += pair.tshift
    return pair.ga_d + extra, pair.gb_d + extra


def _sampling_box(problem: VIProblem, domain) -> tuple[np.ndarray, np.ndarray]:
    if domain is not None:
        lo, hi = domain
        lo = as_point(lo, problem.n)
        hi = as_point(hi, problem.n)
    else:
        lo, hi = problem.feasible.bounds()
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise UsageError("classification needs a finite sampling box (pass domain=(lo, hi))")
    if not (problem.feasible.contains(lo) and problem.feasible.contains(hi)):
        raise UsageError("sampling box must lie inside the feasible set")
    return lo, hi


def classify(
    problem: VIProblem,
    star: Optional[ReferencePoint] = None,
    samples: int = 2000,
    seed: int = 0,
    tol: float = 1e-9,
    domain: Optional[tuple] = None,
    mu: float = 1.0,
    extra_pairs: Sequence[tuple] = (),
) -> MonotonicityReport:
    """Test the mapping against all nine classes on sampled point pairs.

    Parameters
    ----------
    star : reference pair anchoring the star-monotone and Lagrangian-shift
        classes; those are skipped when absent (problem.reference is used
        when available).
    samples : number of random pairs; a tenth of them get coordinates
        snapped to the box boundary to probe kinks and faces.
    domain : optional (lo, hi) sampling box, required when the feasible
        set is unbounded.
    mu : co-coercivity modulus tested (recorded in the report).
    extra_pairs : ordered pairs (a, b) evaluated before the random ones
        with exact premise semantics; fixture witnesses enter here.

    The same pair set feeds every class, so pairwise logical implications
    between classes hold by construction within a report.  Identical
    (problem, samples, seed, domain) yield identical reports.
    """
    if star is None:
        star = problem.reference
    lo, hi = _sampling_box(problem, domain)
    rng = PortableRng(seed, "classify")
    pts = rng.uniform_box(lo, hi, 2 * samples)
    snap_mask = rng.uniform(2 * samples) < 0.1
    snap_coord = rng.uniform(2 * samples * problem.n).reshape(2 * samples, problem.n) < 0.3
    snap_side = rng.uniform(2 * samples * problem.n).reshape(2 * samples, problem.n) < 0.5
    bounded = np.isfinite(lo) & np.isfinite(hi)
    for i in range(2 * samples):
        if snap_mask[i]:
            sel = snap_coord[i] & bounded
            pts[i, sel] = np.where(snap_side[i, sel], lo[sel], hi[sel])

    entries: dict[str, ClassVerdict] = {}
    for cls in CLASSES:
        if cls in _STAR_CLASSES and star is None:
            entries[cls] = ClassVerdict("skipped", reason="no reference point supplied")
        else:
            entries[cls] = ClassVerdict("not-refuted")

    g_star = problem.G(star.u) if star is not None else None

    def consider_inequality(cls, value, a, b, threshold=-tol):
        entry = entries[cls]
        if entry.verdict == "skipped":
            return
        entry.checked += 1
        entry.margin = value if entry.margin is None else min(entry.margin, value)
        if value < threshold and entry.verdict == "not-refuted":
            entry.verdict = "refuted"
            entry.witness_u = np.array(a, dtype=float)
            entry.witness_v = np.array(b, dtype=float)
            entry.conclusion = float(value)

    def consider_implication(cls, pair: _PairData, exact_premise: bool):
        entry = entries[cls]
        if entry.verdict == "skipped":
            return
        premise, conclusion = _implication_values(pair, cls)
        strict = _IMPLICATION[cls][2]
        if exact_premise:
            ok = premise > 0.0 if strict else premise >= 0.0
        else:
            ok = premise > tol if strict else premise >= tol
        if not ok:
            return
        entry.checked += 1
        entry.margin = conclusion if entry.margin is None else min(entry.margin, conclusion)
        if conclusion < -tol and entry.verdict == "not-refuted":
            entry.verdict = "refuted"
            entry.witness_u = pair.a.copy()
            entry.witness_v = pair.b.copy()
            entry.premise = float(premise)
            entry.conclusion = float(conclusion)

    def process_pair(a, b, exact_premise: bool):
        pair_ab = _pair_data(problem, star, a, b)
        # symmetric classes once per unordered pair
        mono = pair_ab.gb_d - pair_ab.ga_d  # <G(b)-G(a), b-a>
        consider_inequality("monotone", mono, a, b)
        dg = pair_ab.gb - pair_ab.ga
        consider_inequality("co-coercive", mono - mu * float(dg @ dg), a, b)
        if star is not None:
            for point, g_val in ((a, pair_ab.ga), (b, pair_ab.gb)):
                dstar = point - star.u
                consider_inequality("star-monotone", float((g_val - g_star) @ dstar), point, star.u)
        pair_ba = _PairData(
            b, a, pair_ab.gb, pair_ab.ga, -pair_ab.gb_d, -pair_ab.ga_d,
            -pair_ab.jdiff, None if pair_ab.tshift is None else -pair_ab.tshift,
        )
        for cls, (_, uses_shift, _strict) in _IMPLICATION.items():
            if uses_shift and star is None:
                continue
            consider_implication(cls, pair_ab, exact_premise)
            consider_implication(cls, pair_ba, exact_premise)

    for a, b in extra_pairs:
        process_pair(as_point(a, problem.n), as_point(b, problem.n), exact_premise=True)
    for i in range(samples):
        process_pair(pts[2 * i], pts[2 * i + 1], exact_premise=False)

    return MonotonicityReport(
        entries=entries, samples=samples, seed=seed, tol=tol, mu=mu, label=problem.label
    )


def verify_witness(
    problem: VIProblem,
    cls: str,
    witness_u,
    witness_v,
    star: Optional[ReferencePoint] = None,
    mu: float = 1.0,
    tol: float = 1e-9,
) -> dict:
    """Re-evaluate a refutation witness with exact formulas.

    Returns the premise/conclusion (or inequality value) and whether the
    pair genuinely violates the class definition by more than ``tol``.
    """
    star = star or problem.reference
    a = as_point(witness_u, problem.n)
    b = as_point(witness_v, problem.n)
    pair = _pair_data(problem, star, a, b)
    if cls == "monotone":
        value = pair.gb_d - pair.ga_d
        return {"value": value, "sound": value < -tol}
    if cls == "co-coercive":
        dg = pair.gb - pair.ga
        value = (pair.gb_d - pair.ga_d) - mu * float(dg @ dg)
        return {"value": value, "sound": value < -tol}
    if cls == "star-monotone":
        if star is None:
            raise UsageError("star witness needs a reference")
        value = float((pair.ga - problem.G(star.u)) @ (a - star.u))
        return {"value": value, "sound": value < -tol}
    if cls not in _IMPLICATION:
        raise UsageError(f"unknown class {cls!r}")
    premise, conclusion = _implication_values(pair, cls)
    strict = _IMPLICATION[cls][2]
    premise_ok = premise > 0 if strict else premise >= 0
    return {
        "premise": premise,
        "conclusion": conclusion,
        "value": conclusion,
        "sound": bool(premise_ok and conclusion < -tol),
    }


# ---------------------------------------------------------------------------
# weak-solution verification


@dataclass(frozen=True)
class MintyVerdict:
    refuted: bool
    side: Optional[str] = None  # "primal" | "dual"
    witness: Optional[np.ndarray] = None
    margin: float = 0.0
    samples: int = 0

    @property
    def not_refuted(self) -> bool:
        return not self.refuted


def verify_minty(
    problem: VIProblem,
    candidate: ReferencePoint,
    samples: int = 2000,
    seed: int = 0,
    tol: float = 1e-8,
    domain: Optional[tuple] = None,
) -> MintyVerdict:
    """Sample both inequalities of the weak primal-dual solution property.

    Primal side: ``<G(u), u-u0> + J(u) - J(u0) + <p0, theta(u)-theta(u0)>
    >= 0`` over feasible-set samples.  Dual side: ``<theta(u0), p-p0> <= 0``
    over dual-cone rays at several magnitudes (the inequality is
    positively homogeneous in direction, so ray coverage matters more than
    magnitude).
    """
    if not problem.cone.in_dual(candidate.p, tol=1e-9):
        raise UsageError("candidate multiplier must be dual-feasible")
    lo, hi = _sampling_box(problem, domain)
    rng = PortableRng(seed, "minty")
    theta_u0 = problem.theta(candidate.u)
    j_u0 = problem.J.value(candidate.u)
    worst = math.inf

    # dual side first: an infeasible candidate shows up here immediately
    if problem.m > 0:
        scales = (0.1, 1.0, 10.0, 100.0)
        directions = []
        eye = np.eye(problem.m)
        for i in range(problem.m):
            directions.append(eye[i])
            if problem.cone.kind == ConeSpec.ZERO:
                directions.append(-eye[i])
        extra = rng.uniform(32 * problem.m).reshape(32, problem.m)
        if problem.cone.kind == ConeSpec.ZERO:
            extra = 2.0 * extra - 1.0
        directions.extend(extra)
        for direction in directions:
            for s in scales:
                p = problem.cone.dual_project(s * np.asarray(direction, float))
                val = float(theta_u0 @ (p - candidate.p))
                worst = min(worst, -val)
                if val > tol:
                    return MintyVerdict(True, "dual", p, val, samples)

    pts = rng.uniform_box(lo, hi, samples)
    for i in range(samples):
        u = pts[i]
        val = (
            float(problem.G(u) @ (u - candidate.u))
            + problem.J.value(u)
            - j_u0
            + float(candidate.p @ (problem.theta(u) - theta_u0))
        )
        worst = min(worst, val)
        if val < -tol:
            return MintyVerdict(True, "primal", u.copy(), val, samples)
    return MintyVerdict(False, None, None, worst, samples)


# ---------------------------------------------------------------------------
# worked 1-D/2-D fixtures with analytic witnesses


@dataclass(frozen=True)
class WorkedFixture:
    name: str
    problem: VIProblem
    star: ReferencePoint
    sampling_lo: np.ndarray
    sampling_hi: np.ndarray
    witnesses: dict
    expected: dict
    notes: str = ""

    def classify(self, samples: int = 2000, seed: int = 0, tol: float = 1e-9) -> MonotonicityReport:
        pairs = [pair for pair_list in self.witnesses.values() for pair in pair_list]
        return classify(
            self.problem, star=self.star, samples=samples, seed=seed, tol=tol,
            domain=(self.sampling_lo, self.sampling_hi), extra_pairs=pairs,
        )


def worked_fixtures() -> list[WorkedFixture]:
    """Four 1-D/2-D problems with known class verdicts and exact witnesses.

    The recorded witness pairs are ordered (premise point, conclusion
    point) for the implication classes and violate their definitions
    exactly; expected verdicts cover only the classes with an analytic
    answer.
    """
    fixtures = []

    # 1. decaying reciprocal mapping, linear cost, single inequality bound
    recip = VIProblem(
        n=1, m=1,
        G=MappingSpec(eval=lambda u: 1.0 / (1.0 + u), n=1, lipschitz=1.0, kind="custom"),
        J=ProxFunction.linear([1.0]),
        theta=ConstraintMap.affine([[1.0]], [1.0], tau=1.0),
        cone=ConeSpec(ConeSpec.ORTHANT, 1),
        feasible=FeasibleSet.box([0.0], [np.inf]),
        reference=ReferencePoint([0.0], [0.0], role="minty"),
        label="fixture-reciprocal",
    )
    fixtures.append(WorkedFixture(
        name="reciprocal",
        problem=recip,
        star=recip.reference,
        sampling_lo=np.array([0.0]), sampling_hi=np.array([10.0]),
        witnesses={
            "monotone": [(np.array([0.0]), np.array([1.0]))],
            "star-monotone": [(np.array([1.0]), np.array([0.0]))],
        },
        expected={
            "monotone": "refuted",
            "star-monotone": "refuted",
            "pseudo": "not-refuted",
            "j-pseudo": "not-refuted",
            "lagrangian-pseudo": "not-refuted",
            "quasi": "not-refuted",
        },
        notes="strictly decreasing mapping: never monotone, but order-preserving premises keep all pseudo variants intact",
    ))

    # 2. damped sine mapping on [0, pi]
    sine = VIProblem(
        n=1, m=1,
        G=MappingSpec(eval=lambda u: np.sin(u) - 1.0, n=1, lipschitz=1.0, kind="custom"),
        J=ProxFunction.linear([1.0]),
        theta=ConstraintMap.affine([[1.0]], [3.0 * math.pi / 4.0], tau=1.0),
        cone=ConeSpec(ConeSpec.ORTHANT, 1),
        feasible=FeasibleSet.box([0.0], [math.pi]),
        reference=ReferencePoint([0.0], [0.0], role="minty"),
        label="fixture-damped-sine",
    )
    half_pi = math.pi / 2.0
    fixtures.append(WorkedFixture(
        name="damped-sine",
        problem=sine,
        star=sine.reference,
        sampling_lo=np.array([0.0]), sampling_hi=np.array([math.pi]),
        witnesses={
            "monotone": [(np.array([half_pi]), np.array([3.0 * math.pi / 4.0]))],
            "pseudo": [(np.array([half_pi]), np.array([5.0 * math.pi / 8.0]))],
        },
        expected={
            "monotone": "refuted",
            "star-monotone": "not-refuted",
            "pseudo": "refuted",
            "j-pseudo": "not-refuted",
            "lagrangian-pseudo": "not-refuted",
        },
        notes="star monotone at 0 yet not pseudo monotone: premise is exactly zero at the sine peak",
    ))

    # 3. squared mapping on [-1, 1]
    square = VIProblem(
        n=1, m=1,
        G=MappingSpec(eval=lambda u: u * u, n=1, lipschitz=2.0, kind="custom"),
        J=ProxFunction.zero(1),
        theta=ConstraintMap.affine([[1.0]], [0.0], tau=1.0),
        cone=ConeSpec(ConeSpec.ORTHANT, 1),
        feasible=FeasibleSet.box([-1.0], [1.0]),
        reference=ReferencePoint([-1.0], [0.0], role="minty"),
        label="fixture-square",
    )
    # The even symmetry of the mapping makes the pair (0, -1) carry the
    # same premise/conclusion values (0 and -1) as the pair printed with a
    # positive sign; (0, -1) is the orientation that violates the
    # definitional implication.
    fixtures.append(WorkedFixture(
        name="square",
        problem=square,
        star=square.reference,
        sampling_lo=np.array([-1.0]), sampling_hi=np.array([1.0]),
        witnesses={
            "monotone": [(np.array([-1.0]), np.array([0.0]))],
            "star-monotone": [(np.array([0.0]), np.array([-1.0]))],
            "pseudo": [(np.array([0.0]), np.array([-1.0]))],
            "j-pseudo": [(np.array([0.0]), np.array([-1.0]))],
            "lagrangian-pseudo": [(np.array([0.0]), np.array([-1.0]))],
        },
        expected={
            "monotone": "refuted",
            "star-monotone": "refuted",
            "pseudo": "refuted",
            "j-pseudo": "refuted",
            "lagrangian-pseudo": "refuted",
            "quasi": "not-refuted",
            "j-quasi": "not-refuted",
            "lagrangian-quasi": "not-refuted",
        },
        notes="quasi monotone but not pseudo monotone; pseudo witness needs the zero-premise boundary case",
    ))

    # 4. coupled growth in two dimensions, equality constraint
    def coupled(u):
        x, y = u[0], u[1]
        return np.array([2.0 * x * (y * y + 1.0), 2.0 * y * (x * x + 1.0)])

    growth = VIProblem(
        n=2, m=1,
        G=MappingSpec(eval=coupled, n=2, lipschitz=602.0, kind="custom"),
        J=ProxFunction.linear([1.0, 1.0]),
        theta=ConstraintMap.affine([[1.0, -1.0]], [0.0], tau=math.sqrt(2.0)),
        cone=ConeSpec(ConeSpec.ZERO, 1),
        feasible=FeasibleSet.box([0.0, 0.0], [np.inf, np.inf]),
        reference=ReferencePoint([0.0, 0.0], [1.0], role="minty"),
        label="fixture-coupled-growth",
    )
    u_fail = np.array([1.0, 6.0])
    u_premise = np.array([3.0, 3.0])
    fixtures.append(WorkedFixture(
        name="coupled-growth",
        problem=growth,
        star=growth.reference,
        sampling_lo=np.array([0.0, 0.0]), sampling_hi=np.array([10.0, 10.0]),
        witnesses={
            # implication pairs first so the recorded witness carries the
            # (premise point, conclusion point) orientation
            "pseudo": [(u_premise, u_fail)],
            "j-pseudo": [(u_premise, u_fail)],
            "lagrangian-pseudo": [(u_premise, u_fail)],
            "monotone": [(u_fail, u_premise)],
        },
        expected={
            "monotone": "refuted",
            "star-monotone": "not-refuted",
            "pseudo": "refuted",
            "j-pseudo": "refuted",
            "lagrangian-pseudo": "refuted",
        },
        notes="star monotone at the origin, non-monotone globally; equality constraint uses the zero cone (multiplier unrestricted)",
    ))
    return fixtures


def classify_fixtures(samples: int = 2000, seed: int = 0) -> dict[str, MonotonicityReport]:
    """Run the classifier over all fixtures (the regression entry point)."""
    return {fx.name: fx.classify(samples=samples, seed=seed) for fx in worked_fixtures()}
