"""Per-iteration run records and their on-disk layout.

A trace stores dense scalar series (step norms, dual gaps, residuals,
potential values, wall clock) plus optionally thinned state snapshots and
running ergodic means.  Scalar rows are indexed from 1; row ``k`` relates
to row ``k+1`` through the descent certificates, and "row 0" is the
virtual initial state stored in ``initial``.

On disk: ``trace.csv`` with header
``iter,step_norm,dual_gap_norm,kkt_residual,lyapunov,wall_ms``; snapshots
in ``snapshots_{u,v,p,q}.csv`` (one point per row, iteration number
first); ergodic means in ``ergodic_{u,q}.csv``; everything else in
``trace_meta.json``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import ReferencePoint
from .errors import InsufficientDataError, UsageError
from .params import DerivedConstants, SolverParams

TRACE_HEADER = ["iter", "step_norm", "dual_gap_norm", "kkt_residual", "lyapunov", "wall_ms"]


@dataclass(frozen=True)
class IterationRecord:
    """Synchronous per-iteration callback payload; callbacks must not mutate."""

    k: int
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    q: np.ndarray
    step_norm: float
    dual_gap_norm: float
    kkt_residual: float
    lyapunov: float
    wall_ms: float


@dataclass
class RunTrace:
    """Everything a run leaves behind; the substrate for every certificate."""

    params: SolverParams
    consts: DerivedConstants
    ref: Optional[ReferencePoint]
    initial_u: np.ndarray
    initial_v: np.ndarray
    initial_p: np.ndarray
    iters: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    step_norm: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dual_gap_norm: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kkt_residual: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lyapunov: np.ndarray = field(default_factory=lambda: np.zeros(0))
    wall_ms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    snap_iters: list = field(default_factory=list)
    snaps_u: list = field(default_factory=list)
    snaps_v: list = field(default_factory=list)
    snaps_p: list = field(default_factory=list)
    snaps_q: list = field(default_factory=list)
    ergodic_iters: list = field(default_factory=list)
    ergodic_u: list = field(default_factory=list)
    ergodic_q: list = field(default_factory=list)
    final_u: Optional[np.ndarray] = None
    final_p: Optional[np.ndarray] = None
    stop_reason: str = ""
    kkt_exact: bool = True
    max_u_norm: float = 0.0
    max_q_norm: float = 0.0
    problem_hash: str = ""
    total_wall_ms: float = 0.0

    def __len__(self) -> int:
        return int(self.iters.shape[0])

    # -- lookups ----------------------------------------------------------

    def snapshot_index(self, k: int) -> int:
        try:
            return self.snap_iters.index(k)
        except ValueError:
            raise InsufficientDataError(f"no snapshot at iteration {k}")

    def has_dense_snapshots(self) -> bool:
        return len(self.snap_iters) == len(self) and self.snap_iters == list(range(1, len(self) + 1))

    def state_at(self, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(u, v, p, q) at iteration k; k=0 gives the initial state (q absent)."""
        if k == 0:
            return self.initial_u, self.initial_v, self.initial_p, None
        i = self.snapshot_index(k)
        return self.snaps_u[i], self.snaps_v[i], self.snaps_p[i], self.snaps_q[i]

    def summary(self) -> dict:
        last = len(self) - 1
        return {
            "iters": len(self),
            "final_kkt": float(self.kkt_residual[last]) if last >= 0 else float("nan"),
            "final_step_norm": float(self.step_norm[last]) if last >= 0 else float("nan"),
            "params": {"eta": self.params.eta, "gamma": self.params.gamma, "alpha": self.params.alpha},
            "constants": self.consts.as_dict(),
            "stop_reason": self.stop_reason,
            "kkt_exact": self.kkt_exact,
            "max_u_norm": self.max_u_norm,
            "max_q_norm": self.max_q_norm,
            "problem_hash": self.problem_hash,
            "wall_ms": self.total_wall_ms,
        }

    # -- persistence ------------------------------------------------------

    def save(self, out_dir: Path) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "trace.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_HEADER)
            for i in range(len(self)):
                writer.writerow([
                    int(self.iters[i]),
                    repr(float(self.step_norm[i])),
                    repr(float(self.dual_gap_norm[i])),
                    repr(float(self.kkt_residual[i])),
                    repr(float(self.lyapunov[i])),
                    repr(float(self.wall_ms[i])),
                ])
        for name, iters, points in (
            ("snapshots_u", self.snap_iters, self.snaps_u),
            ("snapshots_v", self.snap_iters, self.snaps_v),
            ("snapshots_p", self.snap_iters, self.snaps_p),
            ("snapshots_q", self.snap_iters, self.snaps_q),
            ("ergodic_u", self.ergodic_iters, self.ergodic_u),
            ("ergodic_q", self.ergodic_iters, self.ergodic_q),
        ):
            _write_points(out_dir / f"{name}.csv", iters, points)
        meta = {
            "params": {"eta": self.params.eta, "gamma": self.params.gamma, "alpha": self.params.alpha},
            "constants": self.consts.as_dict(),
            "reference": None if self.ref is None else {
                "u": list(map(float, self.ref.u)), "p": list(map(float, self.ref.p)), "role": self.ref.role,
            },
            "initial_u": list(map(float, self.initial_u)),
            "initial_v": list(map(float, self.initial_v)),
            "initial_p": list(map(float, self.initial_p)),
            "final_u": None if self.final_u is None else list(map(float, self.final_u)),
            "final_p": None if self.final_p is None else list(map(float, self.final_p)),
            "stop_reason": self.stop_reason,
            "kkt_exact": self.kkt_exact,
            "max_u_norm": self.max_u_norm,
            "max_q_norm": self.max_q_norm,
            "problem_hash": self.problem_hash,
            "total_wall_ms": self.total_wall_ms,
        }
        with open(out_dir / "trace_meta.json", "w") as fh:
            json.dump(meta, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return out_dir / "trace.csv"

    @staticmethod
    def load(run_dir: Path) -> "RunTrace":
        run_dir = Path(run_dir)
        csv_path = run_dir / "trace.csv"
        meta_path = run_dir / "trace_meta.json"
        if not csv_path.is_file() or not meta_path.is_file():
            raise UsageError(f"run directory {run_dir} lacks trace.csv/trace_meta.json")
        with open(meta_path) as fh:
            meta = json.load(fh)
        rows = []
        with open(csv_path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != TRACE_HEADER:
                raise UsageError(f"unexpected trace header {header}")
            for row in reader:
                if row:
                    rows.append(row)
        arr = np.asarray([[float(x) for x in row] for row in rows]) if rows else np.zeros((0, 6))
        ref = None
        if meta.get("reference"):
            r = meta["reference"]
            ref = ReferencePoint(np.asarray(r["u"]), np.asarray(r["p"]), r["role"])
        trace = RunTrace(
            params=SolverParams(**meta["params"]),
            consts=DerivedConstants.from_dict(meta["constants"]),
            ref=ref,
            initial_u=np.asarray(meta["initial_u"], float),
            initial_v=np.asarray(meta["initial_v"], float),
            initial_p=np.asarray(meta["initial_p"], float),
            iters=arr[:, 0].astype(int),
            step_norm=arr[:, 1],
            dual_gap_norm=arr[:, 2],
            kkt_residual=arr[:, 3],
            lyapunov=arr[:, 4],
            wall_ms=arr[:, 5],
            final_u=None if meta.get("final_u") is None else np.asarray(meta["final_u"], float),
            final_p=None if meta.get("final_p") is None else np.asarray(meta["final_p"], float),
            stop_reason=meta.get("stop_reason", ""),
            kkt_exact=bool(meta.get("kkt_exact", True)),
            max_u_norm=float(meta.get("max_u_norm", 0.0)),
            max_q_norm=float(meta.get("max_q_norm", 0.0)),
            problem_hash=meta.get("problem_hash", ""),
            total_wall_ms=float(meta.get("total_wall_ms", 0.0)),
        )
        for name, iters_attr, points_attr in (
            ("snapshots_u", "snap_iters", "snaps_u"),
            ("snapshots_v", None, "snaps_v"),
            ("snapshots_p", None, "snaps_p"),
            ("snapshots_q", None, "snaps_q"),
            ("ergodic_u", "ergodic_iters", "ergodic_u"),
            ("ergodic_q", None, "ergodic_q"),
        ):
            iters, points = _read_points(run_dir / f"{name}.csv")
            if iters_attr:
                setattr(trace, iters_attr, iters)
            setattr(trace, points_attr, points)
        return trace


def _write_points(path: Path, iters: list, points: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for k, point in zip(iters, points):
            writer.writerow([int(k)] + [repr(float(x)) for x in point])


def _read_points(path: Path) -> tuple[list, list]:
    if not Path(path).is_file():
        return [], []
    iters, points = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row:
                iters.append(int(row[0]))
                points.append(np.asarray([float(x) for x in row[1:]]))
    return iters, points
