"""Command-line harness: generate instances, run solves, certify, classify.

Exit codes: 0 success (for ``solve``: the residual tolerance was met),
1 checks failed or tolerance not reached, 2 divergence, 64 usage error.
Every command is deterministic given its full argument list except the
wall-clock fields in emitted files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import certify as certify_mod
from . import instances, monotonicity
from .core import load_problem, problem_hash
from .errors import AlaviError, DivergenceError, IntegrityError, UsageError
from .params import SolverParams, StopRule
from .solver import alavi_run
from .trace import RunTrace

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_DIVERGED = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors must exit 64, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(EXIT_USAGE)


def _out_root(value: str | None) -> Path:
    if value:
        return Path(value)
    return Path(os.environ.get("ALAVI_OUT", "alavi-out"))


def _apply_config(args: argparse.Namespace, parser: _Parser) -> argparse.Namespace:
    """--config JSON supplies defaults; explicit flags win."""
    if not getattr(args, "config", None):
        return args
    path = Path(args.config)
    if not path.is_file():
        parser.error(f"config file not found: {path}")
    with open(path) as fh:
        overrides = json.load(fh)
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) is None:
            setattr(args, attr, value)
    return args


def _resolve_problem(args, parser: _Parser):
    if getattr(args, "instance", None):
        path = Path(args.instance)
        if not (path.is_file() or (path.is_dir() and (path / "problem.json").is_file())):
            parser.error(f"unreadable instance path: {path}")
        return load_problem(path)
    if getattr(args, "family", None):
        return instances.generate_family(
            args.family, args.n, args.seed, m=getattr(args, "m", None),
            kind=getattr(args, "kind", None) or "psd-linear",
        )
    parser.error("provide --instance PATH or --family/--n/--seed")


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args, parser) -> int:
    problem = instances.generate_family(args.family, args.n, args.seed, m=args.m,
                                        kind=args.kind or "psd-linear")
    out = _out_root(args.out) / f"{args.family}-n{args.n}-s{args.seed}"
    manifest = instances.write_instance(problem, args.family, args.seed, out)
    print(manifest)
    return EXIT_OK


def _solve_single(problem, args, out_dir: Path) -> tuple[int, dict]:
    params = SolverParams(
        eta=args.eta if args.eta is not None else "auto",
        gamma=args.gamma if args.gamma is not None else "auto",
        alpha=args.alpha if args.alpha is not None else "auto",
    )
    stop = StopRule(
        max_iters=args.max_iters if args.max_iters is not None else 100000,
        kkt_tol=args.kkt_tol if args.kkt_tol is not None else 1e-6,
        step_tol=args.step_tol if args.step_tol is not None else 0.0,
    )
    u0 = _start_point(args.u0, problem)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        trace = alavi_run(
            problem, params, stop, u0=u0,
            snapshot_stride=args.snap_stride if args.snap_stride is not None else 10,
        )
    except DivergenceError as err:
        dump = {"iter": err.k, "u": [float(x) for x in err.u], "p": [float(x) for x in err.p]}
        with open(out_dir / "last_finite_state.json", "w") as fh:
            json.dump(dump, fh, indent=1)
        if getattr(err, "trace", None) is not None:
            err.trace.save(out_dir)
        print(f"diverged at iteration {err.k}; last finite state dumped", file=sys.stderr)
        return EXIT_DIVERGED, {}
    trace.save(out_dir)
    summary = trace.summary()
    summary["converged"] = trace.stop_reason == "kkt_tol"
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(json.dumps({"out": str(out_dir), **{k: summary[k] for k in ("iters", "final_kkt", "stop_reason")}}))
    return (EXIT_OK if summary["converged"] else EXIT_FAIL), summary


def _start_point(spec: str | None, problem):
    if spec in (None, "ones"):
        return np.ones(problem.n)
    if spec == "half":
        return np.full(problem.n, 0.5)
    if spec == "zeros":
        return np.zeros(problem.n)
    if spec == "ref":
        if problem.reference is None:
            raise UsageError("--u0 ref needs an instance with a reference point")
        return problem.reference.u
    path = Path(spec)
    if path.is_file():
        return np.loadtxt(path, delimiter=",")
    raise UsageError(f"unknown start point {spec!r}")


def _solve_seed_job(payload) -> int:
    args_dict, seed, out_dir = payload
    args = argparse.Namespace(**args_dict)
    args.seed = seed
    parser = _Parser()
    problem = _resolve_problem(args, parser)
    code, _ = _solve_single(problem, args, Path(out_dir))
    return code


def cmd_solve(args, parser) -> int:
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    if seeds and not args.family:
        parser.error("--seeds batches need --family generation mode")
    if seeds:
        root = _out_root(args.out)
        jobs = []
        for seed in seeds:
            out_dir = root / f"{args.family}-n{args.n}-s{seed}"
            jobs.append((vars(args), seed, str(out_dir)))
        if args.jobs and args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                codes = list(pool.map(_solve_seed_job, jobs))
        else:
            codes = [_solve_seed_job(job) for job in jobs]
        return max(codes)
    problem = _resolve_problem(args, parser)
    name = args.run_name or (Path(args.instance).stem if args.instance else f"{args.family}-n{args.n}-s{args.seed}")
    out_dir = _out_root(args.out) / f"run-{name}"
    code, _ = _solve_single(problem, args, out_dir)
    return code


def cmd_certify(args, parser) -> int:
    run_dir = Path(args.run)
    if not run_dir.is_dir():
        parser.error(f"run directory not found: {run_dir}")
    problem = _resolve_problem(args, parser)
    trace = RunTrace.load(run_dir)
    if trace.problem_hash and trace.problem_hash != problem_hash(problem):
        raise IntegrityError("trace does not match the instance (hash mismatch)")
    reports = certify_mod.certify_run(trace, problem, monotone=args.monotone)
    out = {name: rep.to_json_dict() for name, rep in reports.items()}
    all_pass = all(rep.holds for rep in reports.values())
    payload = {"all_pass": all_pass, "checks": out}
    target = run_dir / "certificates.json"
    with open(target, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    for name, rep in reports.items():
        state = "PASS" if rep.holds else f"FAIL (first violation at iter {rep.first_violation})"
        print(f"{name}: {state}")
    print(target)
    return EXIT_OK if all_pass else EXIT_FAIL


def cmd_classify(args, parser) -> int:
    out_root = _out_root(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    if args.fixtures:
        reports = monotonicity.classify_fixtures(
            samples=args.samples if args.samples is not None else 2000,
            seed=args.seed if args.seed is not None else 0,
        )
        payload = {name: rep.to_json_dict() for name, rep in reports.items()}
        target = out_root / "fixture-classification.json"
        ok = True
        for fx in monotonicity.worked_fixtures():
            rep = reports[fx.name]
            for cls, expected in fx.expected.items():
                got = rep.verdict(cls)
                if got != expected:
                    ok = False
                    print(f"{fx.name}/{cls}: expected {expected}, got {got}")
        with open(target, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
        print(target)
        return EXIT_OK if ok else EXIT_FAIL
    problem = _resolve_problem(args, parser)
    report = monotonicity.classify(
        problem,
        samples=args.samples if args.samples is not None else 2000,
        seed=args.seed if args.seed is not None else 0,
        tol=args.tol if args.tol is not None else 1e-9,
        mu=args.mu if args.mu is not None else 1.0,
    )
    target = out_root / "classification.json"
    with open(target, "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    for cls in monotonicity.CLASSES:
        print(f"{cls}: {report.verdict(cls)}")
    print(target)
    return EXIT_OK


def cmd_bench(args, parser) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    seeds = [int(s) for s in (args.seeds or "1").split(",")]
    rows = []
    for n in sizes:
        for seed in seeds:
            problem = instances.generate_family(args.family, n, seed, m=args.m)
            stop = StopRule(
                max_iters=args.max_iters if args.max_iters is not None else 200000,
                kkt_tol=args.kkt_tol if args.kkt_tol is not None else 1e-6,
            )
            trace = alavi_run(problem, SolverParams(), stop, snapshot_stride=0, ergodic_stride=0)
            rows.append({
                "family": args.family, "n": n, "seed": seed,
                "iters": len(trace), "final_kkt": float(trace.kkt_residual[-1]),
                "wall_ms": trace.total_wall_ms, "stop_reason": trace.stop_reason,
            })
            print(f"{args.family} n={n} seed={seed}: iters={len(trace)} "
                  f"kkt={trace.kkt_residual[-1]:.2e} wall={trace.total_wall_ms:.0f}ms")
    out_root = _out_root(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    with open(out_root / "bench.json", "w") as fh:
        json.dump(rows, fh, indent=1)
        fh.write("\n")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="alavi", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", default=None, help="output root (default $ALAVI_OUT or ./alavi-out)")
        p.add_argument("--config", default=None, help="JSON file supplying flag defaults")

    p_gen = sub.add_parser("gen", help="generate a seeded instance")
    p_gen.add_argument("--family", required=True)
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--m", type=int, default=None)
    p_gen.add_argument("--kind", default=None)
    add_common(p_gen)
    p_gen.set_defaults(func=cmd_gen)

    p_solve = sub.add_parser("solve", help="run the solver on an instance")
    p_solve.add_argument("--instance", default=None)
    p_solve.add_argument("--family", default=None)
    p_solve.add_argument("--n", type=int, default=None)
    p_solve.add_argument("--seed", type=int, default=1)
    p_solve.add_argument("--m", type=int, default=None)
    p_solve.add_argument("--kind", default=None)
    p_solve.add_argument("--eta", type=float, default=None)
    p_solve.add_argument("--gamma", type=float, default=None)
    p_solve.add_argument("--alpha", type=float, default=None)
    p_solve.add_argument("--max-iters", type=int, default=None)
    p_solve.add_argument("--kkt-tol", type=float, default=None)
    p_solve.add_argument("--step-tol", type=float, default=None)
    p_solve.add_argument("--snap-stride", type=int, default=None)
    p_solve.add_argument("--u0", default=None, help="ones|half|zeros|ref|CSV path")
    p_solve.add_argument("--seeds", default=None, help="comma list for batch generation runs")
    p_solve.add_argument("--jobs", type=int, default=None)
    p_solve.add_argument("--run-name", default=None)
    add_common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_cert = sub.add_parser("certify", help="verify certificates over a saved run")
    p_cert.add_argument("--run", required=True)
    p_cert.add_argument("--instance", default=None)
    p_cert.add_argument("--family", default=None)
    p_cert.add_argument("--n", type=int, default=None)
    p_cert.add_argument("--seed", type=int, default=1)
    p_cert.add_argument("--m", type=int, default=None)
    p_cert.add_argument("--monotone", action="store_true")
    add_common(p_cert)
    p_cert.set_defaults(func=cmd_certify)

    p_cls = sub.add_parser("classify", help="generalized-monotonicity report")
    p_cls.add_argument("--instance", default=None)
    p_cls.add_argument("--family", default=None)
    p_cls.add_argument("--n", type=int, default=None)
    p_cls.add_argument("--seed", type=int, default=None)
    p_cls.add_argument("--m", type=int, default=None)
    p_cls.add_argument("--fixtures", action="store_true")
    p_cls.add_argument("--samples", type=int, default=None)
    p_cls.add_argument("--tol", type=float, default=None)
    p_cls.add_argument("--mu", type=float, default=None)
    add_common(p_cls)
    p_cls.set_defaults(func=cmd_classify)

    p_bench = sub.add_parser("bench", help="timing sweep over sizes and seeds")
    p_bench.add_argument("--family", required=True)
    p_bench.add_argument("--sizes", required=True)
    p_bench.add_argument("--seeds", default=None)
    p_bench.add_argument("--m", type=int, default=None)
    p_bench.add_argument("--max-iters", type=int, default=None)
    p_bench.add_argument("--kkt-tol", type=float, default=None)
    add_common(p_bench)
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(args, parser)
        return args.func(args, parser)
    except SystemExit as exc:  # argparse/--help and parser.error paths
        return int(exc.code or 0)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as err:
        print(f"diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    except AlaviError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
