#!/usr/bin/env python3
"""Run the two random experiment families end to end.

For each (family, n, seed): generate the instance, solve with auto
parameters, run the certificate battery, and record a convergence plot of
the residual against the iteration count.

Example:
    python scripts/run_experiments.py --families ncvi1 ncvi2 --sizes 100 500 \
        --seeds 1 2 3 --out experiments
"""

import argparse
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

import alavi


def run_one(family: str, n: int, seed: int, out: Path, kkt_tol: float, max_iters: int):
    problem = alavi.generate_family(family, n, seed)
    trace = alavi.alavi_run(
        problem,
        stop=alavi.StopRule(max_iters=max_iters, kkt_tol=kkt_tol),
        snapshot_stride=0,
        ergodic_stride=0,
    )
    run_dir = out / f"{family}-n{n}-s{seed}"
    alavi.write_instance(problem, family, seed, run_dir)
    trace.save(run_dir)
    reports = {}
    if len(trace) >= 2:
        reports = alavi.certify_run(trace, problem)
    summary = trace.summary()
    summary["certificates"] = {k: r.holds for k, r in reports.items()}
    with open(run_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    print(
        f"{family} n={n} seed={seed}: {len(trace)} iters, "
        f"final residual {trace.kkt_residual[-1]:.2e}, "
        f"certificates {'all ok' if all(r.holds for r in reports.values()) else 'FAILED'}"
    )
    return trace


def plot_family(family: str, traces: dict, out: Path):
    fig, ax = plt.subplots(figsize=(6, 4))
    for (n, seed), trace in sorted(traces.items()):
        ax.semilogy(trace.iters, trace.kkt_residual, label=f"n={n}, seed={seed}", lw=0.9)
    ax.set_xlabel("iteration")
    ax.set_ylabel("KKT error")
    ax.set_title(family)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out / f"{family}-kkt.png", dpi=150)
    plt.close(fig)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--families", nargs="+", default=["ncvi1", "ncvi2"])
    ap.add_argument("--sizes", nargs="+", type=int, default=[100, 500])
    ap.add_argument("--seeds", nargs="+", type=int, default=[1, 2, 3])
    ap.add_argument("--kkt-tol", type=float, default=1e-6)
    ap.add_argument("--max-iters", type=int, default=200000)
    ap.add_argument("--out", type=Path, default=Path("experiments"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for family in args.families:
        tol = args.kkt_tol if family != "ncvi2" else max(args.kkt_tol, 1e-5)
        traces = {}
        for n in args.sizes:
            for seed in args.seeds:
                traces[(n, seed)] = run_one(family, n, seed, args.out, tol, args.max_iters)
        plot_family(family, traces, args.out)


if __name__ == "__main__":
    main()
