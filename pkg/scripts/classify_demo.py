#!/usr/bin/env python3
"""Classify the built-in worked examples and a generated instance.

Prints the per-class verdicts with witnesses where a class was refuted,
demonstrating the refutation-only semantics of the sampler.
"""

import argparse

import alavi


def show(report):
    for cls, entry in report.entries.items():
        line = f"  {cls:>20}: {entry.verdict}"
        if entry.verdict == "refuted":
            wu = ", ".join(f"{x:.4g}" for x in entry.witness_u)
            wv = ", ".join(f"{x:.4g}" for x in entry.witness_v)
            line += f"  witness=(({wu}), ({wv})) value={entry.conclusion:.6g}"
        print(line)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--family", default="ncvi1")
    ap.add_argument("--n", type=int, default=50)
    args = ap.parse_args()

    for fixture in alavi.worked_fixtures():
        print(f"== fixture: {fixture.name} ({fixture.notes})")
        show(fixture.classify(samples=args.samples, seed=args.seed))

    problem = alavi.generate_family(args.family, args.n, args.seed or 1)
    print(f"== generated: {problem.label}")
    show(alavi.classify(problem, samples=args.samples, seed=args.seed))
    verdict = alavi.verify_minty(problem, problem.reference, samples=args.samples, seed=args.seed)
    print(f"  attached weak solution: {'not refuted' if verdict.not_refuted else 'REFUTED'} "
          f"on {verdict.samples} samples (worst margin {verdict.margin:.2e})")


if __name__ == "__main__":
    main()
