#!/usr/bin/env python3
"""Desk-scale landscape: existence probability and expected stable-matching
count across an n grid.  Writes CSVs plus JSON sidecars under results/."""

import argparse
import pathlib

from roommates.experiments import ExperimentConfig, run_experiment


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=20260810)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--replicates", type=int, default=2000)
    ap.add_argument("--samples", type=int, default=50000)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    scaling = ExperimentConfig(
        kind="scaling",
        n_grid=(10, 20, 50, 100, 200, 500),
        replicates=args.replicates,
        master_seed=args.seed,
        workers=args.workers,
        output=str(outdir / "scaling.csv"),
    )
    for row in run_experiment(scaling):
        print(
            f"n={row.n:>4}  p_hat={row.p_hat:.4f} +- {row.stderr:.4f}"
            f"  (prediction {row.mertens_prediction:.4f})"
        )

    ex = ExperimentConfig(
        kind="ex-scaling",
        n_grid=(10, 50, 100, 500),
        samples=args.samples,
        master_seed=args.seed,
        workers=args.workers,
        output=str(outdir / "ex_scaling.csv"),
    )
    for row in run_experiment(ex):
        print(f"n={row.n:>4}  E[count]={row.estimate:.4f} +- {row.stderr:.4f}  ess={row.ess:.0f}")


if __name__ == "__main__":
    main()
