"""Simulate one sample, estimate F and print pointwise and sup confidence bands."""

import argparse

import numpy as np

from decompound.estimators import estimate_all
from decompound.harness import build_bands
from decompound.model import LevyTriple, simulate, true_F
from decompound.oracle import covariance_report


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("-n", type=int, default=5000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--level", type=float, default=0.95)
    args = p.parse_args(argv)

    triple = LevyTriple(0.0, 1.0, 1.0, {-1: 0.4, 1: 0.6})
    ts = np.linspace(-2.5, 2.5, 11)
    est = estimate_all(simulate(triple, 1.0, args.n, args.seed), ts=ts)
    band = build_bands(est, covariance_report(triple, 1.0, ts), args.level, seed=args.seed)
    truth = true_F(triple, band.ts)
    print(f"{'t':>6} {'F_hat':>7} {'F':>7} {'pointwise':>17} {'sup':>17}")
    for k, t in enumerate(band.ts):
        print(f"{t:6.2f} {band.center[k]:7.4f} {truth[k]:7.4f} "
              f"[{band.lower[k]:6.3f},{band.upper[k]:6.3f}] "
              f"[{band.sup_lower[k]:6.3f},{band.sup_upper[k]:6.3f}]")


if __name__ == "__main__":
    main()
