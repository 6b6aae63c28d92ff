"""Monte Carlo check of the central limit theorem for lambda-hat.

Runs M replicates at each sample size and compares the empirical variance of
sqrt(n) * (lambda_hat - lambda) with the exact oracle variance.
"""

import argparse

from decompound.harness import ExperimentPlan, run_montecarlo
from decompound.model import LevyTriple


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description="CLT check for lambda-hat on a Poisson(1) jump model")
    p.add_argument("-n", type=int, nargs="+", default=[1000, 5000])
    p.add_argument("-M", "--replicates", type=int, default=200)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--threads", type=int, default=4)
    args = p.parse_args(argv)

    triple = LevyTriple(0.0, 1.0, 1.0, {1: 1.0})
    plan = ExperimentPlan(triple, 1.0, tuple(args.n), args.replicates, args.seed,
                          targets=("lambda", "naive_lambda"))
    rep = run_montecarlo(plan, threads=args.threads, write=False)
    for n in args.n:
        s = rep.summary("lambda", n)
        print(f"n={n}: var ratio {s.var_ratio:.3f}, KS p {s.ks_pvalue:.3f}, "
              f"coverage {s.coverage:.3f}, refused {s.refused}")


if __name__ == "__main__":
    main()
