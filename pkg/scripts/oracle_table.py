"""Print the exact limiting variances of the spectral estimators for a model.

Example:
    python3 scripts/oracle_table.py --atoms=-1:0.5,1:0.5 --deltas 0.1 0.5 1 2
"""

import argparse

from decompound.model import LevyTriple
from decompound.oracle import covariance_report


def parse_atoms(text: str) -> dict[int, float]:
    out = {}
    for item in text.split(","):
        j, q = item.split(":")
        out[int(j)] = float(q)
    return out


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--atoms", default="1:1", help="comma separated j:q pairs, e.g. -1:0.4,1:0.6")
    p.add_argument("--deltas", type=float, nargs="+", default=[0.1, 0.5, 1.0, 2.0])
    p.add_argument("--t", type=float, default=0.0, help="point for the F variance")
    args = p.parse_args(argv)

    atoms = parse_atoms(args.atoms)
    triple = LevyTriple(0.0, sum(atoms.values()), 1.0, atoms)
    print(f"{'delta':>8} {'sigma2_lambda':>14} {'sigma2_q':>12} {'sigma2_F(t)':>12}")
    for delta in args.deltas:
        rep = covariance_report(triple, delta, [args.t])
        k = list(rep.ts).index(args.t)
        print(f"{delta:8.3f} {rep.sigma2_lambda:14.6f} {rep.sigma2_q:12.6f} {rep.SigmaF[k, k]:12.6f}")


if __name__ == "__main__":
    main()
