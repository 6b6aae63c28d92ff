"""Command line interface.

    decompound simulate   --model m.json -n 5000 --seed 1 --out z.csv
    decompound estimate   --increments z.csv --model m.json [--config c.json] --out est.json
    decompound oracle     --model m.json --out cov.json [--csv-dir DIR]
    decompound montecarlo --plan plan.json --out DIR [--threads 4]
    decompound bands      --estimates est.json --oracle cov.json --out band.csv

Exit codes: 0 success, 2 invalid configuration or model, 3 estimate refused,
4 input/output error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigurationError, EstimateRefused, TooManyRefusals
from .estimators import SpectralFit
from .harness import ExperimentPlan, build_bands, run_montecarlo
from .model import simulate
from .oracle import CovarianceReport, covariance_report, default_t_grid
from .spectral import SpectralConfig

log = logging.getLogger("decompound")

EXIT_OK, EXIT_CONFIG, EXIT_REFUSED, EXIT_IO = 0, 2, 3, 4


def _t_grid(text: str | None, atom_spacing: float) -> np.ndarray:
    if not text:
        return default_t_grid(atom_spacing)
    if ":" in text:
        a, b, k = text.split(":")
        return np.linspace(float(a), float(b), int(k))
    return np.array(sorted(float(x) for x in text.split(",")))


def cmd_simulate(args) -> int:
    triple, delta = io.load_model(args.model)
    sample = simulate(triple, delta, args.n, args.seed)
    io.write_increments(args.out, sample)
    log.info("wrote %d increments to %s", sample.n, args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    if args.model:
        triple, delta = io.load_model(args.model)
        atom_spacing = triple.atom_spacing
    else:
        delta, atom_spacing = args.delta, args.atom_spacing
    if delta is None:
        raise ConfigurationError("estimate needs --delta or --model")
    config = io.load_config(args.config) if args.config else SpectralConfig()
    sample = io.read_increments(args.increments, delta)
    fit = SpectralFit.from_sample(sample, config, atom_spacing)
    est = fit.estimate_set(_t_grid(args.t_grid, atom_spacing))
    io.atomic_write_text(args.out, io.dumps(io.estimates_to_dict(est)))
    print(f"lambda_hat={est.lambda_hat:.10g} gamma_hat={est.gamma_hat:.10g} q_hat={est.q_total_hat:.10g}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    triple, delta = io.load_model(args.model)
    rep = covariance_report(triple, delta, ts=_t_grid(args.t_grid, triple.atom_spacing), tol=args.tol)
    rep.to_json(args.out)
    if args.csv_dir:
        d = Path(args.csv_dir)
        rep.write_csv(d / "SigmaN.csv", "SigmaN")
        rep.write_csv(d / "SigmaF.csv", "SigmaF")
    print(f"sigma2_lambda={rep.sigma2_lambda:.12g}")
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    plan_path = Path(args.plan)
    d = io.read_json(plan_path)
    if args.seed is not None:
        d["master_seed"] = args.seed
    if args.config:
        d["config"] = io.read_json(args.config)
    plan = ExperimentPlan.from_dict(d, base_dir=plan_path.parent)
    plan.output_dir = args.out or plan.output_dir
    if not plan.output_dir:
        raise ConfigurationError("montecarlo needs --out or an output_dir in the plan")
    report = run_montecarlo(plan, threads=args.threads)
    for s in report.scalars:
        print(f"{s.target} n={s.n}: bias={s.bias:.4g} var_ratio={s.var_ratio} ks_p={s.ks_pvalue}")
    return EXIT_OK


def cmd_bands(args) -> int:
    est = io.estimates_from_dict(io.read_json(args.estimates))
    cov = CovarianceReport.from_dict(io.read_json(args.oracle))
    band = build_bands(est, cov, args.level, seed=args.seed)
    band.to_csv(args.out)
    print(f"sup_radius={band.sup_radius:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="decompound", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate increments from a model JSON")
    s.add_argument("--model", required=True)
    s.add_argument("-n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="spectral estimates from an increments CSV")
    e.add_argument("--increments", required=True)
    e.add_argument("--model", help="model JSON supplying delta and atom_spacing")
    e.add_argument("--delta", type=float)
    e.add_argument("--atom-spacing", type=float, default=1.0)
    e.add_argument("--config")
    e.add_argument("--t-grid", help="'a:b:k' or comma separated points; use --t-grid=-2:2:9 for negative starts")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_estimate)

    o = sub.add_parser("oracle", help="limiting covariances for a model JSON")
    o.add_argument("--model", required=True)
    o.add_argument("--t-grid")
    o.add_argument("--tol", type=float, default=1e-12)
    o.add_argument("--csv-dir")
    o.add_argument("--out", required=True)
    o.set_defaults(func=cmd_oracle)

    m = sub.add_parser("montecarlo", help="run a Monte Carlo plan")
    m.add_argument("--plan", required=True)
    m.add_argument("--config")
    m.add_argument("--seed", type=int)
    m.add_argument("--threads", type=int, default=1)
    m.add_argument("--out")
    m.set_defaults(func=cmd_montecarlo)

    b = sub.add_parser("bands", help="confidence bands for F from estimates and oracle")
    b.add_argument("--estimates", required=True)
    b.add_argument("--oracle", required=True)
    b.add_argument("--level", type=float, default=0.95)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bands)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (EstimateRefused, TooManyRefusals) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except ConfigurationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
