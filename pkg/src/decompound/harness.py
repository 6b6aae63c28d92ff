"""Monte Carlo verification of the limit theorems, confidence bands and component tests."""

from __future__ import annotations

import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import (
    ConfigurationError,
    DivisionByNearZero,
    EstimateRefused,
    NotPSD,
    TooManyRefusals,
)
from .estimators import EstimateSet, SpectralFit, naive_lambda
from .model import LevyTriple, simulate, true_F, true_N
from .oracle import CovarianceReport, covariance_report
from .spectral import SpectralConfig

__all__ = [
    "ExperimentPlan",
    "TargetSummary",
    "FunctionalSummary",
    "MCReport",
    "Band",
    "TestDecision",
    "replicate_seed",
    "run_montecarlo",
    "build_bands",
    "component_tests",
]

MAX_REFUSED_FRACTION = 0.2
_ATOM_TARGET = re.compile(r"^([qp])(-?\d+)$")
SCALAR_BASE = ("lambda", "gamma", "naive_lambda", "q", "p")
FUNCTIONAL = ("N", "F")


def replicate_seed(master_seed: int, replicate: int, n: int) -> int:
    """Replicate-local 64-bit seed derived from (master seed, replicate, n)."""
    ss = np.random.SeedSequence([int(master_seed), int(replicate), int(n)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _check_target(name: str) -> None:
    if name in SCALAR_BASE or name in FUNCTIONAL:
        return
    m = _ATOM_TARGET.match(name)
    if m is None or int(m.group(2)) == 0:
        raise ConfigurationError(f"unknown target {name!r}")


@dataclass
class ExperimentPlan:
    triple: LevyTriple
    delta: float
    sample_sizes: tuple[int, ...]
    replicates: int
    master_seed: int = 0
    config: SpectralConfig = field(default_factory=SpectralConfig)
    targets: tuple[str, ...] = ("lambda",)
    t_grid: tuple[float, ...] = (-1.0, 0.0, 1.0)
    output_dir: str | None = None
    level: float = 0.95

    def __post_init__(self):
        self.sample_sizes = tuple(int(n) for n in self.sample_sizes)
        self.targets = tuple(self.targets)
        self.t_grid = tuple(sorted(float(t) for t in self.t_grid))
        if self.replicates < 1:
            raise ConfigurationError("need at least one replicate")
        if not self.sample_sizes or min(self.sample_sizes) < 1:
            raise ConfigurationError("sample sizes must be positive")
        if not self.delta > 0:
            raise ConfigurationError("delta must be positive")
        if not 0 < self.level < 1:
            raise ConfigurationError("level must lie in (0, 1)")
        for t in self.targets:
            _check_target(t)

    def jobs(self) -> list[tuple[int, int]]:
        """Deterministic (n, replicate) expansion."""
        return [(n, r) for n in self.sample_sizes for r in range(self.replicates)]

    def to_dict(self) -> dict:
        from .io import config_to_dict, model_to_dict

        return {
            "model": model_to_dict(self.triple, self.delta),
            "sample_sizes": list(self.sample_sizes),
            "replicates": self.replicates,
            "master_seed": self.master_seed,
            "config": config_to_dict(self.config),
            "targets": list(self.targets),
            "t_grid": list(self.t_grid),
            "output_dir": self.output_dir,
            "level": self.level,
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "ExperimentPlan":
        from .io import config_from_dict, load_model, model_from_dict

        model = d.get("model")
        if isinstance(model, str):
            p = Path(model)
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            triple, delta = load_model(p)
        elif isinstance(model, dict):
            triple, delta = model_from_dict(model)
        else:
            raise ConfigurationError("plan needs a model (inline object or path)")
        delta = float(d.get("delta", delta))
        config = config_from_dict(d["config"]) if d.get("config") else SpectralConfig()
        try:
            return cls(triple, delta, tuple(d["sample_sizes"]), int(d["replicates"]),
                       int(d.get("master_seed", 0)), config, tuple(d.get("targets", ("lambda",))),
                       tuple(d.get("t_grid", (-1.0, 0.0, 1.0))), d.get("output_dir"),
                       float(d.get("level", 0.95)))
        except KeyError as exc:
            raise ConfigurationError(f"plan is missing {exc}") from exc


def _truth(plan: ExperimentPlan, target: str):
    tr = plan.triple
    if target in ("lambda", "naive_lambda"):
        return tr.lambda_
    if target == "gamma":
        return tr.gamma
    if target == "q":
        return tr.q_total
    if target == "p":
        return tr.p_total
    if target == "N":
        return true_N(tr, np.array(plan.t_grid))
    if target == "F":
        return true_F(tr, np.array(plan.t_grid))
    kind, j = _ATOM_TARGET.match(target).groups()
    return tr.q(int(j)) if kind == "q" else tr.p(int(j))


def _oracle_variance(cov: CovarianceReport | None, target: str):
    if cov is None:
        return None
    if target == "lambda":
        return cov.sigma2_lambda
    if target == "q":
        return cov.sigma2_q
    if target == "p":
        return cov.sigma2_p
    m = _ATOM_TARGET.match(target)
    if m:
        kind, j = m.group(1), int(m.group(2))
        table = cov.sigma2_qj if kind == "q" else cov.sigma2_pj
        return table.get(j, 0.0)
    if target in FUNCTIONAL:
        fin = np.isfinite(cov.ts)
        return np.diag(cov.SigmaN if target == "N" else cov.SigmaF)[fin]
    return None


def _one_replicate(plan: ExperimentPlan, n: int, r: int) -> dict:
    sample = simulate(plan.triple, plan.delta, n, replicate_seed(plan.master_seed, r, n))
    out: dict = {"n": n, "replicate": r, "refused": None, "values": {}}
    eps = plan.triple.atom_spacing
    if "naive_lambda" in plan.targets:
        out["values"]["naive_lambda"] = naive_lambda(sample, plan.delta, plan.triple.gamma)
    spectral = [t for t in plan.targets if t != "naive_lambda"]
    if not spectral:
        return out
    try:
        fit = SpectralFit.from_sample(sample, plan.config, eps)
        ts = np.array(plan.t_grid)
        for t in spectral:
            if t == "lambda":
                v = fit.lambda_hat()
            elif t == "gamma":
                v = fit.gamma_hat()
            elif t == "q":
                v = fit.q_total_hat()
            elif t == "p":
                v = fit.p_hats()[1]
            elif t == "N":
                v = fit.N_hat(ts).values
            elif t == "F":
                v = fit.F_hat(ts).values
            else:
                kind, j = _ATOM_TARGET.match(t).groups()
                q = fit.qj_hat(int(j))
                v = q if kind == "q" else q / fit.lambda_hat()
                if kind == "p" and abs(fit.lambda_hat()) < 1e-8:
                    raise DivisionByNearZero("lambda_hat too small")
            out["values"][t] = v
    except EstimateRefused as exc:
        out["refused"] = type(exc).__name__
        out["values"] = {k: v for k, v in out["values"].items() if k == "naive_lambda"}
    return out


@dataclass
class TargetSummary:
    target: str
    n: int
    count: int
    refused: int
    truth: float
    mean_estimate: float
    bias: float
    bias_se: float
    scaled_mean: float
    scaled_var: float
    oracle_var: float | None
    var_ratio: float | None
    ks_stat: float | None
    ks_pvalue: float | None
    ks_degenerate: bool
    coverage: float | None

    def to_dict(self) -> dict:
        return {k: _clean(v) for k, v in self.__dict__.items()}


@dataclass
class FunctionalSummary:
    target: str
    n: int
    count: int
    ts: list[float]
    truth: list[float]
    oracle_var: list[float] | None
    pointwise_coverage: list[float] | None
    pointwise_mean_scaled_error: list[float]
    pointwise_var_scaled_error: list[float]
    sup_norm: list[float]

    def to_dict(self) -> dict:
        return {k: _clean(v) for k, v in self.__dict__.items()}


def _clean(v):
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return None if math.isnan(v) else v
    if isinstance(v, np.integer):
        return int(v)
    return v


@dataclass
class MCReport:
    plan: dict
    scalars: list[TargetSummary]
    functionals: list[FunctionalSummary]
    refusals: dict
    errors: list[tuple[int, str, int, float]]

    def summary(self, target: str, n: int | None = None) -> TargetSummary:
        for s in self.scalars:
            if s.target == target and (n is None or s.n == n):
                return s
        raise KeyError(target)

    def functional(self, target: str, n: int | None = None) -> FunctionalSummary:
        for s in self.functionals:
            if s.target == target and (n is None or s.n == n):
                return s
        raise KeyError(target)

    def to_dict(self) -> dict:
        return {
            "plan": self.plan,
            "scalars": [s.to_dict() for s in self.scalars],
            "functionals": [s.to_dict() for s in self.functionals],
            "refusals": self.refusals,
        }

    def write(self, out_dir) -> tuple[Path, Path]:
        from .io import atomic_write_text, write_errors

        out_dir = Path(out_dir)
        report = out_dir / "mc_report.json"
        errors = out_dir / "errors.csv"
        atomic_write_text(report, json.dumps(self.to_dict(), indent=2) + "\n")
        write_errors(errors, self.errors)
        return report, errors


def _summarize_scalar(target, n, est, truth, ovar, refused, level, scale):
    z_crit = stats.norm.ppf(0.5 + level / 2)
    est = np.asarray(est, dtype=float)
    M = est.size
    err = est - truth
    scaled = math.sqrt(n) * err * scale
    mean = float(est.mean()) if M else math.nan
    bias_se = float(err.std(ddof=1) / math.sqrt(M)) if M > 1 else math.nan
    svar = float(scaled.var(ddof=1)) if M > 1 else math.nan
    ks_stat = ks_p = cov = ratio = None
    degenerate = M < 2
    if ovar is not None and ovar > 0 and M:
        z = math.sqrt(n) * err / math.sqrt(ovar)
        cov = float(np.mean(np.abs(z) <= z_crit))
        ratio = svar / ovar if M > 1 else None
        if not degenerate:
            res = stats.kstest(z, "norm", method="asymp")
            ks_stat, ks_p = float(res.statistic), float(res.pvalue)
    return TargetSummary(target, n, M, refused, float(truth), mean, mean - truth, bias_se,
                         float(scaled.mean()) if M else math.nan, svar, ovar, ratio, ks_stat, ks_p,
                         degenerate, cov)


def run_montecarlo(plan: ExperimentPlan, threads: int = 1, covariance: CovarianceReport | None = None,
                   write: bool = True) -> MCReport:
    """Simulate, estimate and compare with the oracle for every (n, replicate) job."""
    if covariance is None:
        covariance = covariance_report(plan.triple, plan.delta, ts=np.array(plan.t_grid))
    jobs = plan.jobs()
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda job: _one_replicate(plan, *job), jobs))
    else:
        results = [_one_replicate(plan, n, r) for n, r in jobs]

    scalars, functionals, errors = [], [], []
    refusals = {}
    for n in plan.sample_sizes:
        res_n = [r for r in results if r["n"] == n]
        refused = [r for r in res_n if r["refused"]]
        kinds: dict[str, int] = {}
        for r in refused:
            kinds[r["refused"]] = kinds.get(r["refused"], 0) + 1
        refusals[str(n)] = {"refused": len(refused), "replicates": len(res_n), "by_reason": kinds}
        ok = [r for r in res_n if not r["refused"]]
        for target in plan.targets:
            truth = _truth(plan, target)
            ovar = _oracle_variance(covariance, target)
            if target in FUNCTIONAL:
                rows = [(r["replicate"], np.asarray(r["values"][target])) for r in ok]
                for rep, v in rows:
                    for t, e in zip(plan.t_grid, v - truth):
                        errors.append((rep, f"{target}({t:g})", n, float(e)))
                functionals.append(_summarize_functional(target, n, [v for _, v in rows], truth, ovar,
                                                         plan))
                continue
            source = res_n if target == "naive_lambda" else ok
            pairs = [(r["replicate"], r["values"].get(target)) for r in source]
            pairs = [(rep, v) for rep, v in pairs if v is not None]
            n_ref = len(res_n) - len(pairs)
            for rep, v in pairs:
                errors.append((rep, target, n, float(v - truth)))
            scale = 1.0
            if target == "gamma":
                scale = 1.0 / plan.config.bandwidths(n, plan.triple.atom_spacing).h
                ovar = None
            if target == "naive_lambda":
                ovar = None
            scalars.append(_summarize_scalar(target, n, [v for _, v in pairs], truth, ovar, n_ref,
                                             plan.level, scale))
    report = MCReport(plan.to_dict(), scalars, functionals, refusals, errors)
    if write and plan.output_dir:
        report.write(plan.output_dir)
    for n, info in refusals.items():
        if info["refused"] > MAX_REFUSED_FRACTION * info["replicates"]:
            raise TooManyRefusals(f"{info['refused']} of {info['replicates']} replicates refused at n={n}")
    return report


def _summarize_functional(target, n, values, truth, ovar, plan) -> FunctionalSummary:
    z_crit = stats.norm.ppf(0.5 + plan.level / 2)
    V = np.array(values).reshape(len(values), len(plan.t_grid))
    scaled = math.sqrt(n) * (V - truth)
    sup = np.max(np.abs(scaled), axis=1) if V.size else np.zeros(0)
    cov = None
    if ovar is not None and V.shape[0]:
        sd = np.sqrt(np.maximum(ovar, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            inside = np.abs(scaled) <= z_crit * sd
        cov = inside.mean(axis=0).tolist()
    M = V.shape[0]
    return FunctionalSummary(
        target, n, M, list(plan.t_grid), list(np.atleast_1d(truth)),
        None if ovar is None else list(ovar), cov,
        scaled.mean(axis=0).tolist() if M else [],
        scaled.var(axis=0, ddof=1).tolist() if M > 1 else [],
        sup.tolist(),
    )


@dataclass
class Band:
    ts: np.ndarray
    center: np.ndarray
    pointwise_radius: np.ndarray
    sup_radius: float
    level: float
    n: int

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.pointwise_radius

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.pointwise_radius

    @property
    def sup_lower(self) -> np.ndarray:
        return self.center - self.sup_radius

    @property
    def sup_upper(self) -> np.ndarray:
        return self.center + self.sup_radius

    def to_csv(self, path) -> None:
        from .io import atomic_write_text

        lines = ["t,estimate,pointwise_lower,pointwise_upper,sup_lower,sup_upper"]
        for i, t in enumerate(self.ts):
            lines.append(",".join(repr(float(v)) for v in (
                t, self.center[i], self.lower[i], self.upper[i], self.sup_lower[i], self.sup_upper[i])))
        atomic_write_text(path, "\n".join(lines) + "\n")


def _match_indices(ts: np.ndarray, grid: np.ndarray) -> np.ndarray:
    idx = []
    for t in ts:
        hit = np.flatnonzero(np.isclose(grid, t, rtol=0, atol=1e-9))
        if hit.size == 0:
            raise ConfigurationError(f"no oracle covariance at t={t:g}; recompute the report on the estimate grid")
        idx.append(int(hit[0]))
    return np.array(idx, dtype=int)


def build_bands(estimates: EstimateSet, covariance: CovarianceReport, level: float = 0.95,
                draws: int = 10_000, seed: int = 0, jitter: float = 1e-10) -> Band:
    """Pointwise and sup-norm Gaussian plug-in bands for F-hat."""
    if not 0 < level < 1:
        raise ConfigurationError("level must lie in (0, 1)")
    ts = np.asarray(estimates.F_hat.ts, dtype=float)
    idx = _match_indices(ts, covariance.ts)
    S = np.asarray(covariance.SigmaF)[np.ix_(idx, idx)]
    n = estimates.n
    diag = np.clip(np.diag(S), 0.0, None)
    z = stats.norm.ppf(0.5 + level / 2)
    pointwise = z * np.sqrt(diag / n)
    live = np.flatnonzero(diag > 0)
    sup = 0.0
    if live.size:
        sub = S[np.ix_(live, live)]
        sub = sub + jitter * max(float(np.max(diag)), 1.0) * np.eye(live.size)
        try:
            L = np.linalg.cholesky(sub)
        except np.linalg.LinAlgError as exc:
            raise NotPSD("covariance is not positive semidefinite after jitter") from exc
        rng = np.random.default_rng(seed)
        G = rng.standard_normal((draws, live.size)) @ L.T
        sup = float(np.quantile(np.max(np.abs(G), axis=1), level) / math.sqrt(n))
        sup = max(sup, float(np.max(pointwise)))
    return Band(ts, np.asarray(estimates.F_hat.values, dtype=float), pointwise, sup, level, n)


@dataclass(frozen=True)
class TestDecision:
    __test__ = False  # not a pytest class

    hypothesis: str
    estimate: float
    null_value: float
    statistic: float
    p_value: float
    reject: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _z_test(name, est, null, var, n, level) -> TestDecision:
    if var < 1e-14:
        if est == null:
            return TestDecision(name, est, null, 0.0, 1.0, False)
        raise DivisionByNearZero(f"oracle variance {var:.3g} for {name} is degenerate")
    stat = math.sqrt(n) * (est - null) / math.sqrt(var)
    p = float(2 * stats.norm.sf(abs(stat)))
    return TestDecision(name, est, null, float(stat), p, p < 1 - level)


def component_tests(estimates: EstimateSet, covariance: CovarianceReport, level: float = 0.95,
                    which=("no_discrete_part", "no_continuous_part")) -> dict:
    """z-tests for the absence of the discrete (q = 0) and continuous (p = 1) parts.

    ``which`` selects the tests; each raises DivisionByNearZero on its own when
    its oracle variance is degenerate and the estimate is off the null value.
    """
    n = estimates.n
    tests = {
        "no_discrete_part": lambda: _z_test("q = 0", estimates.q_total_hat, 0.0, covariance.sigma2_q, n, level),
        "no_continuous_part": lambda: _z_test("p = 1", estimates.p_total_hat, 1.0, covariance.sigma2_p, n,
                                              level),
    }
    unknown = set(which) - set(tests)
    if unknown:
        raise ConfigurationError(f"unknown component tests {sorted(unknown)}")
    return {k: tests[k]() for k in which}
