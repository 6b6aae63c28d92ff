"""Spectral estimators of lambda, gamma, q_j, q, N and F, plus the naive baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import isotonic_regression

from .errors import ConfigurationError, DivisionByNearZero, IndexOutOfWindow
from .model import IncrementSample
from .spectral import (
    Bandwidths,
    FrequencyGrid,
    SpectralConfig,
    distinguished_log,
    ecf,
    integrate_weighted,
    weight_transform,
)

__all__ = [
    "StepFunction",
    "EstimateSet",
    "SpectralFit",
    "naive_lambda",
    "default_kappa",
    "estimate_lambda",
    "estimate_gamma",
    "estimate_qj",
    "estimate_q",
    "estimate_N",
    "estimate_F",
    "estimate_p",
    "estimate_all",
]

RATIO_FLOOR = 1e-8


@dataclass(frozen=True)
class StepFunction:
    """Values of a cadlag estimate on an evaluation grid with its lattice jumps."""

    ts: np.ndarray
    values: np.ndarray
    jumps: tuple[tuple[float, float], ...] = ()

    def to_dict(self) -> dict:
        return {
            "t": [float(t) for t in self.ts],
            "values": [float(v) for v in self.values],
            "jumps": [[float(a), float(b)] for a, b in self.jumps],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StepFunction":
        return cls(np.asarray(d["t"], dtype=float), np.asarray(d["values"], dtype=float),
                   tuple((float(a), float(b)) for a, b in d.get("jumps", [])))


@dataclass
class EstimateSet:
    n: int
    delta: float
    atom_spacing: float
    lambda_hat: float
    gamma_hat: float
    q_hat: dict[int, float]
    q_total_hat: float
    p_hat: dict[int, float]
    p_total_hat: float
    N_hat: StepFunction
    F_hat: StepFunction
    diagnostics: dict = field(default_factory=dict)
    hyperparameters: dict = field(default_factory=dict)


def naive_lambda(sample, delta: float | None = None, gamma_hint: float = 0.0) -> float | None:
    """-log(fraction of increments equal to gamma*delta) / delta, or None if no such increment."""
    z = np.asarray(getattr(sample, "values", sample), dtype=float)
    if delta is None:
        delta = sample.delta
    target = gamma_hint * delta
    frac = np.mean(np.abs(z - target) <= 1e-12 * max(1.0, abs(target)))
    if frac == 0:
        return None
    return -math.log(frac) / delta


def default_kappa(sample: IncrementSample, gamma_hint: float | None) -> float:
    """Safety threshold on |phi_n| below which the estimate is refused."""
    lam = naive_lambda(sample, sample.delta, 0.0 if gamma_hint is None else gamma_hint)
    if lam is None:
        return 1e-4
    return 0.5 * math.exp(-2.0 * lam * sample.delta)


@lru_cache(maxsize=16)
def _prepared(config: SpectralConfig, n: int, atom_spacing: float, delta: float):
    bw = config.bandwidths(n, atom_spacing)
    grid = config.grid(bw)
    base = grid.simpson_weights * config.kernel.ft(bw.h * grid.u) / (2 * math.pi * delta)
    base.setflags(write=False)
    return bw, grid, base


class SpectralFit:
    """Distinguished log of the ECF on the frequency grid, ready for integration.

    Every estimator is a linear functional of the log path, so one fit serves
    all of them.
    """

    def __init__(self, logvals: np.ndarray, n: int, delta: float, atom_spacing: float,
                 config: SpectralConfig, phi: np.ndarray | None = None, kappa: float | None = None,
                 grid: FrequencyGrid | None = None):
        self.n = int(n)
        self.delta = float(delta)
        self.atom_spacing = float(atom_spacing)
        self.config = config
        self.bw, default_grid, base = _prepared(config, self.n, self.atom_spacing, self.delta)
        if grid is not None and grid != default_grid:
            base = grid.simpson_weights * config.kernel.ft(self.bw.h * grid.u) / (2 * math.pi * delta)
        self.grid = grid or default_grid
        self.logvals = logvals
        self.phi = phi
        self.kappa = kappa
        self._weighted = logvals * base
        self._cache: dict = {}

    @classmethod
    def from_sample(cls, sample: IncrementSample, config: SpectralConfig | None = None,
                    atom_spacing: float = 1.0, grid: FrequencyGrid | None = None) -> "SpectralFit":
        config = config or SpectralConfig()
        bw, default_grid, _ = _prepared(config, sample.n, float(atom_spacing), float(sample.delta))
        grid = grid or default_grid
        kappa = config.kappa if config.kappa is not None else default_kappa(sample, config.gamma_hint)
        phi = ecf(sample.values, grid.u)
        logvals = distinguished_log(phi, kappa, grid.center)
        return cls(logvals, sample.n, sample.delta, atom_spacing, config, phi, kappa, grid)

    @classmethod
    def from_log_path(cls, log_fn, n: int, delta: float, atom_spacing: float = 1.0,
                      config: SpectralConfig | None = None) -> "SpectralFit":
        """Fit from a known log-characteristic function (oracle injection)."""
        config = config or SpectralConfig()
        _, grid, _ = _prepared(config, int(n), float(atom_spacing), float(delta))
        return cls(np.asarray(log_fn(grid.u), dtype=complex), n, delta, atom_spacing, config)

    # core functionals

    def integrate(self, ft_f) -> float:
        return integrate_weighted(ft_f, self._weighted)

    def _weight(self, kind: str, **kw) -> np.ndarray:
        return weight_transform(kind, self.bw, self.grid.u, kernel=self.config.kernel, **kw)

    def lambda_hat(self) -> float:
        if "lambda" not in self._cache:
            self._cache["lambda"] = self.integrate(self._weight("lambda"))
        return self._cache["lambda"]

    def gamma_hat(self) -> float:
        return self.integrate(self._weight("gamma"))

    def qj_hat(self, j: int) -> float:
        j = int(j)
        if j == 0 or abs(j) > self.bw.j_window:
            raise IndexOutOfWindow(f"atom index {j} outside window 0 < |j| <= {self.bw.j_window}")
        return self._qj(j)

    def _qj(self, j: int) -> float:
        key = ("q", j)
        if key not in self._cache:
            self._cache[key] = self.integrate(self._weight("qj", j=j))
        return self._cache[key]

    def q_hats(self) -> dict[int, float]:
        J = self.bw.j_window
        return {j: self._qj(j) for j in range(-J, J + 1) if j != 0}

    def q_total_hat(self) -> float:
        return math.fsum(self.q_hats().values())

    def N_hat_at(self, t: float) -> float:
        if math.isinf(t):
            return self.lambda_hat() if t > 0 else 0.0
        return self.integrate(self._weight("N", t=float(t)))

    def N_hat(self, ts) -> StepFunction:
        ts = np.asarray(ts, dtype=float)
        if ts.size > 1 and np.any(np.diff(ts) < 0):
            raise ConfigurationError("evaluation points must be sorted")
        vals = np.array([self.N_hat_at(t) for t in ts])
        return StepFunction(ts, vals, self._jumps(ts))

    def _jumps(self, ts) -> tuple[tuple[float, float], ...]:
        if ts.size == 0:
            return ()
        eps = self.atom_spacing
        lo = max(math.ceil(ts[0] / eps), -math.floor(self.bw.H / eps))
        hi = min(math.floor(ts[-1] / eps), math.floor(self.bw.H / eps))
        return tuple((eps * j, self._qj(j)) for j in range(lo, hi + 1) if j != 0)

    def F_hat(self, ts, isotonic: bool = False) -> StepFunction:
        """N_hat / lambda_hat, raw by default.

        With isotonic=True the grid values are projected onto nondecreasing
        sequences in [0, 1] (least squares); jump markers stay raw.
        """
        lam = self.lambda_hat()
        if abs(lam) < RATIO_FLOOR:
            raise DivisionByNearZero(f"lambda_hat={lam:.3g} too small to rescale N_hat")
        N = self.N_hat(ts)
        values = N.values / lam
        if isotonic and values.size:
            values = np.clip(isotonic_regression(values).x, 0.0, 1.0)
        return StepFunction(N.ts, values, tuple((a, b / lam) for a, b in N.jumps))

    def p_hats(self) -> tuple[dict[int, float], float]:
        lam = self.lambda_hat()
        if abs(lam) < RATIO_FLOOR:
            raise DivisionByNearZero(f"lambda_hat={lam:.3g} too small to rescale q_hat")
        q = self.q_hats()
        return {j: v / lam for j, v in q.items()}, self.q_total_hat() / lam

    def remainder_proxy(self) -> float | None:
        """sup |phi_n / phi_fit - 1| over |u| <= 1/h for the fitted lattice model."""
        if self.phi is None:
            return None
        u = self.grid.u
        inside = np.abs(u) <= 1.0 / self.bw.h
        uu = u[inside]
        expo = 1j * self.gamma_hat() * uu - self.lambda_hat()
        for j, q in self.q_hats().items():
            expo = expo + q * np.exp(1j * uu * self.atom_spacing * j)
        fit = np.exp(self.delta * expo)
        return float(np.max(np.abs(self.phi[inside] / fit - 1.0)))

    def estimate_set(self, ts) -> EstimateSet:
        lam = self.lambda_hat()
        q = self.q_hats()
        q_total = math.fsum(q.values())
        N = self.N_hat(ts)
        if abs(lam) < RATIO_FLOOR:
            raise DivisionByNearZero(f"lambda_hat={lam:.3g} too small to rescale")
        F = StepFunction(N.ts, N.values / lam, tuple((a, b / lam) for a, b in N.jumps))
        diagnostics = {
            "remainder_proxy": self.remainder_proxy(),
            "kappa": self.kappa,
            "kappa_margin": None if self.phi is None else float(np.min(np.abs(self.phi)) - (self.kappa or 0.0)),
            "grid_points": int(self.grid.size),
            "grid_step": float(self.grid.step),
            "regimes": self.config.regimes(),
        }
        return EstimateSet(
            n=self.n, delta=self.delta, atom_spacing=self.atom_spacing,
            lambda_hat=lam, gamma_hat=self.gamma_hat(), q_hat=q, q_total_hat=q_total,
            p_hat={j: v / lam for j, v in q.items()}, p_total_hat=q_total / lam,
            N_hat=N, F_hat=F, diagnostics=diagnostics, hyperparameters=self.bw.as_dict(),
        )


def _fit(sample, config, atom_spacing) -> SpectralFit:
    return SpectralFit.from_sample(sample, config, atom_spacing)


def estimate_lambda(sample, config=None, atom_spacing: float = 1.0) -> float:
    return _fit(sample, config, atom_spacing).lambda_hat()


def estimate_gamma(sample, config=None, atom_spacing: float = 1.0) -> float:
    return _fit(sample, config, atom_spacing).gamma_hat()


def estimate_qj(sample, config=None, j: int = 1, atom_spacing: float = 1.0) -> float:
    return _fit(sample, config, atom_spacing).qj_hat(j)


def estimate_q(sample, config=None, atom_spacing: float = 1.0) -> float:
    return _fit(sample, config, atom_spacing).q_total_hat()


def estimate_N(sample, config=None, ts=(), atom_spacing: float = 1.0) -> StepFunction:
    return _fit(sample, config, atom_spacing).N_hat(ts)


def estimate_F(sample, config=None, ts=(), atom_spacing: float = 1.0,
               isotonic: bool = False) -> StepFunction:
    return _fit(sample, config, atom_spacing).F_hat(ts, isotonic)


def estimate_p(sample, config=None, atom_spacing: float = 1.0) -> tuple[dict[int, float], float]:
    return _fit(sample, config, atom_spacing).p_hats()


def estimate_all(sample, config=None, ts=(), atom_spacing: float = 1.0) -> EstimateSet:
    return _fit(sample, config, atom_spacing).estimate_set(ts)
