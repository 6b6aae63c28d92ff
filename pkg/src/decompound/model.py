"""Compound Poisson model: Levy triple, characteristic function, simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import AssumptionViolation, ConfigurationError
from .measure import DEFAULT_REFINE, SignedMeasure

__all__ = [
    "ACDensity",
    "LevyTriple",
    "IncrementSample",
    "AssumptionReport",
    "char_fn",
    "true_N",
    "true_F",
    "simulate",
    "validate_assumptions",
]

MASS_TOL = 1e-10


@dataclass(frozen=True)
class ACDensity:
    """Gridded density: node ``i`` sits at ``grid_origin + i * step`` and carries
    mass ``step * values[i]`` spread uniformly over its cell."""

    grid_origin: float
    step: float
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.step > 0:
            raise ConfigurationError("ac step must be positive")

    @classmethod
    def from_function(cls, f, a: float, b: float, step: float) -> "ACDensity":
        """Sample ``f`` on [a, b] with trapezoid end weights."""
        m = round((b - a) / step)
        x = a + step * np.arange(m + 1)
        v = np.asarray(f(x), dtype=float)
        v[0] *= 0.5
        v[-1] *= 0.5
        return cls(a, step, tuple(v))

    @property
    def mass(self) -> float:
        return self.step * math.fsum(self.values)

    def scaled(self, c: float) -> "ACDensity":
        return ACDensity(self.grid_origin, self.step, tuple(c * v for v in self.values))


@dataclass(frozen=True)
class LevyTriple:
    gamma: float
    lambda_: float
    atom_spacing: float = 1.0
    discrete_weights: Mapping[int, float] = field(default_factory=dict)
    ac_density: ACDensity | None = None
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "discrete_weights",
                           {int(j): float(q) for j, q in sorted(self.discrete_weights.items()) if q != 0})
        if not self.atom_spacing > 0:
            raise ConfigurationError("atom_spacing must be positive")
        if self.ac_density is not None:
            r = self.atom_spacing / self.ac_density.step
            o = self.ac_density.grid_origin / self.ac_density.step
            if abs(r - round(r)) > 1e-9 * r or abs(o - round(o)) > 1e-6:
                raise ConfigurationError(
                    "ac grid must satisfy step = atom_spacing / integer and origin on the step grid")
        if self.check:
            report = validate_assumptions(self)
            if not report.ok:
                raise AssumptionViolation("; ".join(report.failures))

    @property
    def refine(self) -> int:
        if self.ac_density is None:
            return DEFAULT_REFINE
        return int(round(self.atom_spacing / self.ac_density.step))

    @property
    def q_total(self) -> float:
        return math.fsum(self.discrete_weights.values())

    @property
    def p_total(self) -> float:
        return self.q_total / self.lambda_

    def p(self, j: int) -> float:
        return self.discrete_weights.get(int(j), 0.0) / self.lambda_

    def q(self, j: int) -> float:
        return self.discrete_weights.get(int(j), 0.0)

    def levy_measure(self) -> SignedMeasure:
        """nu as a SignedMeasure in the zero-drift frame."""
        R = self.refine
        m = SignedMeasure.from_atoms(self.discrete_weights, self.atom_spacing, R)
        if self.ac_density is not None and self.ac_density.values:
            start = int(round(self.ac_density.grid_origin / self.ac_density.step))
            m = m + SignedMeasure.from_density(self.ac_density.values, start, self.atom_spacing, R)
        return m

    def fourier_levy(self, u) -> np.ndarray:
        """int e^{iux} nu(dx) (cells of the AC part integrated exactly)."""
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape, dtype=complex)
        for j, q in self.discrete_weights.items():
            out += q * np.exp(1j * u * (self.atom_spacing * j))
        ac = self.ac_density
        if ac is not None and ac.values:
            x = ac.grid_origin + ac.step * np.arange(len(ac.values))
            w = ac.step * np.asarray(ac.values)
            flat = u.ravel()
            acc = np.zeros(flat.shape, dtype=complex)
            for lo in range(0, flat.size, 4096):
                uu = flat[lo : lo + 4096]
                acc[lo : lo + 4096] = np.exp(1j * np.outer(uu, x)) @ w
            out += acc.reshape(u.shape) * np.sinc(u * ac.step / (2 * np.pi))
        return out

    def with_drift(self, gamma: float) -> "LevyTriple":
        return LevyTriple(gamma, self.lambda_, self.atom_spacing, self.discrete_weights,
                          self.ac_density, self.check)


@dataclass(frozen=True)
class IncrementSample:
    delta: float
    values: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ConfigurationError("an increment sample needs at least one value")
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("increments must be finite")
        if not self.delta > 0:
            raise ConfigurationError("delta must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size


def char_fn(triple: LevyTriple, delta: float, u) -> np.ndarray:
    """phi(u) = exp(delta (i gamma u + F nu(u) - lambda)); scalar in, scalar out."""
    u_arr = np.asarray(u, dtype=float)
    val = np.exp(delta * (1j * triple.gamma * u_arr + triple.fourier_levy(u_arr) - triple.lambda_))
    return val if u_arr.ndim else complex(val)


def log_char_fn(triple: LevyTriple, delta: float, u) -> np.ndarray:
    """The distinguished logarithm of phi, available in closed form."""
    u = np.asarray(u, dtype=float)
    return delta * (1j * triple.gamma * u + triple.fourier_levy(u) - triple.lambda_)


def true_N(triple: LevyTriple, t) -> np.ndarray:
    t_arr = np.asarray(t, dtype=float)
    out = triple.levy_measure().cdf(np.clip(t_arr, -1e300, 1e300))
    out = np.where(np.isposinf(t_arr), triple.lambda_, np.where(np.isneginf(t_arr), 0.0, out))
    return out if t_arr.ndim else float(out)


def true_F(triple: LevyTriple, t) -> np.ndarray:
    return true_N(triple, t) / triple.lambda_


def simulate(triple: LevyTriple, delta: float, n: int, seed: int) -> IncrementSample:
    """Draw n iid increments Z_k = gamma*delta + sum_{i<=M_k} Y_i, M_k ~ Poisson(lambda*delta)."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    rng = np.random.default_rng(seed)
    counts = rng.poisson(triple.lambda_ * delta, size=n)
    total = int(counts.sum())
    owner = np.repeat(np.arange(n), counts)
    int_part = np.zeros(n)
    ac_part = np.zeros(n)
    if total:
        is_discrete = rng.random(total) < triple.p_total
        nd = int(is_discrete.sum())
        if nd:
            js = np.array(list(triple.discrete_weights), dtype=np.int64)
            probs = np.array(list(triple.discrete_weights.values()))
            draws = js[rng.choice(js.size, size=nd, p=probs / probs.sum())]
            int_part = np.bincount(owner[is_discrete], weights=draws.astype(float), minlength=n)
        na = total - nd
        if na:
            ac_part = np.bincount(owner[~is_discrete], weights=_sample_ac(triple.ac_density, na, rng),
                                  minlength=n)
    values = triple.gamma * delta + (triple.atom_spacing * int_part + ac_part)
    return IncrementSample(delta, values, seed)


def _sample_ac(ac: ACDensity | None, size: int, rng: np.random.Generator) -> np.ndarray:
    if ac is None or ac.mass <= 0:
        raise ConfigurationError("model has no absolutely continuous part to sample from")
    w = np.asarray(ac.values)
    cdf = np.cumsum(w) / w.sum()
    cell = np.searchsorted(cdf, rng.random(size), side="right")
    cell = np.minimum(cell, w.size - 1)
    return ac.grid_origin + ac.step * (cell - 0.5 + rng.random(size))


@dataclass(frozen=True)
class AssumptionReport:
    checks: dict
    log_moment: float
    failures: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.failures


def validate_assumptions(triple: LevyTriple, alpha: float = 5.0, beta: float = 3.0) -> AssumptionReport:
    """Check the structural assumptions on nu clause by clause."""
    failures = []
    q = triple.discrete_weights
    ac = triple.ac_density
    ac_mass = ac.mass if ac is not None else 0.0
    checks = {
        "positive_intensity": triple.lambda_ > 0,
        "origin_atom": 0 not in q,
        "nonnegative_weights": all(v >= 0 for v in q.values()) and all(q_j <= triple.lambda_ * (1 + MASS_TOL) for q_j in q.values()),
        "nonnegative_density": ac is None or min(ac.values, default=0.0) >= 0,
        "mass_condition": abs(math.fsum(q.values()) + ac_mass - triple.lambda_) <= MASS_TOL * max(1.0, triple.lambda_),
        "alpha": alpha > 4,
        "beta": beta > 2,
    }
    log_moment = math.fsum(v * math.log(max(abs(triple.atom_spacing * j), math.e)) ** beta for j, v in q.items())
    if ac is not None and ac.values:
        x = ac.grid_origin + ac.step * np.arange(len(ac.values))
        log_moment += float(ac.step * np.sum(np.asarray(ac.values) * np.log(np.maximum(np.abs(x), math.e)) ** beta))
    checks["log_moment"] = bool(np.isfinite(log_moment))
    messages = {
        "positive_intensity": "intensity must be positive",
        "origin_atom": "origin atom: nu must not charge 0",
        "nonnegative_weights": "atom weights must lie in [0, lambda]",
        "nonnegative_density": "ac density must be nonnegative",
        "mass_condition": "mass condition: sum q_j + int nu_ac must equal lambda",
        "alpha": "alpha must exceed 4",
        "beta": "beta must exceed 2",
        "log_moment": "log-moment of nu is not finite",
    }
    failures = tuple(messages[k] for k, ok in checks.items() if not ok)
    return AssumptionReport(checks, log_moment, failures)
