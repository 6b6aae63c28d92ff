"""Frequency-domain machinery shared by every estimator.

All estimators have the form

    (1 / (2 pi delta)) * int  Ff(-u) * Log phi_n(u) * FK(h u)  du,

evaluated by composite Simpson quadrature on a symmetric uniform grid.  This
module provides the band-limited kernel, the grid, the hyperparameter
schedules, the empirical characteristic function, the distinguished logarithm
and closed-form Fourier transforms of the weight functions.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    BranchAmbiguity,
    ConfigurationError,
    KernelDegenerate,
    PhaseJump,
    SymmetryViolation,
)

__all__ = [
    "KernelSpec",
    "FrequencyGrid",
    "SpectralConfig",
    "Bandwidths",
    "ecf",
    "distinguished_log",
    "interval_ft",
    "weight_transform",
    "spectral_integral",
    "N_window_end",
]

SYMMETRY_TOL = 1e-8
PHASE_STEP_LIMIT = 0.5


@dataclass(frozen=True)
class KernelSpec:
    """Flat-top band-limited kernel.

    FK(u) = 1 on |u| <= u0, a quintic C^2 smoothstep down to 0 on [u0, 1],
    and 0 for |u| >= 1.
    """

    u0: float = 0.5
    quad_nodes: int = 512

    def __post_init__(self):
        if not 0 < self.u0 < 1:
            raise ConfigurationError("kernel taper start u0 must lie in (0, 1)")
        if abs(self.c) < 1e-6:
            raise KernelDegenerate(f"kernel constant c={self.c:.3g} is numerically zero")

    def ft(self, u) -> np.ndarray:
        a = np.abs(np.asarray(u, dtype=float))
        t = np.clip((a - self.u0) / (1.0 - self.u0), 0.0, 1.0)
        return np.where(a >= 1.0, 0.0, 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t))

    @cached_property
    def _taper_rule(self) -> tuple[np.ndarray, np.ndarray]:
        g, w = np.polynomial.legendre.leggauss(self.quad_nodes)
        half = 0.5 * (1.0 - self.u0)
        return self.u0 + half * (g + 1.0), half * w

    def K(self, x) -> np.ndarray:
        """Space-domain kernel by numerical Fourier inversion of FK."""
        x = np.asarray(x, dtype=float)
        flat = np.abs(x.ravel())
        u, w = self._taper_rule
        fw = w * self.ft(u)
        with np.errstate(invalid="ignore", divide="ignore"):
            head = np.where(flat == 0, self.u0, np.sin(self.u0 * flat) / np.where(flat == 0, 1.0, flat))
        out = np.empty_like(flat)
        for lo in range(0, flat.size, 2048):
            out[lo : lo + 2048] = np.cos(np.outer(flat[lo : lo + 2048], u)) @ fw
        return ((head + out) / math.pi).reshape(x.shape)

    def integral_0_to(self, x: float) -> float:
        """int_0^x K."""
        u, w = self._taper_rule
        head = _si(self.u0 * x)
        tail = float(np.sum(w * self.ft(u) * np.sin(u * x) / u))
        return (head + tail) / math.pi

    @cached_property
    def c(self) -> float:
        """c = 2 (int_0^1 K - K(1))."""
        return 2.0 * (self.integral_0_to(1.0) - float(self.K(1.0)))


def _si(x: float) -> float:
    from scipy.special import sici

    return float(sici(x)[0])


@dataclass(frozen=True)
class FrequencyGrid:
    """Symmetric grid u_k = step * k, k = -m..m (odd point count, contains 0)."""

    step: float
    m: int

    @classmethod
    def covering(cls, u_max: float, step: float) -> "FrequencyGrid":
        return cls(step, int(math.ceil(u_max / step - 1e-12)))

    @cached_property
    def u(self) -> np.ndarray:
        u = self.step * np.arange(-self.m, self.m + 1, dtype=float)
        u.setflags(write=False)
        return u

    @property
    def size(self) -> int:
        return 2 * self.m + 1

    @property
    def center(self) -> int:
        return self.m

    @cached_property
    def simpson_weights(self) -> np.ndarray:
        w = np.full(self.size, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        w *= self.step / 3.0
        w.setflags(write=False)
        return w

    def halved(self) -> "FrequencyGrid":
        return FrequencyGrid(self.step / 2.0, 2 * self.m)


@dataclass(frozen=True)
class Bandwidths:
    """Hyperparameters at a given sample size, in space units."""

    n: int
    atom_spacing: float
    h: float
    eps_n: float
    H: float
    H_tilde: float

    @property
    def j_window(self) -> int:
        """Largest |j| entering the total discrete-mass estimator."""
        return int(math.floor(self.H_tilde / self.atom_spacing + 1e-12))

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SpectralConfig:
    """Schedules h_n = c_h e^{-n^th_h}, eps_n = c_eps e^{-n^th_eps},
    H_n = c_H e^{n^th_H}, H~_n = c_Ht n^th_Ht (all lengths in units of the
    atom spacing), plus kernel and quadrature settings."""

    theta_h: float = 0.20
    theta_eps: float = 0.10
    theta_H: float = 0.15
    theta_Htilde: float = 0.25
    c_h: float = 0.5
    c_eps: float = 2.5
    c_H: float = 1.0
    c_Htilde: float = 1.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    oversampling: int = 16
    kappa: float | None = None
    gamma_hint: float | None = None

    def __post_init__(self):
        if not (2 * self.theta_eps <= self.theta_h < 0.25):
            raise ConfigurationError("need 2*theta_eps <= theta_h < 1/4")
        if not (0 < self.theta_H < self.theta_h):
            raise ConfigurationError("need 0 < theta_H < theta_h")
        if not (0 < self.theta_Htilde < 0.5):
            raise ConfigurationError("need 0 < theta_Htilde < 1/2")
        if min(self.c_h, self.c_eps, self.c_H, self.c_Htilde) <= 0:
            raise ConfigurationError("schedule constants must be positive")
        if self.oversampling < 4:
            raise ConfigurationError("oversampling must be at least 4 points per period")

    def regimes(self, alpha: float | None = None, beta: float | None = None) -> dict:
        """Which of the two admissible hyperparameter regimes hold."""
        base = 2 * self.theta_eps <= self.theta_h < 0.25 and self.theta_H < self.theta_h
        if alpha is not None:
            base = base and 1.0 / alpha < 2 * self.theta_eps
        # (a): finitely many atoms weighted, tail exponent beta controls H_n
        a = base and (beta is None or 1.0 / (2 * beta) <= self.theta_H)
        # (b): all atoms weighted up to the window H_tilde ~ n^theta_Htilde
        b = base and self.theta_Htilde < 0.5 and self.theta_h < (1 - 2 * self.theta_Htilde) / 4
        if beta is not None:
            b = b and self.theta_Htilde >= 1.0 / (2 * beta)
        if alpha is not None:
            b = b and 1.0 / alpha < self.theta_eps
            if beta is not None and beta > 1:
                b = b and alpha > 8 * beta / (beta - 1)
        return {"regime_a": bool(a), "regime_b": bool(b)}

    def bandwidths(self, n: int, atom_spacing: float = 1.0) -> Bandwidths:
        eps = atom_spacing
        h = eps * self.c_h * math.exp(-(n ** self.theta_h))
        eps_n = eps * self.c_eps * math.exp(-(n ** self.theta_eps))
        H_raw = eps * self.c_H * math.exp(n ** self.theta_H)
        # |H - eps j| > eps_n for all j: snap to a lattice midpoint
        H = eps * (math.floor(H_raw / eps) + 0.5)
        H_tilde = eps * self.c_Htilde * n ** self.theta_Htilde
        if not eps_n < eps / 2:
            raise ConfigurationError(
                f"eps_n={eps_n:.3g} must be below half the atom spacing at n={n}; "
                "increase n or lower c_eps")
        if not h < eps_n:
            raise ConfigurationError(f"bandwidth h={h:.3g} must be below eps_n={eps_n:.3g}")
        if not H_tilde < H:
            raise ConfigurationError(f"H_tilde={H_tilde:.3g} must be below H={H:.3g}")
        return Bandwidths(n, atom_spacing, h, eps_n, H, H_tilde)

    def grid(self, bw: Bandwidths) -> FrequencyGrid:
        # oversampling points per period of e^{iu(H + eps_n)}
        step = 2 * math.pi / (self.oversampling * (bw.H + bw.eps_n))
        return FrequencyGrid.covering(1.0 / bw.h, step)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kernel"] = {"u0": self.kernel.u0, "quad_nodes": self.kernel.quad_nodes}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralConfig":
        d = dict(d)
        kernel = d.pop("kernel", None) or {}
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown spectral config fields: {sorted(unknown)}")
        return cls(kernel=KernelSpec(**kernel), **d)


def ecf(values, u) -> np.ndarray:
    """phi_n(u) = mean_k exp(i u Z_k), summed directly over distinct values."""
    values = np.asarray(getattr(values, "values", values), dtype=float)
    u = np.asarray(getattr(u, "u", u), dtype=float)
    uniq, counts = np.unique(values, return_counts=True)
    weights = counts / values.size
    out = np.empty(u.shape, dtype=complex)
    flat_u = u.ravel()
    flat = out.ravel()
    chunk = max(1, int(4_000_000 // max(uniq.size, 1)))
    for lo in range(0, flat_u.size, chunk):
        flat[lo : lo + chunk] = np.exp(1j * np.outer(flat_u[lo : lo + chunk], uniq)) @ weights
    out = flat.reshape(u.shape)
    out[u == 0] = 1.0
    return out


def _unwrap_from_origin(v: np.ndarray) -> np.ndarray:
    """Continuous argument along v starting at v[0] (principal arg at start)."""
    ratio = v[1:] / v[:-1]
    if ratio.size and np.max(np.abs(ratio - 1.0)) > PHASE_STEP_LIMIT:
        k = int(np.argmax(np.abs(ratio - 1.0)))
        raise PhaseJump(f"successive ECF ratio deviates by {abs(ratio[k] - 1):.3g} at grid step {k}")
    steps = np.angle(ratio)
    cont = np.angle(v[0]) + np.concatenate([[0.0], np.cumsum(steps)])
    principal = np.angle(v)
    # snap to principal angle + 2 pi k so exp(L) reproduces v to rounding
    return principal + 2 * np.pi * np.round((cont - principal) / (2 * np.pi))


def distinguished_log(values, kappa: float = 0.0, center: int | None = None) -> np.ndarray:
    """Continuous complex logarithm of ECF values on a symmetric grid.

    The phase is unwrapped outward from the centre point (u = 0) in both
    directions.  Raises BranchAmbiguity if |values| < kappa anywhere and
    PhaseJump if neighbouring values are too far apart to track the branch.
    """
    v = np.asarray(values, dtype=complex)
    if center is None:
        center = v.size // 2
    mod = np.abs(v)
    if np.min(mod) < kappa or np.min(mod) == 0:
        k = int(np.argmin(mod))
        raise BranchAmbiguity(f"|phi_n| = {mod[k]:.3g} below threshold {kappa:.3g} at grid index {k}")
    arg = np.empty(v.size)
    arg[center:] = _unwrap_from_origin(v[center:])
    arg[: center + 1] = _unwrap_from_origin(v[center::-1])[::-1]
    out = np.log(mod) + 1j * arg
    out[center] = 0.0  # phi_n(0) = 1 exactly; drop the rounding in |v|
    return out


def interval_ft(a: float, b: float, u: np.ndarray) -> np.ndarray:
    """int_a^b exp(-i u x) dx, i.e. F[1_[a,b]](-u)."""
    c = 0.5 * (a + b)
    w = 0.5 * (b - a)
    return (b - a) * np.exp(-1j * u * c) * np.sinc(u * w / np.pi)


def _odd_linear_ft(h: float, u: np.ndarray) -> np.ndarray:
    """int_{-h}^{h} x exp(-i u x) dx = -2i (sin(uh) - uh cos(uh)) / u^2."""
    y = u * h
    small = np.abs(y) < 1e-3
    ys = np.where(small, 1.0, y)
    g = np.where(small, y / 3.0 - y ** 3 / 30.0, (np.sin(ys) - ys * np.cos(ys)) / ys ** 2)
    return -2j * h * h * g


def N_window_end(t: float, bw: Bandwidths) -> float:
    """Upper end T of the effective half-line (-inf, T] used by N-hat at t."""
    eps = bw.atom_spacing
    j = round(t / eps) if math.isfinite(t) else 0
    if math.isfinite(t) and abs(t - eps * j) <= bw.eps_n:
        return eps * j - bw.eps_n if t < eps * j else eps * j + bw.eps_n
    return t


def weight_transform(kind: str, bw: Bandwidths, u, *, j: int | None = None,
                     t: float | None = None, kernel: KernelSpec | None = None) -> np.ndarray:
    """F f(-u) for the estimator weights.

    kind is one of 'lambda', 'gamma', 'qj', 'q', 'N'.
    """
    u = np.asarray(getattr(u, "u", u), dtype=float)
    H, e = bw.H, bw.eps_n
    if kind == "lambda":
        return interval_ft(-H, -e, u) + interval_ft(e, H, u)
    if kind == "gamma":
        kernel = kernel or KernelSpec()
        return _odd_linear_ft(bw.h, u) / kernel.c
    if kind == "qj":
        if j is None or j == 0:
            raise ConfigurationError("qj weight needs a nonzero lattice index")
        x = bw.atom_spacing * j
        return interval_ft(x - e, x + e, u)
    if kind == "q":
        out = np.zeros(u.shape, dtype=complex)
        for jj in range(1, bw.j_window + 1):
            for s in (jj, -jj):
                out += weight_transform("qj", bw, u, j=s)
        return out
    if kind == "N":
        if t is None:
            raise ConfigurationError("N weight needs an evaluation point t")
        T = N_window_end(t, bw)
        if T >= H:
            return weight_transform("lambda", bw, u)
        out = np.zeros(u.shape, dtype=complex)
        if T > -H:
            out += interval_ft(-H, min(T, -e), u)
        if T > e:
            out += interval_ft(e, T, u)
        return out
    raise ConfigurationError(f"unknown weight kind {kind!r}")


def spectral_integral(ft_f, logvals, kernel: KernelSpec, h: float, delta: float,
                      grid: FrequencyGrid) -> float:
    """(1 / (2 pi delta)) int Ff(-u) L(u) FK(h u) du by composite Simpson."""
    w = grid.simpson_weights * kernel.ft(h * grid.u) / (2 * math.pi * delta)
    return integrate_weighted(ft_f, np.asarray(logvals) * w)


def integrate_weighted(ft_f, weighted_log) -> float:
    terms = ft_f * weighted_log
    total = terms.sum()
    scale = np.abs(terms).sum()
    if abs(total.imag) > SYMMETRY_TOL * scale:
        raise SymmetryViolation(
            f"imaginary residual {total.imag:.3g} exceeds tolerance (scale {scale:.3g})")
    return float(total.real)
