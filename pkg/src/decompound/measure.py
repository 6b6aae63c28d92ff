"""Finite signed measures on the real line: lattice atoms plus a gridded density.

Atoms live at ``shift + atom_spacing * j`` for integer ``j``.  The absolutely
continuous part is stored as node values on the finer grid
``shift + dx * i`` with ``dx = atom_spacing / refine``; node ``i`` carries mass
``dx * values[i]`` spread uniformly over the cell ``[x_i - dx/2, x_i + dx/2]``.
With this convention convolution by discrete convolution preserves mass
exactly and atoms stay aligned with density nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import signal

from .errors import ConfigurationError

__all__ = [
    "SignedMeasure",
    "CumulativeTable",
    "convolve",
    "reflect",
    "conv_exp",
    "cumulative",
    "total_variation",
    "mass",
    "tv_distance",
]

DEFAULT_REFINE = 64
_PRUNE_REL = 1e-15
_EMPTY = np.zeros(0)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _trim(start: int, values: np.ndarray) -> tuple[int, np.ndarray]:
    nz = np.flatnonzero(values)
    if nz.size == 0:
        return 0, _EMPTY
    return start + int(nz[0]), values[nz[0] : nz[-1] + 1]


def _add_dense(s1: int, v1: np.ndarray, s2: int, v2: np.ndarray) -> tuple[int, np.ndarray]:
    if v1.size == 0:
        return s2, v2.copy()
    if v2.size == 0:
        return s1, v1.copy()
    start = min(s1, s2)
    stop = max(s1 + v1.size, s2 + v2.size)
    out = np.zeros(stop - start)
    out[s1 - start : s1 - start + v1.size] += v1
    out[s2 - start : s2 - start + v2.size] += v2
    return start, out


@dataclass(frozen=True, eq=False)
class SignedMeasure:
    atom_spacing: float
    atom_start: int = 0
    atom_masses: np.ndarray = field(default_factory=lambda: _EMPTY)
    density_start: int = 0
    density_values: np.ndarray = field(default_factory=lambda: _EMPTY)
    refine: int = DEFAULT_REFINE
    shift: float = 0.0

    def __post_init__(self):
        if not self.atom_spacing > 0:
            raise ConfigurationError("atom_spacing must be positive")
        if int(self.refine) != self.refine or self.refine < 1:
            raise ConfigurationError("refine must be a positive integer")
        a_start, a = _trim(int(self.atom_start), np.asarray(self.atom_masses, dtype=float))
        d_start, d = _trim(int(self.density_start), np.asarray(self.density_values, dtype=float))
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(d))):
            raise ConfigurationError("measure contains non-finite values")
        object.__setattr__(self, "atom_start", a_start)
        object.__setattr__(self, "atom_masses", _frozen(a))
        object.__setattr__(self, "density_start", d_start)
        object.__setattr__(self, "density_values", _frozen(d))
        object.__setattr__(self, "refine", int(self.refine))
        object.__setattr__(self, "shift", float(self.shift))

    # construction helpers

    @classmethod
    def zero(cls, atom_spacing: float = 1.0, refine: int = DEFAULT_REFINE, shift: float = 0.0):
        return cls(atom_spacing, refine=refine, shift=shift)

    @classmethod
    def from_atoms(cls, atoms: Mapping[int, float], atom_spacing: float = 1.0,
                   refine: int = DEFAULT_REFINE, shift: float = 0.0) -> "SignedMeasure":
        atoms = {int(j): float(m) for j, m in atoms.items() if m != 0}
        if not atoms:
            return cls.zero(atom_spacing, refine, shift)
        lo, hi = min(atoms), max(atoms)
        dense = np.zeros(hi - lo + 1)
        for j, m in atoms.items():
            dense[j - lo] += m
        return cls(atom_spacing, lo, dense, refine=refine, shift=shift)

    @classmethod
    def dirac(cls, j: int = 0, mass: float = 1.0, atom_spacing: float = 1.0,
              refine: int = DEFAULT_REFINE) -> "SignedMeasure":
        return cls.from_atoms({j: mass}, atom_spacing, refine)

    @classmethod
    def from_density(cls, values, start: int, atom_spacing: float = 1.0,
                     refine: int = DEFAULT_REFINE, shift: float = 0.0) -> "SignedMeasure":
        """Density node values on ``shift + dx * (start + i)``."""
        return cls(atom_spacing, density_start=start, density_values=values,
                   refine=refine, shift=shift)

    @classmethod
    def uniform(cls, a: float, b: float, total: float = 1.0, atom_spacing: float = 1.0,
                refine: int = DEFAULT_REFINE) -> "SignedMeasure":
        """Uniform density of mass ``total`` on [a, b]; a and b must lie on the dx grid."""
        dx = atom_spacing / refine
        ia, ib = round(a / dx), round(b / dx)
        if abs(ia * dx - a) > 1e-9 * dx or abs(ib * dx - b) > 1e-9 * dx or ib <= ia:
            raise ConfigurationError("uniform endpoints must lie on the density grid")
        v = np.full(ib - ia + 1, total / (b - a))
        v[0] *= 0.5
        v[-1] *= 0.5
        return cls.from_density(v, ia, atom_spacing, refine)

    # basic views

    @property
    def dx(self) -> float:
        return self.atom_spacing / self.refine

    @property
    def atoms(self) -> dict[int, float]:
        nz = np.flatnonzero(self.atom_masses)
        return {int(self.atom_start + i): float(self.atom_masses[i]) for i in nz}

    @property
    def atom_indices(self) -> np.ndarray:
        return self.atom_start + np.arange(self.atom_masses.size)

    @property
    def atom_locations(self) -> np.ndarray:
        return self.shift + self.atom_spacing * self.atom_indices

    @property
    def density_indices(self) -> np.ndarray:
        return self.density_start + np.arange(self.density_values.size)

    @property
    def density_nodes(self) -> np.ndarray:
        return self.shift + self.dx * self.density_indices

    @property
    def density_support(self) -> tuple[float, float] | None:
        if self.density_values.size == 0:
            return None
        nodes = self.density_nodes
        return nodes[0] - 0.5 * self.dx, nodes[-1] + 0.5 * self.dx

    @property
    def has_density(self) -> bool:
        return self.density_values.size > 0

    def atom(self, j: int) -> float:
        i = int(j) - self.atom_start
        if 0 <= i < self.atom_masses.size:
            return float(self.atom_masses[i])
        return 0.0

    def atoms_at_indices(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64) - self.atom_start
        out = np.zeros(idx.shape)
        ok = (idx >= 0) & (idx < self.atom_masses.size)
        out[ok] = self.atom_masses[idx[ok]]
        return out

    def atomic_mass(self) -> float:
        return float(self.atom_masses.sum())

    def density_mass(self) -> float:
        return float(self.dx * self.density_values.sum())

    def mass(self) -> float:
        return self.atomic_mass() + self.density_mass()

    def total_variation(self) -> float:
        return float(np.abs(self.atom_masses).sum() + self.dx * np.abs(self.density_values).sum())

    # algebra

    def _check_compatible(self, other: "SignedMeasure"):
        if not math.isclose(self.atom_spacing, other.atom_spacing, rel_tol=1e-12):
            raise ConfigurationError("mismatched lattice pitch")
        if self.refine != other.refine:
            raise ConfigurationError("mismatched density grid step")

    def __add__(self, other: "SignedMeasure") -> "SignedMeasure":
        self._check_compatible(other)
        if self.total_variation() == 0:
            return other
        if other.total_variation() == 0:
            return self
        if not math.isclose(self.shift, other.shift, rel_tol=0, abs_tol=1e-12 * self.atom_spacing):
            raise ConfigurationError("cannot add measures with different lattice offsets")
        a_start, a = _add_dense(self.atom_start, self.atom_masses, other.atom_start, other.atom_masses)
        d_start, d = _add_dense(self.density_start, self.density_values,
                                other.density_start, other.density_values)
        return SignedMeasure(self.atom_spacing, a_start, a, d_start, d, self.refine, self.shift)

    def __neg__(self) -> "SignedMeasure":
        return self * -1.0

    def __sub__(self, other: "SignedMeasure") -> "SignedMeasure":
        return self + (-other)

    def __mul__(self, c: float) -> "SignedMeasure":
        c = float(c)
        return SignedMeasure(self.atom_spacing, self.atom_start, c * self.atom_masses,
                             self.density_start, c * self.density_values, self.refine, self.shift)

    __rmul__ = __mul__

    def shifted(self, s: float) -> "SignedMeasure":
        return SignedMeasure(self.atom_spacing, self.atom_start, self.atom_masses,
                             self.density_start, self.density_values, self.refine, self.shift + s)

    def unshifted(self) -> "SignedMeasure":
        return self.shifted(-self.shift)

    def pruned(self, rel: float = _PRUNE_REL) -> "SignedMeasure":
        tv = self.total_variation()
        if tv == 0:
            return self
        a = np.where(np.abs(self.atom_masses) < rel * tv, 0.0, self.atom_masses)
        return SignedMeasure(self.atom_spacing, self.atom_start, a, self.density_start,
                             self.density_values, self.refine, self.shift)

    def trimmed(self, tol: float) -> "SignedMeasure":
        """Drop density tails whose absolute mass on each side is below ``tol / 2``."""
        v = self.density_values
        if v.size == 0 or tol <= 0:
            return self
        w = self.dx * np.abs(v)
        left = np.cumsum(w)
        right = np.cumsum(w[::-1])
        lo = int(np.searchsorted(left, 0.5 * tol, side="right"))
        hi = v.size - int(np.searchsorted(right, 0.5 * tol, side="right"))
        if lo >= hi:
            lo, hi = 0, 0
        return SignedMeasure(self.atom_spacing, self.atom_start, self.atom_masses,
                             self.density_start + lo, v[lo:hi], self.refine, self.shift)

    def cdf(self, t, left: bool = False) -> np.ndarray:
        """M((-inf, t]) (or M((-inf, t)) when ``left``) for an array of t."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        if self.atom_masses.size:
            locs = self.atom_locations
            tolx = 1e-9 * self.atom_spacing
            csum = np.concatenate([[0.0], np.cumsum(self.atom_masses)])
            if left:
                k = np.searchsorted(locs, t - tolx, side="left")
            else:
                k = np.searchsorted(locs, t + tolx, side="right")
            out = out + csum[k]
        if self.density_values.size:
            dx = self.dx
            edges = self.shift + dx * (self.density_start - 0.5 + np.arange(self.density_values.size + 1))
            cum = np.concatenate([[0.0], np.cumsum(dx * self.density_values)])
            out = out + np.interp(t, edges, cum, left=0.0, right=cum[-1])
        return out

    def __repr__(self) -> str:
        return (f"SignedMeasure(spacing={self.atom_spacing}, shift={self.shift}, "
                f"atoms={len(self.atoms)}, density_nodes={self.density_values.size}, "
                f"mass={self.mass():.6g}, tv={self.total_variation():.6g})")


@dataclass(frozen=True)
class CumulativeTable:
    """Right-continuous cumulative values of a measure on a grid of points."""

    ts: np.ndarray
    values: np.ndarray
    atom_locations: np.ndarray
    atom_masses: np.ndarray
    total: float

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.interp(t, self.ts, self.values)


def convolve(m1: SignedMeasure, m2: SignedMeasure) -> SignedMeasure:
    m1._check_compatible(m2)
    R = m1.refine
    dx = m1.dx
    a = np.convolve(m1.atom_masses, m2.atom_masses) if m1.atom_masses.size and m2.atom_masses.size else _EMPTY
    a_start = m1.atom_start + m2.atom_start
    d_start, d = 0, _EMPTY
    for atoms_of, dens_of in ((m1, m2), (m2, m1)):
        if atoms_of.atom_masses.size and dens_of.density_values.size:
            up = np.zeros((atoms_of.atom_masses.size - 1) * R + 1)
            up[::R] = atoms_of.atom_masses
            part = signal.convolve(up, dens_of.density_values)
            d_start, d = _add_dense(d_start, d, atoms_of.atom_start * R + dens_of.density_start, part)
    if m1.density_values.size and m2.density_values.size:
        part = dx * signal.convolve(m1.density_values, m2.density_values)
        d_start, d = _add_dense(d_start, d, m1.density_start + m2.density_start, part)
    out = SignedMeasure(m1.atom_spacing, a_start, a, d_start, d, R, m1.shift + m2.shift)
    return out.pruned()


def reflect(m: SignedMeasure) -> SignedMeasure:
    """The measure A -> m(-A)."""
    a = m.atom_masses[::-1]
    a_start = -(m.atom_start + m.atom_masses.size - 1) if a.size else 0
    d = m.density_values[::-1]
    d_start = -(m.density_start + m.density_values.size - 1) if d.size else 0
    return SignedMeasure(m.atom_spacing, a_start, a, d_start, d, m.refine, -m.shift)


def series_length(x: float, tol: float) -> int:
    """Smallest K with sum_{k>K} x^k / k! < tol (a-priori tail bound)."""
    if tol <= 0:
        raise ConfigurationError("tol must be positive")
    x = abs(x)
    if x == 0:
        return 0
    K = 0
    term = 1.0  # x^K / K!
    while True:
        nxt = term * x / (K + 1)  # x^{K+1}/(K+1)!
        ratio = x / (K + 2)
        if ratio < 1 and nxt / (1 - ratio) < tol:
            return K
        K += 1
        term = nxt


def conv_exp(m: SignedMeasure, scale: float, tol: float = 1e-12) -> SignedMeasure:
    """Truncated convolution exponential  sum_{k<=K} m^{*k} scale^k / k!.

    K is fixed a priori so that the total-variation tail bound is below
    ``tol / 2``; the margin keeps the product of two truncated series within
    ``tol * exp(|x| + |y|)`` of the product of the exact ones.
    """
    if m.shift != 0:
        raise ConfigurationError("conv_exp needs an unshifted measure; shift the result instead")
    K = series_length(m.total_variation() * scale, 0.5 * tol)
    term = SignedMeasure.dirac(0, 1.0, m.atom_spacing, m.refine)
    result = term
    for k in range(1, K + 1):
        term = convolve(term, m) * (scale / k)
        result = result + term
    return result


def cumulative(m: SignedMeasure, ts) -> CumulativeTable:
    ts = np.asarray(ts, dtype=float)
    if ts.size > 1 and np.any(np.diff(ts) < 0):
        raise ConfigurationError("ts must be sorted ascending")
    return CumulativeTable(ts=ts, values=m.cdf(ts), atom_locations=m.atom_locations.copy(),
                           atom_masses=m.atom_masses.copy(), total=m.mass())


def total_variation(m: SignedMeasure) -> float:
    return m.total_variation()


def mass(m: SignedMeasure) -> float:
    return m.mass()


def tv_distance(a: SignedMeasure, b: SignedMeasure) -> float:
    return (a - b).total_variation()
