"""Exact limiting laws and covariances.

Everything is computed in the zero-drift frame: P0 is the law of an increment
without drift and Phi0 its convolution inverse.  For a weight f the limiting
covariance of two estimators is

    Sigma(f1, f2) = delta^-2 * int (f1 * Phi0)(x) (f2 * Phi0)(x) P0(dx),

and every weight in the catalog is a finite combination of a constant, point
indicators 1_{a}, half-lines 1_(-inf, t] and the lattice comb, whose
convolutions with Phi0 are read off its atoms and cumulative distribution.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NonzeroDrift, UnsupportedWeight
from .measure import SignedMeasure, conv_exp, reflect
from .model import LevyTriple, true_F

__all__ = [
    "LimitLawPair",
    "WeightSpec",
    "CovarianceReport",
    "limit_laws",
    "covariance_functional",
    "covariance_matrix",
    "sigma_lambda_decomposition",
    "small_lambda_delta",
    "covariance_report",
    "default_t_grid",
]

_GAUSS2 = 0.5 / math.sqrt(3.0)
_TERM_KINDS = ("const", "point", "halfline", "comb")


@dataclass(frozen=True)
class LimitLawPair:
    """P0 and Phi0 in the zero-drift frame plus the common translation gamma*delta."""

    P0: SignedMeasure
    Phi0: SignedMeasure
    drift_shift: float
    tol: float

    @property
    def P(self) -> SignedMeasure:
        return self.P0.shifted(self.drift_shift)

    @property
    def Phi(self) -> SignedMeasure:
        return self.Phi0.shifted(self.drift_shift)

    def centered(self) -> "LimitLawPair":
        return LimitLawPair(self.P0, self.Phi0, 0.0, self.tol)


def limit_laws(triple: LevyTriple, delta: float, tol: float = 1e-12) -> LimitLawPair:
    """P = e^{-lam delta} exp*(delta nu) and Phi = e^{lam delta} exp*(-delta reflect(nu)),
    both to total-variation accuracy ``tol``."""
    if not tol > 0:
        raise ConfigurationError("tol must be positive")
    if not delta > 0:
        raise ConfigurationError("delta must be positive")
    nu = triple.levy_measure()
    ld = triple.lambda_ * delta
    P0 = conv_exp(nu, delta, tol * math.exp(ld)) * math.exp(-ld)
    Phi0 = conv_exp(reflect(nu), -delta, tol * math.exp(-ld)) * math.exp(ld)
    return LimitLawPair(P0.trimmed(tol), Phi0.trimmed(tol), triple.gamma * delta, tol)


@dataclass(frozen=True)
class WeightSpec:
    """A weight function as a sum of catalog terms ``(coef, kind, param)``.

    kinds: ``const`` (param unused), ``point`` (1 at x = param), ``halfline``
    (1 on (-inf, param]) and ``comb`` (1 on the whole lattice).
    """

    name: str
    terms: tuple[tuple[float, str, float], ...]

    def __post_init__(self):
        for _, kind, _ in self.terms:
            if kind not in _TERM_KINDS:
                raise UnsupportedWeight(f"unknown weight term {kind!r}")

    def __add__(self, other: "WeightSpec") -> "WeightSpec":
        return WeightSpec(f"{self.name}+{other.name}", self.terms + other.terms)

    def scaled(self, c: float, name: str | None = None) -> "WeightSpec":
        return WeightSpec(name or f"{c:g}*{self.name}", tuple((c * a, k, p) for a, k, p in self.terms))

    # catalog

    @classmethod
    def lam(cls) -> "WeightSpec":
        return cls("lambda", ((1.0, "const", 0.0), (-1.0, "point", 0.0)))

    @classmethod
    def qj(cls, j: int, atom_spacing: float = 1.0) -> "WeightSpec":
        if int(j) == 0:
            raise UnsupportedWeight("q_j weight needs j != 0")
        return cls(f"q{int(j)}", ((1.0, "point", atom_spacing * int(j)),))

    @classmethod
    def pj(cls, j: int, triple: LevyTriple) -> "WeightSpec":
        lam = triple.lambda_
        base = cls.qj(j, triple.atom_spacing) + cls.lam().scaled(-triple.p(j))
        return base.scaled(1.0 / lam, f"p{int(j)}")

    @classmethod
    def q(cls) -> "WeightSpec":
        return cls("q", ((1.0, "comb", 0.0), (-1.0, "point", 0.0)))

    @classmethod
    def p(cls, triple: LevyTriple) -> "WeightSpec":
        base = cls.q() + cls.lam().scaled(-triple.p_total)
        return base.scaled(1.0 / triple.lambda_, "p")

    @classmethod
    def N(cls, t: float) -> "WeightSpec":
        t = float(t)
        if t == math.inf:
            return cls("N(+inf)", cls.lam().terms)
        if t == -math.inf:
            return cls("N(-inf)", ())
        terms = [(1.0, "halfline", t)]
        if t >= 0:
            terms.append((-1.0, "point", 0.0))
        return cls(f"N({t:g})", tuple(terms))

    @classmethod
    def F(cls, t: float, triple: LevyTriple) -> "WeightSpec":
        Ft = float(true_F(triple, t))
        base = cls.N(t) + cls.lam().scaled(-Ft)
        return base.scaled(1.0 / triple.lambda_, f"F({float(t):g})")

    # pointwise evaluation of f itself (used by the small-lambda*delta expansion)

    def __call__(self, x, atom_spacing: float = 1.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        tolx = 1e-9 * atom_spacing
        for c, kind, a in self.terms:
            if kind == "const":
                out += c
            elif kind == "point":
                out += c * (np.abs(x - a) <= tolx)
            elif kind == "halfline":
                out += c * (x <= a + tolx)
            else:
                r = x / atom_spacing
                out += c * (np.abs(r - np.round(r)) * atom_spacing <= tolx)
        return out


def _as_weight(f) -> WeightSpec:
    if not isinstance(f, WeightSpec):
        raise UnsupportedWeight(f"weights must come from the catalog, got {type(f).__name__}")
    return f


def _eval_points(P: SignedMeasure) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quadrature nodes for integrals against P.

    Atoms are taken exactly; each density cell is integrated with two-point
    Gauss-Legendre.  The boolean mask marks atom nodes.
    """
    xs = [P.atom_locations]
    ws = [P.atom_masses]
    if P.has_density:
        c = P.density_nodes
        w = 0.5 * P.dx * P.density_values
        xs += [c - _GAUSS2 * P.dx, c + _GAUSS2 * P.dx]
        ws += [w, w]
    is_atom = np.zeros(sum(a.size for a in xs), dtype=bool)
    is_atom[: P.atom_masses.size] = True
    return np.concatenate(xs), np.concatenate(ws), is_atom


def _phi_atom_at(Phi: SignedMeasure, y: np.ndarray) -> np.ndarray:
    r = (y - Phi.shift) / Phi.atom_spacing
    k = np.round(r)
    on = np.abs(r - k) <= 1e-9
    out = np.zeros(y.shape)
    if np.any(on):
        out[on] = Phi.atoms_at_indices(k[on].astype(np.int64))
    return out


def convolved_weight(f: WeightSpec, Phi: SignedMeasure, x: np.ndarray, on_lattice: np.ndarray) -> np.ndarray:
    """(f * Phi)(x) = int f(x - y) Phi(dy) at the points ``x``."""
    f = _as_weight(f)
    total = Phi.mass()
    atomic = Phi.atomic_mass()
    out = np.zeros(x.shape)
    for c, kind, a in f.terms:
        if kind == "const":
            out += c * total
        elif kind == "point":
            out += c * _phi_atom_at(Phi, x - a)
        elif kind == "halfline":
            # Phi([x - t, inf))
            out += c * (total - Phi.cdf(x - a, left=True))
        else:
            out += c * np.where(on_lattice, atomic, 0.0)
    return out


def _weight_rows(weights, laws: LimitLawPair):
    P, Phi = laws.P0, laws.Phi0
    x, w, is_atom = _eval_points(P)
    G = np.array([convolved_weight(f, Phi, x, is_atom) for f in weights]).reshape(len(weights), x.size)
    return G, w


def covariance_matrix(weights, laws: LimitLawPair, delta: float) -> np.ndarray:
    """delta^-2 int (f_a * Phi)(f_b * Phi) dP for all pairs of catalog weights."""
    weights = [_as_weight(f) for f in weights]
    if not weights:
        return np.zeros((0, 0))
    G, w = _weight_rows(weights, laws)
    M = (G * w) @ G.T / delta ** 2
    return 0.5 * (M + M.T)


def covariance_functional(f1: WeightSpec, f2: WeightSpec, laws: LimitLawPair, delta: float) -> float:
    G, w = _weight_rows([_as_weight(f1), _as_weight(f2)], laws)
    return float(np.sum(G[0] * G[1] * w) / delta ** 2)


def sigma_lambda_decomposition(laws: LimitLawPair, delta: float) -> tuple[float, float]:
    """sigma^2_lambda split into the origin term and the series over nonzero atoms."""
    if laws.drift_shift != 0:
        raise NonzeroDrift("decomposition is stated in the zero-drift frame; use laws.centered()")
    P, Phi = laws.P0, laws.Phi0
    head = (P.atom(0) * Phi.atom(0) ** 2 - 1.0) / delta ** 2
    idx = P.atom_indices
    vals = P.atom_masses * Phi.atoms_at_indices(idx) ** 2
    series = float(np.sum(vals[idx != 0]) / delta ** 2)
    return head, series


def small_lambda_delta(f1: WeightSpec, f2: WeightSpec, triple: LevyTriple, delta: float) -> float:
    """First-order expansion of the covariance in lambda*delta, on the variance scale."""
    f1, f2 = _as_weight(f1), _as_weight(f2)
    eps = triple.atom_spacing
    nu = triple.levy_measure()
    x, w, _ = _eval_points(nu)
    a1, a2 = f1(x, eps), f2(x, eps)
    f10, f20 = float(f1(0.0, eps)), float(f2(0.0, eps))
    int12 = float(np.sum(a1 * a2 * w))
    # (f * reflect(nu))(0) = int f dnu
    int1, int2 = float(np.sum(a1 * w)), float(np.sum(a2 * w))
    lam = triple.lambda_
    first = f10 * f20 + delta * (int12 - f10 * int2 - f20 * int1 + lam * f10 * f20)
    return first / delta ** 2


def default_t_grid(atom_spacing: float = 1.0, points: int = 41, half_width: float = 5.0) -> np.ndarray:
    return atom_spacing * np.linspace(-half_width, half_width, points)


@dataclass
class CovarianceReport:
    delta: float
    lambda_: float
    sigma2_lambda: float
    sigma2_qj: dict[int, float]
    sigma2_pj: dict[int, float]
    sigma2_q: float
    sigma2_p: float
    ts: np.ndarray
    SigmaN: np.ndarray
    SigmaF: np.ndarray
    small_lambda_delta_approx: dict = field(default_factory=dict)
    masses: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def mat(m):
            return [[float(v) for v in row] for row in m]

        def ts_json(ts):
            return [("inf" if t > 0 else "-inf") if math.isinf(t) else float(t) for t in ts]

        approx = dict(self.small_lambda_delta_approx)
        for k in ("SigmaN", "SigmaF"):
            if k in approx:
                approx[k] = mat(approx[k])
        return {
            "delta": self.delta,
            "lambda": self.lambda_,
            "sigma2_lambda": self.sigma2_lambda,
            "sigma2_qj": {str(j): v for j, v in self.sigma2_qj.items()},
            "sigma2_pj": {str(j): v for j, v in self.sigma2_pj.items()},
            "sigma2_q": self.sigma2_q,
            "sigma2_p": self.sigma2_p,
            "t": ts_json(self.ts),
            "SigmaN": mat(self.SigmaN),
            "SigmaF": mat(self.SigmaF),
            "small_lambda_delta_approx": approx,
            "masses": self.masses,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CovarianceReport":
        ts = np.array([float(t) for t in d["t"]])
        approx = dict(d.get("small_lambda_delta_approx", {}))
        for k in ("SigmaN", "SigmaF"):
            if k in approx:
                approx[k] = np.asarray(approx[k], dtype=float)
        return cls(
            delta=d["delta"], lambda_=d["lambda"], sigma2_lambda=d["sigma2_lambda"],
            sigma2_qj={int(j): v for j, v in d["sigma2_qj"].items()},
            sigma2_pj={int(j): v for j, v in d["sigma2_pj"].items()},
            sigma2_q=d["sigma2_q"], sigma2_p=d["sigma2_p"], ts=ts,
            SigmaN=np.asarray(d["SigmaN"], dtype=float), SigmaF=np.asarray(d["SigmaF"], dtype=float),
            small_lambda_delta_approx=approx, masses=d.get("masses", {}),
        )

    def to_json(self, path) -> None:
        from .io import atomic_write_text

        atomic_write_text(path, json.dumps(self.to_dict(), indent=2))

    def write_csv(self, path, which: str = "SigmaF") -> None:
        """Long-format CSV with columns s,t,value."""
        from .io import atomic_write_text
        import io as _io

        M = getattr(self, which)
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "t", "value"])
        for a, s in enumerate(self.ts):
            for b, t in enumerate(self.ts):
                w.writerow([repr(float(s)), repr(float(t)), repr(float(M[a, b]))])
        atomic_write_text(path, buf.getvalue())


def covariance_report(triple: LevyTriple, delta: float, ts=None, tol: float = 1e-12,
                      laws: LimitLawPair | None = None) -> CovarianceReport:
    """All oracle variances plus Sigma^N and Sigma^F on ``ts`` with +-inf sentinels."""
    laws = (laws or limit_laws(triple, delta, tol)).centered()
    eps = triple.atom_spacing
    if ts is None:
        ts = default_t_grid(eps)
    ts = np.asarray(ts, dtype=float)
    ts = np.concatenate([[-math.inf], ts[np.isfinite(ts)], [math.inf]])
    js = sorted(triple.discrete_weights)

    scalar_w = [WeightSpec.lam(), WeightSpec.q(), WeightSpec.p(triple)]
    scalar_w += [WeightSpec.qj(j, eps) for j in js] + [WeightSpec.pj(j, triple) for j in js]
    N_w = [WeightSpec.N(t) for t in ts]
    F_w = [WeightSpec.F(t, triple) for t in ts]

    S = covariance_matrix(scalar_w, laws, delta)
    SN = covariance_matrix(N_w, laws, delta)
    SF = covariance_matrix(F_w, laws, delta)
    nj = len(js)
    diag = np.diag(S)

    def approx_matrix(ws):
        return np.array([[small_lambda_delta(a, b, triple, delta) for b in ws] for a in ws])

    approx = {
        "sigma2_lambda": small_lambda_delta(scalar_w[0], scalar_w[0], triple, delta),
        "sigma2_q": small_lambda_delta(scalar_w[1], scalar_w[1], triple, delta),
        "sigma2_p": small_lambda_delta(scalar_w[2], scalar_w[2], triple, delta),
        "sigma2_qj": {str(j): small_lambda_delta(f, f, triple, delta) for j, f in zip(js, scalar_w[3 : 3 + nj])},
        "sigma2_pj": {str(j): small_lambda_delta(f, f, triple, delta) for j, f in zip(js, scalar_w[3 + nj :])},
        "SigmaN": approx_matrix(N_w),
        "SigmaF": approx_matrix(F_w),
    }
    return CovarianceReport(
        delta=float(delta), lambda_=triple.lambda_,
        sigma2_lambda=float(diag[0]), sigma2_q=float(diag[1]), sigma2_p=float(diag[2]),
        sigma2_qj={j: float(v) for j, v in zip(js, diag[3 : 3 + nj])},
        sigma2_pj={j: float(v) for j, v in zip(js, diag[3 + nj :])},
        ts=ts, SigmaN=SN, SigmaF=SF, small_lambda_delta_approx=approx,
        masses={"P": laws.P0.mass(), "Phi": laws.Phi0.mass()},
    )
