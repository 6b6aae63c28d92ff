import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from decompound.errors import NonzeroDrift, UnsupportedWeight
from decompound.measure import convolve, reflect
from decompound.model import ACDensity, LevyTriple, true_F
from decompound.oracle import (
    CovarianceReport,
    WeightSpec,
    covariance_functional,
    covariance_matrix,
    covariance_report,
    default_t_grid,
    limit_laws,
    sigma_lambda_decomposition,
    small_lambda_delta,
)

from conftest import E, rel


def _poisson(lam):
    return LevyTriple(0.0, lam, 1.0, {1: lam})


# limiting laws

def test_P_is_poisson_pmf(poisson_triple):
    laws = limit_laws(poisson_triple, 1.0)
    for k in range(8):
        assert laws.P.atom(k) == pytest.approx(math.exp(-1) / math.factorial(k), abs=1e-15)
    assert laws.P.atom(-1) == 0


def test_Phi_alternating_series(poisson_triple):
    laws = limit_laws(poisson_triple, 1.0)
    for k in range(8):
        # independent term: e * (-1)^k / k! evaluated directly
        assert laws.Phi.atom(-k) == pytest.approx(E * (-1) ** k / math.factorial(k), abs=1e-14)
    assert laws.Phi.atom(0) == pytest.approx(2.718281828459045, abs=1e-14)
    assert laws.Phi.atom(-1) == pytest.approx(-E, abs=1e-14)


def test_drift_translates_atoms():
    tr = LevyTriple(0.5, 1.0, 1.0, {-1: 0.4, 1: 0.6})
    laws = limit_laws(tr, 2.0)
    locs = laws.P.atom_locations
    assert np.allclose(locs - 1.0, np.round(locs - 1.0), atol=1e-12)
    assert np.allclose(locs, laws.P0.atom_locations + 1.0, atol=0)


@pytest.mark.parametrize("name", ["poisson", "symmetric", "skewed", "mixed"])
def test_masses_and_inverse(name):
    from conftest import all_fixtures

    tr = all_fixtures()[name]
    tol = 1e-12
    laws = limit_laws(tr, 1.0, tol)
    assert laws.P0.mass() == pytest.approx(1.0, abs=tol * 10)
    assert laws.Phi0.mass() == pytest.approx(1.0, abs=tol * 100)
    assert laws.P0.atom_masses.min() >= -tol
    if not laws.P0.has_density:
        # Phi has transform 1 / phi(-u): it inverts the reflected increment law
        ident = convolve(laws.P0, reflect(laws.Phi0))
        ident = ident + type(ident).from_atoms({0: -1.0}, ident.atom_spacing, ident.refine)
        # the TV budget scales with exp(2 lambda delta) through Phi's size
        assert ident.total_variation() < 10 * tol * math.exp(2 * tr.lambda_)


# closed forms

@pytest.mark.parametrize("ld", [0.1, 0.5, 1.0, 2.0])
def test_sigma_lambda_closed_form(ld):
    delta = 1.0
    laws = limit_laws(_poisson(ld), delta)
    got = covariance_functional(WeightSpec.lam(), WeightSpec.lam(), laws, delta)
    assert rel(got, math.expm1(ld) / delta ** 2) < 1e-8


def test_sigma_lambda_positive_support_with_density():
    ac = ACDensity.from_function(lambda x: np.full_like(x, 0.4), 0.5, 1.5, 1 / 16)
    tr = LevyTriple(0.0, 0.6 + ac.mass, 1.0, {2: 0.6}, ac)
    delta = 0.8
    laws = limit_laws(tr, delta)
    got = covariance_functional(WeightSpec.lam(), WeightSpec.lam(), laws, delta)
    assert rel(got, math.expm1(tr.lambda_ * delta) / delta ** 2) < 1e-8
    head, series = sigma_lambda_decomposition(laws, delta)
    assert series == 0.0


def test_sigma_q1_pure_poisson(poisson_triple):
    # only P({0}) Phi({-1})^2 and P({1}) Phi({0})^2 survive: (e^-1 e^2 + e^-1 e^2)
    laws = limit_laws(poisson_triple, 1.0)
    got = covariance_functional(WeightSpec.qj(1), WeightSpec.qj(1), laws, 1.0)
    assert got == pytest.approx(2 * E, rel=1e-10)
    lam, delta = 0.7, 1.3
    tr = _poisson(lam)
    laws = limit_laws(tr, delta)
    got = covariance_functional(WeightSpec.qj(1), WeightSpec.qj(1), laws, delta)
    assert rel(got, math.exp(lam * delta) * lam * (1 + lam * delta) / delta) < 1e-10


def test_decomposition_on_cancellation_model(symmetric_triple):
    laws = limit_laws(symmetric_triple, 1.0)
    head, series = sigma_lambda_decomposition(laws, 1.0)
    total = covariance_functional(WeightSpec.lam(), WeightSpec.lam(), laws, 1.0)
    assert series > 0
    assert rel(head + series, total) < 1e-8


def test_decomposition_rejects_drift():
    tr = LevyTriple(0.3, 1.0, 1.0, {1: 1.0})
    laws = limit_laws(tr, 1.0)
    with pytest.raises(NonzeroDrift):
        sigma_lambda_decomposition(laws, 1.0)
    head, series = sigma_lambda_decomposition(laws.centered(), 1.0)
    assert head + series == pytest.approx(E - 1, rel=1e-10)


def test_high_frequency_lambda_variance():
    # sigma^2_lambda * (lambda delta) / lambda^2 -> 1
    lam = 2.0
    vals = []
    for delta in (0.1, 0.01, 0.001):
        laws = limit_laws(_poisson(lam), delta)
        vals.append(covariance_functional(WeightSpec.lam(), WeightSpec.lam(), laws, delta) * delta / lam)
    assert abs(vals[-1] - 1) < 2e-3
    assert abs(vals[0] - 1) > abs(vals[1] - 1) > abs(vals[2] - 1)


def test_drift_invariance(skewed_triple):
    ts = [-1.0, 0.0, 1.0]
    a = covariance_report(skewed_triple, 1.0, ts)
    b = covariance_report(skewed_triple.with_drift(0.7), 1.0, ts)
    assert a.sigma2_lambda == b.sigma2_lambda
    assert np.array_equal(a.SigmaF, b.SigmaF)


# report structure

@pytest.fixture(scope="module")
def symmetric_report():
    tr = LevyTriple(0.0, 1.0, 1.0, {-1: 0.5, 1: 0.5})
    return tr, covariance_report(tr, 1.0)


def test_report_psd(symmetric_report):
    _, rep = symmetric_report
    for M in (rep.SigmaN, rep.SigmaF):
        assert np.allclose(M, M.T)
        assert np.linalg.eigvalsh(M).min() >= -1e-8 * np.trace(M)


def test_report_limits(symmetric_report):
    _, rep = symmetric_report
    assert math.isinf(rep.ts[0]) and math.isinf(rep.ts[-1])
    assert abs(rep.SigmaF[0, 0]) < 1e-12 and abs(rep.SigmaF[-1, -1]) < 1e-12
    assert rep.SigmaN[-1, -1] == pytest.approx(rep.sigma2_lambda, rel=1e-12)
    assert rep.SigmaN[0, 0] == 0
    assert np.allclose(rep.ts[1:-1], default_t_grid())


def test_report_values_for_cancellation_model(symmetric_report):
    _, rep = symmetric_report
    assert rep.sigma2_q == pytest.approx(rep.sigma2_lambda, rel=1e-10)  # nu is lattice-only
    assert abs(rep.sigma2_p) < 1e-10
    assert rep.sigma2_qj[1] == pytest.approx(rep.sigma2_qj[-1], rel=1e-12)


def test_sigma_F_tails_vanish(skewed_triple):
    laws = limit_laws(skewed_triple, 1.0)
    far = [covariance_functional(WeightSpec.F(t, skewed_triple), WeightSpec.F(t, skewed_triple), laws, 1.0)
           for t in (-50.0, 50.0, math.inf, -math.inf)]
    assert np.allclose(far, 0, atol=1e-12)


def test_covariance_matrix_basics(skewed_triple):
    laws = limit_laws(skewed_triple, 1.0)
    lam = WeightSpec.lam()
    s2 = covariance_functional(lam, lam, laws, 1.0)
    assert covariance_matrix([lam], laws, 1.0) == pytest.approx(np.array([[s2]]), rel=1e-14)
    M = covariance_matrix([WeightSpec.N(math.inf), lam], laws, 1.0)
    assert M[0, 1] == pytest.approx(s2, rel=1e-12)
    assert covariance_matrix([], laws, 1.0).shape == (0, 0)


def test_unsupported_weights(poisson_triple):
    laws = limit_laws(poisson_triple, 1.0)
    with pytest.raises(UnsupportedWeight):
        covariance_functional(lambda x: x, WeightSpec.lam(), laws, 1.0)
    with pytest.raises(UnsupportedWeight):
        WeightSpec("bad", ((1.0, "gaussian", 0.0),))
    with pytest.raises(UnsupportedWeight):
        WeightSpec.qj(0)


def test_report_round_trip(tmp_path, symmetric_report):
    _, rep = symmetric_report
    back = CovarianceReport.from_dict(rep.to_dict())
    assert back.sigma2_lambda == rep.sigma2_lambda
    assert np.array_equal(back.SigmaF, rep.SigmaF)
    assert np.array_equal(back.ts, rep.ts)
    rep.write_csv(tmp_path / "f.csv")
    rows = (tmp_path / "f.csv").read_text().splitlines()
    assert rows[0] == "s,t,value" and len(rows) == 1 + rep.ts.size ** 2


# variance nonnegativity over random models and catalog weights

@st.composite
def models(draw):
    js = draw(st.lists(st.sampled_from([-2, -1, 1, 2, 3]), min_size=1, max_size=3, unique=True))
    q = {j: draw(st.floats(0.05, 1.0)) for j in js}
    return LevyTriple(0.0, sum(q.values()), 1.0, q), draw(st.floats(0.1, 1.5))


@given(models(), st.floats(-3, 3), st.integers(0, 4))
def test_variance_nonnegative(model, t, which):
    tr, delta = model
    laws = limit_laws(tr, delta)
    f = [WeightSpec.lam(), WeightSpec.q(), WeightSpec.qj(1), WeightSpec.N(t), WeightSpec.F(t, tr)][which]
    assert covariance_functional(f, f, laws, delta) >= -1e-10


@given(models())
def test_decomposition_identity(model):
    tr, delta = model
    laws = limit_laws(tr, delta)
    head, series = sigma_lambda_decomposition(laws, delta)
    total = covariance_functional(WeightSpec.lam(), WeightSpec.lam(), laws, delta)
    assert rel(head + series, total) < 1e-8


# small lambda*delta expansion

def _F0_error(ld, tr):
    delta = ld / tr.lambda_
    f = WeightSpec.F(0.0, tr)
    exact = covariance_functional(f, f, limit_laws(tr, delta), delta)
    return abs(exact - small_lambda_delta(f, f, tr, delta)) / exact


def test_expansion_order(symmetric_triple):
    ratio = _F0_error(0.1, symmetric_triple) / _F0_error(0.01, symmetric_triple)
    assert 7 <= ratio <= 13


def test_expansion_brownian_bridge(symmetric_triple):
    tr, delta = symmetric_triple, 0.05
    for s in (-1.0, 0.0, 1.0):
        for t in (-1.0, 0.5, 1.0):
            approx = tr.lambda_ * delta * small_lambda_delta(WeightSpec.F(s, tr), WeightSpec.F(t, tr), tr, delta)
            Fs, Ft = float(true_F(tr, s)), float(true_F(tr, t))
            assert approx == pytest.approx(float(true_F(tr, min(s, t))) - Fs * Ft, abs=1e-12)
            approxN = tr.lambda_ * delta * small_lambda_delta(WeightSpec.N(s), WeightSpec.N(t), tr, delta)
            assert approxN == pytest.approx(tr.lambda_ ** 2 * float(true_F(tr, min(s, t))), abs=1e-12)


def test_expansion_pj(skewed_triple):
    tr, delta = skewed_triple, 0.02
    f = WeightSpec.pj(1, tr)
    approx = tr.lambda_ * delta * small_lambda_delta(f, f, tr, delta)
    assert approx == pytest.approx(0.6 * 0.4, rel=1e-10)
    exact = tr.lambda_ * delta * covariance_functional(f, f, limit_laws(tr, delta), delta)
    assert exact == pytest.approx(0.24, rel=0.05)


def test_bridge_null_direction():
    # F-hat(+inf) - F-hat(-inf) = 1 is deterministic, so the increments of the
    # limit process over a grid spanning both sentinels sum to zero
    tr = LevyTriple(0.0, 1.0, 1.0, {-2: 0.2, -1: 0.3, 1: 0.3, 2: 0.2})
    delta = 0.05
    rep = covariance_report(tr, delta, np.linspace(-3, 3, 13))
    k = rep.ts.size
    A = np.eye(k - 1, k, 1) - np.eye(k - 1, k)
    D = A @ rep.SigmaF @ A.T
    w, V = np.linalg.eigh(D)
    top = V[:, -1]
    ones = np.ones(k - 1) / math.sqrt(k - 1)
    assert abs(top @ ones) < 0.05
    assert np.linalg.norm(D @ ones) < 1e-8 * np.linalg.norm(D)
