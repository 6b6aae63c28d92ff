"""The ten acceptance criteria, each at its stated tolerance.

Every test records a one-line PASS/FAIL summary (printed at the end of the
run) before asserting.
"""

import math
import time

import numpy as np
import pytest

from decompound.estimators import SpectralFit
from decompound.harness import ExperimentPlan, run_montecarlo
from decompound.model import LevyTriple, log_char_fn, simulate, true_F, true_N
from decompound.oracle import (
    WeightSpec,
    covariance_functional,
    covariance_report,
    limit_laws,
    sigma_lambda_decomposition,
    small_lambda_delta,
)

from conftest import all_fixtures, record_acceptance, rel

M, N_MC, THREADS, SEED = 400, 5000, 4, 2024

POISSON = LevyTriple(0.0, 1.0, 1.0, {1: 1.0})
SYMMETRIC = LevyTriple(0.0, 1.0, 1.0, {-1: 0.5, 1: 0.5})
SKEWED = LevyTriple(0.0, 1.0, 1.0, {-1: 0.4, 1: 0.6})


def _mc(triple, targets, t_grid=(-1.0, 0.0, 1.0)):
    plan = ExperimentPlan(triple, 1.0, (N_MC,), M, SEED, targets=targets, t_grid=t_grid)
    return run_montecarlo(plan, threads=THREADS, write=False)


@pytest.fixture(scope="module")
def mc_poisson():
    return _mc(POISSON, ("lambda",))


@pytest.fixture(scope="module")
def mc_skewed():
    return _mc(SKEWED, ("q1", "p1"))


@pytest.fixture(scope="module")
def mc_symmetric():
    return _mc(SYMMETRIC, ("lambda", "naive_lambda", "F"))


def _clt_gate(s):
    ok = s.ks_pvalue is not None and s.ks_pvalue > 0.01 and abs(s.var_ratio - 1) <= 0.25
    return ok, f"{s.target}: KS p={s.ks_pvalue:.3f}, var ratio={s.var_ratio:.3f}, refused={s.refused}"


def test_criterion_1_closed_form_variance():
    t0 = time.perf_counter()
    laws = limit_laws(POISSON, 1.0)
    s2 = covariance_functional(WeightSpec.lam(), WeightSpec.lam(), laws, 1.0)
    dt = time.perf_counter() - t0
    err = rel(s2, math.e - 1)
    ok = err < 1e-8 and dt < 1.0
    record_acceptance(1, ok, f"sigma2_lambda={s2:.12f} rel err {err:.1e}, {dt:.3f}s")
    assert ok


def test_criterion_2_atom_series_cross_check():
    t0 = time.perf_counter()
    laws = limit_laws(SYMMETRIC, 1.0)
    head, series = sigma_lambda_decomposition(laws, 1.0)
    total = covariance_functional(WeightSpec.lam(), WeightSpec.lam(), laws, 1.0)
    dt = time.perf_counter() - t0
    err = rel(head + series, total)
    ok = err < 1e-8 and dt < 1.0
    record_acceptance(2, ok, f"{head:.6f} + {series:.6f} vs {total:.6f}, rel err {err:.1e}, {dt:.3f}s")
    assert ok


def test_criterion_3_expansion_order():
    t0 = time.perf_counter()
    errs = {}
    for ld in (0.1, 0.01):
        delta = ld / SYMMETRIC.lambda_
        f = WeightSpec.F(0.0, SYMMETRIC)
        exact = covariance_functional(f, f, limit_laws(SYMMETRIC, delta), delta)
        errs[ld] = abs(exact - small_lambda_delta(f, f, SYMMETRIC, delta)) / exact
    dt = time.perf_counter() - t0
    ratio = errs[0.1] / errs[0.01]
    ok = 5 <= ratio <= 20 and dt < 5
    record_acceptance(3, ok, f"rel err {errs[0.1]:.4g} -> {errs[0.01]:.4g}, ratio {ratio:.2f}, {dt:.2f}s")
    assert ok


def test_criterion_4_clt_lambda(mc_poisson):
    ok, detail = _clt_gate(mc_poisson.summary("lambda"))
    record_acceptance(4, ok, detail)
    assert ok


def test_criterion_5_clt_atoms(mc_skewed):
    gates = [_clt_gate(mc_skewed.summary(t)) for t in ("q1", "p1")]
    ok = all(g for g, _ in gates)
    record_acceptance(5, ok, "; ".join(d for _, d in gates))
    assert ok


def test_criterion_6_donsker(mc_symmetric):
    f = mc_symmetric.functional("F")
    cov_ok = all(0.92 <= c <= 0.98 for c in f.pointwise_coverage)
    # small lambda*delta: lambda*delta*Sigma^F against the F-Brownian bridge
    delta = 0.1
    ts = [-1.0, -0.5, 0.0, 0.5]
    rep = covariance_report(SYMMETRIC, delta, ts)
    S = rep.SigmaF[1:-1, 1:-1] * SYMMETRIC.lambda_ * delta
    Fv = true_F(SYMMETRIC, np.array(ts))
    bridge = np.minimum.outer(Fv, Fv) - np.outer(Fv, Fv)
    worst = float(np.max(np.abs(S - bridge) / np.abs(bridge)))
    ok = cov_ok and worst <= 0.15
    cover = ", ".join(f"t={t:g}: {c:.3f}" for t, c in zip(f.ts, f.pointwise_coverage))
    record_acceptance(6, ok, f"coverage {cover}; bridge max rel err {worst:.3f}")
    assert ok


def _structural(fit, eps=1.0):
    bw = fit.bw
    lam = fit.lambda_hat()
    inf_ok = abs(fit.N_hat_at(math.inf) - lam) <= 1e-10
    far = np.array([-1e4, -bw.H - 2 * eps, -bw.H - eps * 1.0001, bw.H + eps * 1.0001, bw.H + 2 * eps, 1e4])
    F = fit.F_hat(far).values
    tails_ok = np.all(F[:3] == 0) and np.all(F[3:] == 1)
    flat_ok = True
    for j in (-2, -1, 1, 2):
        left = fit.N_hat(np.linspace(j - bw.eps_n, j, 40, endpoint=False)).values
        right = fit.N_hat(np.linspace(j, j + bw.eps_n, 40)).values
        flat_ok &= bool(np.all(left == left[0]) and np.all(right == right[0]))
    return inf_ok and tails_ok and flat_ok


def test_criterion_7_structural_identities():
    t0 = time.perf_counter()
    results = {}
    for name, tr in all_fixtures().items():
        fit = SpectralFit.from_sample(simulate(tr, 1.0, 2000, 1), atom_spacing=tr.atom_spacing)
        results[name] = _structural(fit, tr.atom_spacing)
    dt = time.perf_counter() - t0
    ok = all(results.values()) and dt < 10
    record_acceptance(7, ok, ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in results.items()) + f", {dt:.2f}s")
    assert ok


def test_criterion_8_naive_vs_spectral(mc_symmetric):
    naive = mc_symmetric.summary("naive_lambda")
    spectral = mc_symmetric.summary("lambda")
    naive_z = naive.bias / naive.bias_se
    spectral_z = spectral.bias / spectral.bias_se
    ok = naive_z < -5 and abs(spectral_z) < 3
    record_acceptance(8, ok, f"naive bias {naive.bias:.4f} ({naive_z:.1f} SE), "
                             f"spectral bias {spectral.bias:.5f} ({spectral_z:.2f} SE)")
    assert ok


def _injection_errors(tr, n):
    fit = SpectralFit.from_log_path(lambda u: log_char_fn(tr, 1.0, u), n, 1.0)
    lam = tr.lambda_
    errs = {"lambda": fit.lambda_hat() - lam, "gamma": fit.gamma_hat() - tr.gamma,
            "q": fit.q_total_hat() - tr.q_total}
    p, ptot = fit.p_hats()
    errs["p"] = ptot - tr.p_total
    for j, v in fit.q_hats().items():
        errs[f"q{j}"] = v - tr.q(j)
        errs[f"p{j}"] = p[j] - tr.p(j)
    ts = np.linspace(-4, 4, 33)
    errs["N"] = np.max(np.abs(fit.N_hat(ts).values - true_N(tr, ts)))
    errs["F"] = np.max(np.abs(fit.F_hat(ts).values - true_F(tr, ts)))
    return {k: abs(float(v)) for k, v in errs.items()}


def test_criterion_9_oracle_injection():
    t0 = time.perf_counter()
    fixtures = {"poisson": POISSON, "symmetric": SYMMETRIC, "skewed": SKEWED,
                "skewed+drift": SKEWED.with_drift(0.5)}
    worst = 0.0
    where = ""
    for name, tr in fixtures.items():
        for n in (1000, 10000):
            for k, e in _injection_errors(tr, n).items():
                score = e * math.sqrt(n)
                if score > worst:
                    worst, where = score, f"{name} n={n} {k}"
    dt = time.perf_counter() - t0
    ok = worst < 0.1 and dt < 30
    record_acceptance(9, ok, f"max sqrt(n)*|error| = {worst:.4f} ({where}), {dt:.1f}s")
    assert ok


def test_criterion_10_property_suites():
    import test_estimators
    import test_measure
    import test_spectral

    def run_all():
        test_measure.test_convolution_commutes()
        test_measure.test_convolution_associates()
        test_measure.test_mass_is_multiplicative()
        test_measure.test_exponential_inverse()
        test_spectral.test_log_round_trip_with_winding()
        for kind, kw in [("lambda", {}), ("gamma", {}), ("qj", {"j": 1}), ("q", {}), ("N", {"t": 0.3}),
                         ("N", {"t": -1.0})]:
            test_spectral.test_conjugate_symmetry_residual(kind, kw, SKEWED)
        fit = SpectralFit.from_sample(simulate(SKEWED, 1.0, 2000, 11))
        test_estimators.test_quadrature_halving_stability(fit)

    t0 = time.perf_counter()
    try:
        run_all()
    except Exception as exc:
        record_acceptance(10, False, f"property suite failed: {type(exc).__name__}: {exc}")
        raise
    dt = time.perf_counter() - t0
    ok = dt < 60
    record_acceptance(10, ok, f"measure algebra, log winding, conjugate symmetry, halving green in {dt:.1f}s")
    assert ok
