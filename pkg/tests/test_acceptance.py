"""Acceptance criteria 1-8, each at its stated tolerance and runtime budget.

Every test records one PASS/FAIL line, printed again in the terminal summary.
Run standalone with ``python3 tests/test_acceptance.py``.
"""
import math
import subprocess
import sys
import time

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import record_acceptance
from partition_mmse import ExpectationConfig, conditional_mean, mismatched_mse, mmse, mmse_all_formulas
from partition_mmse.models.cauchy import (CauchyModel, cauchy_conditional_mean, cauchy_joint_model,
                                          cauchy_saddle_estimator)
from partition_mmse.models.codebook import codebook_log_partition_spread, codebook_monte_carlo_mse, critical_beta
from partition_mmse.models.curie_weiss import (CurieWeissModel, cw_asymptotic_mmse, cw_conditional_mean_hs,
                                               cw_empirical_mmse, cw_joint_model, cw_saddle_estimator)
from partition_mmse.models.discrete import random_discrete_model
from partition_mmse.models.gaussian import gaussian_awgn, gaussian_mmse
from partition_mmse.numerics import DiffConfig
from partition_mmse.oracle import (GaussianProposal, enumerate_posterior, importance_sampling_mean, oracle_mismatched_mse,
                                   oracle_mmse, tensor_quadrature_posterior)
from partition_mmse.spherical import (SineKernel, SphericalKernel, SquaredDifference, cauchy_kernel,
                                      mixture_log_density, spherical_single_letter_mmse)

ENUM = ExpectationConfig("enumerate_y")


def _gen(*key):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(7, spawn_key=key)))


def _finish(number, checks, start, budget):
    """checks: list of (ok, text). Adds the runtime check, records the line, then asserts."""
    elapsed = time.perf_counter() - start
    budget_text = f"< {budget:g}s" if budget != float("inf") else "(no budget)"
    checks = [*checks, (elapsed < budget, f"{elapsed:.1f}s {budget_text}")]
    passed = all(ok for ok, _ in checks)
    record_acceptance(number, passed, "; ".join(text for _, text in checks))
    failed = [text for ok, text in checks if not ok]
    assert passed, f"criterion {number} failed: {failed}"


# 1 -----------------------------------------------------------------------


def test_criterion_1_four_formulas_match_enumeration():
    start = time.perf_counter()
    seen = {"models": 0, "worst": 0.0}

    @settings(max_examples=25, deadline=None, derandomize=True, database=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8), q=st.integers(2, 3),
           m=st.integers(1, 2), r=st.integers(2, 3))
    def prop(seed, n, q, m, r):
        model = random_discrete_model(np.random.default_rng(seed), n, q, m, r)
        rep = mmse_all_formulas(model, ENUM, check=False)
        ref = oracle_mmse(model, ENUM).value
        err = max(rep.spread, float(np.max(np.abs(rep.formula_values - ref))))
        seen["models"] += 1
        seen["worst"] = max(seen["worst"], err)
        assert err <= 1e-8

    try:
        prop()
        ok = True
    except AssertionError:
        ok = False
    _finish(1, [(ok and seen["models"] >= 20, f"{seen['models']} models"),
                (seen["worst"] <= 1e-8, f"worst |difference| {seen['worst']:.2e} <= 1e-8")], start, 60)


# 2 -----------------------------------------------------------------------


def test_criterion_2_gaussian_closed_form_by_quadrature():
    start = time.perf_counter()
    worst = 0.0
    for p in (0.5, 1.0, 2.0):
        for b in (0.5, 1.0, 2.0):
            val = mmse(gaussian_awgn(p, b), ExpectationConfig("quadrature_y")).value
            worst = max(worst, abs(float(val) - gaussian_mmse(p, b)))
    _finish(2, [(worst <= 1e-6, f"9 points, worst |error| {worst:.2e} <= 1e-6")], start, 10)


# 3 -----------------------------------------------------------------------


def test_criterion_3_codebook_desk_scale():
    start = time.perf_counter()
    err_dom = codebook_monte_carlo_mse(20, 1.5, 1.0, 0.5, range(100))
    target = gaussian_mmse(1.0, 0.5)
    rel = abs(err_dom.per_symbol_mse - target) / target
    cor_dom = codebook_monte_carlo_mse(20, 0.3, 1.0, 4.0, range(100))
    beta_r = critical_beta(math.log(2.0), 1.0)
    spreads = {(r, b): codebook_log_partition_spread(20, r, 1.0, b, range(1, 31))[1]
               for r, b in ((0.3, 4.0), (0.6, 0.5))}
    checks = [
        (rel <= 0.10, f"R=1.5 beta=0.5 mse {err_dom.per_symbol_mse:.4f} vs 2/3 rel {rel:.3f} <= 0.10 "
                      f"({err_dom.method})"),
        (cor_dom.per_symbol_mse <= 0.05, f"R=0.3 beta=4 mse {cor_dom.per_symbol_mse:.2e} <= 0.05 ({cor_dom.method})"),
        (beta_r == 3.0, f"beta_R(ln 2) = {beta_r!r}"),
        (max(spreads.values()) <= 0.1, "ln Z/n cross-seed std "
         + ", ".join(f"R={r} beta={b}: {s:.2e}" for (r, b), s in spreads.items()) + " <= 0.1"),
    ]
    _finish(3, checks, start, 300)


# 4 -----------------------------------------------------------------------


def test_criterion_4_curie_weiss():
    start = time.perf_counter()
    rng = _gen(4)
    fd_cfg = DiffConfig(scheme="central_difference")
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 15))
        model = CurieWeissModel(n, float(rng.uniform(0, 2.5)), float(rng.uniform(-1, 1)), float(rng.uniform(0.1, 2)))
        y = rng.choice([-1.0, 1.0], n)
        ex = enumerate_posterior(cw_joint_model(model), y).mean()
        hs = cw_conditional_mean_hs(model, y)
        fd = conditional_mean(cw_joint_model(model, backend="hs"), y, fd_cfg)
        worst = max(worst, float(np.max(np.abs(ex - hs))), float(np.max(np.abs(ex - fd))))

    big = CurieWeissModel(4000, 1.5, 0.1, 1.0)
    _, Y = big.sample(rng, 5)
    saddle_gap = max(float(np.max(np.abs(cw_saddle_estimator(big, y) - cw_conditional_mean_hs(big, y)))) for y in Y)

    asym = cw_asymptotic_mmse(big).value
    emp = cw_empirical_mmse(big, ExpectationConfig("monte_carlo", samples=2000, seed=4), "saddle")
    rel = abs(asym - emp.value) / emp.value
    checks = [
        (worst <= 1e-6, f"n<=14 three-way worst {worst:.2e} <= 1e-6"),
        (saddle_gap <= 1e-3, f"n=4000 saddle vs quadrature gradient {saddle_gap:.2e} <= 1e-3"),
        (rel <= 0.01, f"asymptotic {asym:.5f} vs empirical {emp.value:.5f}+-{emp.stderr:.5f} rel {rel:.4f} <= 0.01"),
    ]
    _finish(4, checks, start, 300)


# 5 -----------------------------------------------------------------------


def test_criterion_5_cauchy():
    start = time.perf_counter()
    small = CauchyModel(3, 1.0, 6.0)
    joint = cauchy_joint_model(small)
    rng = _gen(5)
    _, Y = small.sample(rng, 3)
    z_quad, z_is, quad_gap = 0.0, 0.0, 0.0
    for i, y in enumerate(Y):
        mean = cauchy_conditional_mean(small, y)
        _, quad = tensor_quadrature_posterior(joint, y, panels=12, center=0.5 * y)
        imp = importance_sampling_mean(joint, y, GaussianProposal(0.8 * y, 0.5 * np.eye(3)),
                                       ExpectationConfig("monte_carlo", samples=200_000, seed=i))
        z_quad = max(z_quad, float(np.max(np.abs(mean - quad) / imp.stderr)))
        z_is = max(z_is, float(np.max(np.abs(mean - imp.mean) / imp.stderr)))
        quad_gap = max(quad_gap, float(np.max(np.abs(mean - quad))))

    big = CauchyModel(50, 1.0, 30.0)
    X, Y = big.sample(rng, 20)
    rel = max(float(np.linalg.norm(cauchy_saddle_estimator(big, y, min_curvature=2.0) - cauchy_conditional_mean(big, y))
                    / np.linalg.norm(cauchy_conditional_mean(big, y))) for y in Y)

    single = spherical_single_letter_mmse(cauchy_kernel(50, 30.0, 1.0)).mmse
    X, Y = big.sample(rng, 2000)
    errs = np.array([np.mean((x - cauchy_conditional_mean(big, y)) ** 2) for x, y in zip(X, Y)])
    mc, se = float(errs.mean()), float(errs.std(ddof=1) / math.sqrt(len(errs)))
    gap = abs(single - mc) / mc
    checks = [
        (z_quad <= 3, f"n=3 vs nested quadrature {z_quad:.2f} sigma (abs {quad_gap:.1e})"),
        (z_is <= 3, f"n=3 vs importance sampling {z_is:.2f} sigma"),
        (rel <= 0.02, f"n=50 saddle vs gradient rel {rel:.4f} <= 0.02"),
        (gap <= 0.05, f"n=50 single-letter {single:.5f} vs Monte Carlo {mc:.5f}+-{se:.5f} rel {gap:.4f} <= 0.05"),
    ]
    _finish(5, checks, start, 300)


# 6 -----------------------------------------------------------------------


def test_criterion_6_mismatch():
    start = time.perf_counter()
    rng = _gen(6)
    reduction, margin = 0.0, math.inf
    for _ in range(10):
        n, q = int(rng.integers(1, 6)), int(rng.integers(2, 4))
        m, r = int(rng.integers(1, 3)), int(rng.integers(2, 4))
        letters = np.sort(rng.choice(np.arange(-3, 4), size=q, replace=False))
        P = random_discrete_model(rng, n, q, m, r, letters=letters)
        Q = random_discrete_model(rng, n, q, m, r, letters=letters)
        matched = float(mmse(P, ENUM).value)
        reduction = max(reduction, abs(mismatched_mse(P, P, ENUM).mse - matched))
        margin = min(margin, mismatched_mse(P, Q, ENUM).mse - matched)

    quad = ExpectationConfig("quadrature_y")
    true, assumed = gaussian_awgn(1.0, 1.0), gaussian_awgn(2.0, 1.0)
    lib = mismatched_mse(true, assumed, quad).mse
    coef = 2.0 / 3.0  # assumed posterior mean is P_Q beta / (1 + P_Q beta) * y
    mc = oracle_mismatched_mse(true, assumed, ExpectationConfig("monte_carlo", samples=10_000_000, seed=6),
                               batch_mean=lambda ys: coef * ys)
    matched_gauss = float(mmse(true, quad).value)
    margin = min(margin, lib - matched_gauss)
    checks = [
        (reduction <= 1e-8, f"Q=P reduction worst {reduction:.2e} <= 1e-8 on 10 models"),
        (abs(lib - 5 / 9) <= 1e-3 and abs(lib - mc.value) <= 1e-3,
         f"Gaussian mismatch {lib:.6f} (5/9 = {5 / 9:.6f}) vs Monte Carlo {mc.value:.6f}+-{mc.stderr:.6f}"),
        (margin >= 0, f"min(mse_Q - mmse) over 11 pairs {margin:.3e} >= 0"),
    ]
    _finish(6, checks, start, 60)


# 7 -----------------------------------------------------------------------


def test_criterion_7_signed_mixture():
    start = time.perf_counter()
    rng = _gen(7)
    kernel = SphericalKernel(1, SquaredDifference(shift=0.5), SineKernel(1.5))
    worst = 0.0
    for _ in range(100):
        x, y = rng.normal(0, 2, 1), rng.normal(0, 2, 1)
        s = float(kernel.phi(x, y)[0])
        direct = 1.5 / (s * s + 1.5**2)
        worst = max(worst, abs(float(mixture_log_density(kernel, x, y)) - direct) / direct)
    _finish(7, [(worst <= 1e-8, f"100 points, worst relative error {worst:.2e} <= 1e-8")], start, 30)


# 8 -----------------------------------------------------------------------


def _verify(*extra):
    res = subprocess.run([sys.executable, "-m", "partition_mmse", "verify", *extra], capture_output=True)
    return res.returncode, res.stdout


def test_criterion_8_verify_is_byte_identical():
    start = time.perf_counter()
    code_a, first = _verify("--workers", "1")
    code_b, second = _verify("--workers", "1")
    code_c, parallel = _verify("--workers", "8")
    checks = [
        (first == second, "two --workers 1 runs identical"),
        (first == parallel, "--workers 1 vs --workers 8 identical"),
        ((code_a, code_b, code_c) == (0, 0, 0), f"exit codes {code_a},{code_b},{code_c}"),
        (len(first) > 0, f"{len(first.splitlines())} records"),
    ]
    _finish(8, checks, start, math.inf)


if __name__ == "__main__":
    import pytest

    sys.exit(pytest.main([__file__, "-q", "-s"]))
