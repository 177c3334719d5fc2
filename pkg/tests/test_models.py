import math

import numpy as np
import pytest

from partition_mmse import DiffConfig, conditional_mean, log_partition
from partition_mmse.errors import (CodebookTooLarge, DegenerateWeights, FlatMaximum, InvalidTailExponent,
                                   RegimeError)
from partition_mmse.models.cauchy import (CauchyModel, cauchy_conditional_mean, cauchy_joint_model,
                                          cauchy_log_partition, cauchy_saddle_estimator, cauchy_saddle_objective,
                                          cauchy_saddle_t)
from partition_mmse.models.codebook import (CodebookModel, codebook_exact_log_partition,
                                            codebook_exact_posterior_mean, codebook_joint_model,
                                            codebook_large_m_posterior_mean, codebook_saddle_estimator,
                                            critical_beta, gamma_exponent)
from partition_mmse.models.curie_weiss import (CurieWeissModel, cw_asymptotic_mmse, cw_conditional_mean_hs,
                                               cw_joint_model, cw_log_partition_hs, cw_saddle_estimator,
                                               magnetization)
from partition_mmse.numerics import fd_gradient
from partition_mmse.oracle import enumerate_posterior, tensor_quadrature_posterior

# ------------------------------------------------------------------ codebook


def test_critical_beta_and_sphere_exponent():
    assert critical_beta(math.log(2.0), 1.0) == 3.0
    assert critical_beta(0.5, 2.0) == pytest.approx(math.expm1(1.0) / 2.0, rel=1e-15)
    assert gamma_exponent(0.0) == 0.0
    assert gamma_exponent(0.6) == pytest.approx(0.5 * math.log(0.64), rel=1e-15)


def test_codebook_rows_lie_on_the_power_sphere():
    model = CodebookModel(8, 0.5, power=2.0, seed=3)
    np.testing.assert_allclose(np.sum(model.codebook**2, axis=1), 16.0, rtol=1e-12)
    assert model.size == math.ceil(math.exp(4.0))


def test_exact_posterior_mean_matches_core():
    model = CodebookModel(4, 1.0, 1.0, 2.0, seed=1)
    y = model.observe(np.random.default_rng(0))
    np.testing.assert_allclose(conditional_mean(codebook_joint_model(model), y),
                               codebook_exact_posterior_mean(model, y), atol=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_self_averaged_mean_tracks_enumeration(seed):
    # 162755 competitors with effective counts of 5e3 to 2e4; relative gaps seen are about 1.5%
    model = CodebookModel(10, 1.2, 1.0, 0.5, seed=seed)
    y = model.observe(np.random.default_rng(seed))
    exact = codebook_exact_posterior_mean(model, y)
    approx = codebook_large_m_posterior_mean(model, y, min_effective=1e3)
    assert np.linalg.norm(approx.mean - exact) / np.linalg.norm(exact) < 0.05
    assert approx.log_partition == pytest.approx(codebook_exact_log_partition(model, y), abs=0.05)


def test_codebook_refusals():
    model = CodebookModel(10, 1.2, 1.0, 0.5)
    with pytest.raises(DegenerateWeights):
        codebook_large_m_posterior_mean(model, model.observe(np.random.default_rng(0)), min_effective=1e12)
    with pytest.raises(RegimeError):
        codebook_saddle_estimator(CodebookModel(10, 0.3, 1.0, 4.0), np.zeros(10))
    with pytest.raises(CodebookTooLarge):
        CodebookModel(40, 1.0).codebook


# --------------------------------------------------------------- Curie-Weiss


@pytest.mark.parametrize("a,b", [(0.5, 0.0), (1.5, 0.1), (2.0, -0.3)])
def test_magnetization_solves_fixed_point(a, b):
    m = magnetization(a, b).argmax
    assert m == pytest.approx(math.tanh(a * m + b), abs=1e-13)


def test_magnetization_symmetric_pair():
    sol = magnetization(2.0, 0.0)
    assert sol.multiplicity == "symmetric_pair"
    assert sol.argmax == pytest.approx(-sol.alternatives[0], abs=1e-12)
    assert magnetization(0.5, 0.0).argmax == pytest.approx(0.0, abs=1e-12)


def test_hs_log_partition_matches_enumeration(rng):
    model = CurieWeissModel(10, 1.2, 0.2, 0.7)
    y = rng.choice([-1.0, 1.0], 10)
    lam = 0.3 * rng.normal(size=10)
    assert cw_log_partition_hs(model, y, lam) == pytest.approx(log_partition(cw_joint_model(model), y, lam),
                                                               abs=1e-10)
    np.testing.assert_allclose(cw_conditional_mean_hs(model, y), enumerate_posterior(cw_joint_model(model), y).mean(),
                               atol=1e-10)


def test_hs_backend_finite_differences():
    model = CurieWeissModel(8, 0.9, -0.4, 1.1)
    y = np.array([1, -1, 1, 1, -1, 1, -1, -1], float)
    fd = conditional_mean(cw_joint_model(model, backend="hs"), y, DiffConfig(scheme="central_difference"))
    np.testing.assert_allclose(fd, cw_conditional_mean_hs(model, y), atol=1e-8)


def test_saddle_estimator_at_large_n(rng):
    model = CurieWeissModel(2000, 1.5, 0.1, 1.0)
    _, Y = model.sample(rng, 2)
    for y in Y:
        assert np.max(np.abs(cw_saddle_estimator(model, y) - cw_conditional_mean_hs(model, y))) < 1e-3


def test_asymptotic_mmse_is_a_valid_per_symbol_error():
    for a, b in [(0.5, 0.0), (1.5, 0.1), (2.0, 0.0)]:
        res = cw_asymptotic_mmse(CurieWeissModel(100, a, b, 1.0))
        assert 0.0 < res.value < 1.0
    assert len(cw_asymptotic_mmse(CurieWeissModel(100, 2.0, 0.0, 1.0)).branch_values) == 2


# -------------------------------------------------------------------- Cauchy


def test_tail_exponent_is_validated():
    with pytest.raises(InvalidTailExponent):
        CauchyModel(4, 1.0, 3.0)
    CauchyModel(4, 1.0, 3.5)


def test_cauchy_log_partition_matches_tensor_quadrature(rng):
    model = CauchyModel(2, 1.0, 4.0)
    _, Y = model.sample(rng, 2)
    for y in Y:
        lz, mean = tensor_quadrature_posterior(cauchy_joint_model(model), y, panels=24, center=0.5 * y)
        assert cauchy_log_partition(model, y) == pytest.approx(lz, abs=1e-8)
        np.testing.assert_allclose(cauchy_conditional_mean(model, y), mean, atol=1e-8)


def test_cauchy_tilted_mean_is_gradient(rng):
    model = CauchyModel(3, 0.5, 6.0)
    y = rng.normal(size=3)
    lam = 0.4 * rng.normal(size=3)
    grad, _ = fd_gradient(lambda l: cauchy_log_partition(model, y, l), 3, DiffConfig(), at=lam)
    np.testing.assert_allclose(cauchy_conditional_mean(model, y, lam), grad, atol=1e-8)


def test_cauchy_saddle_is_stationary(rng):
    model = CauchyModel(50, 1.0, 30.0)
    _, Y = model.sample(rng, 3)
    for y in Y:
        sol = cauchy_saddle_t(model, y)
        _, dJ = cauchy_saddle_objective(model, float(y @ y))
        assert abs(float(dJ(sol.argmax))) < 1e-9
        assert sol.curvature > 0
        with pytest.raises(FlatMaximum):
            cauchy_saddle_estimator(model, y, min_curvature=1e6)


def test_cauchy_noise_energy(rng):
    # E|Z|^2 = (n/2) E[1/T] with T ~ Gamma(k - n/2)
    model = CauchyModel(4, 1.0, 6.0)
    X, Y = model.sample(rng, 200_000)
    energy = np.sum((Y - X) ** 2, axis=1)
    expected = 0.5 * 4 / (6.0 - 2.0 - 1.0)
    assert abs(energy.mean() - expected) < 5 * energy.std() / math.sqrt(len(energy))
