import numpy as np
import pytest

from partition_mmse import (DiffConfig, ExpectationConfig, conditional_covariance, conditional_mean, log_partition,
                            log_partition_result, mmse)
from partition_mmse.errors import DimensionMismatch, DomainError
from partition_mmse.models.discrete import random_discrete_model
from partition_mmse.models.gaussian import gaussian_awgn, gaussian_mmse, wiener_coefficient
from partition_mmse.oracle import enumerate_posterior, oracle_mmse

FD = DiffConfig(scheme="central_difference")


@pytest.fixture
def discrete(rng):
    return random_discrete_model(rng, 3, 3, 2, 3)


def test_log_partition_at_zero_is_log_evidence(discrete):
    y = np.array([1.0, 2.0])
    lz = log_partition(discrete, y)
    assert lz == pytest.approx(enumerate_posterior(discrete, y).log_evidence, abs=1e-12)


def test_gradient_and_hessian_give_posterior_moments(discrete):
    y = np.array([0.0, 1.0])
    table = enumerate_posterior(discrete, y)
    np.testing.assert_allclose(conditional_mean(discrete, y), table.mean(), atol=1e-12)
    np.testing.assert_allclose(conditional_mean(discrete, y, FD), table.mean(), atol=1e-8)
    np.testing.assert_allclose(conditional_covariance(discrete, y, FD), table.covariance(), atol=1e-6)


def test_log_partition_result_bundles_moments(discrete):
    y = np.array([2.0, 0.0])
    res = log_partition_result(discrete, y)
    np.testing.assert_allclose(res.gradient, conditional_mean(discrete, y), atol=1e-12)
    np.testing.assert_allclose(res.hessian, conditional_covariance(discrete, y), atol=1e-12)
    assert res.log_z == pytest.approx(log_partition(discrete, y), abs=1e-14)
    assert res.method == "enumeration"


@pytest.mark.parametrize("power,beta", [(0.5, 2.0), (2.0, 0.5)])
def test_gaussian_quadrature_mean_and_mmse(power, beta):
    model = gaussian_awgn(power, beta)
    y = np.array([0.7])
    np.testing.assert_allclose(conditional_mean(model, y), wiener_coefficient(power, beta) * y, atol=1e-9)
    val = mmse(model, ExpectationConfig("quadrature_y")).value
    assert float(val) == pytest.approx(gaussian_mmse(power, beta), abs=1e-6)


def test_gaussian_closed_form_hooks_match_quadrature():
    quad, exact = gaussian_awgn(1.0, 2.0), gaussian_awgn(1.0, 2.0, closed_form=True)
    for y in (-1.3, 0.0, 2.1):
        lam = np.array([0.4])
        assert log_partition(quad, [y], lam) == pytest.approx(log_partition(exact, [y], lam), abs=1e-10)


def test_mmse_matches_oracle(discrete):
    cfg = ExpectationConfig("enumerate_y")
    assert float(mmse(discrete, cfg).value) == pytest.approx(oracle_mmse(discrete, cfg).value, abs=1e-10)


def test_monte_carlo_mmse_is_reproducible(discrete):
    cfg = ExpectationConfig("monte_carlo", samples=2000, seed=3)
    a, b = mmse(discrete, cfg), mmse(discrete, cfg)
    assert float(a.value) == float(b.value)
    exact = oracle_mmse(discrete, ExpectationConfig("enumerate_y")).value
    assert abs(float(a.value) - exact) < 5 * float(np.atleast_1d(a.stderr)[0])


def test_input_validation(discrete):
    with pytest.raises(DimensionMismatch):
        log_partition(discrete, [1.0])
    with pytest.raises(DimensionMismatch):
        log_partition(discrete, [1.0, 0.0], lam=[0.0, 0.0])
    with pytest.raises(DomainError):
        log_partition(discrete, [1.0, 0.0], lam=[0.0, np.inf, 0.0])
