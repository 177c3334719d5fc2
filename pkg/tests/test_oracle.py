import math

import numpy as np
import pytest

from partition_mmse import ExpectationConfig
from partition_mmse.errors import StateSpaceTooLarge, ZeroProbability
from partition_mmse.models.discrete import noiseless_binary, random_discrete_model
from partition_mmse.models.gaussian import gaussian_awgn, gaussian_mmse, wiener_coefficient
from partition_mmse.oracle import (GaussianProposal, enumerate_posterior, importance_sampling_mean,
                                   oracle_mismatched_mse, oracle_mmse, quadrature_posterior_moments,
                                   tensor_quadrature_posterior)


def test_enumeration_posterior_normalizes(rng):
    model = random_discrete_model(rng, 3, 2, 1, 2)
    table = enumerate_posterior(model, [1.0])
    assert math.fsum(np.exp(table.log_weights)) == pytest.approx(1.0, abs=1e-14)


def test_zero_probability_and_cap():
    with pytest.raises(ZeroProbability):
        enumerate_posterior(noiseless_binary(2), [1.0, 0.5])
    with pytest.raises(StateSpaceTooLarge):
        enumerate_posterior(noiseless_binary(30), np.ones(30), cap=1000)


def test_scalar_quadrature_matches_gaussian_posterior():
    model = gaussian_awgn(2.0, 0.5)
    _, mean, var = quadrature_posterior_moments(model, [1.3])
    assert mean == pytest.approx(wiener_coefficient(2.0, 0.5) * 1.3, abs=1e-12)
    assert var == pytest.approx(gaussian_mmse(2.0, 0.5), abs=1e-12)


def test_tensor_quadrature_on_gaussian_pair():
    model = gaussian_awgn(1.0, 2.0, n=2, closed_form=True)
    y = np.array([0.4, -1.1])
    lz, mean = tensor_quadrature_posterior(model, y)
    np.testing.assert_allclose(mean, wiener_coefficient(1.0, 2.0) * y, atol=1e-12)
    assert lz == pytest.approx(model.log_partition_fn(y, np.zeros(2)), abs=1e-12)


def test_importance_sampling_within_bootstrap_error():
    model = gaussian_awgn(1.0, 2.0, n=2, closed_form=True)
    y = np.array([0.4, -1.1])
    est = importance_sampling_mean(model, y, GaussianProposal(np.zeros(2), np.eye(2)),
                                   ExpectationConfig("monte_carlo", samples=50_000, seed=2))
    assert np.all(np.abs(est.mean - wiener_coefficient(1.0, 2.0) * y) < 4 * est.stderr)


def test_monte_carlo_oracle_mmse_and_batched_mismatch():
    model = gaussian_awgn(1.0, 1.0)
    mc = oracle_mmse(model, ExpectationConfig("monte_carlo", samples=400, seed=1, quad_panels=40))
    assert abs(mc.value - 0.5) < 4 * mc.stderr
    cfg = ExpectationConfig("monte_carlo", samples=200, seed=3, quad_panels=40)
    loop = oracle_mismatched_mse(model, gaussian_awgn(2.0, 1.0), cfg)
    batch = oracle_mismatched_mse(model, gaussian_awgn(2.0, 1.0), cfg, batch_mean=lambda ys: 2.0 / 3.0 * ys)
    assert batch.value == pytest.approx(loop.value, abs=1e-9)
