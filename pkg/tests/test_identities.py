import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partition_mmse import (ExpectationConfig, TiltedEnsemble, fisher_matrix, fisher_matrix_hessian_form,
                            information_density, information_density_formulas, log_theta, mismatched_mse, mmse,
                            mmse_all_formulas, prior_moments, score, xi_matrix)
from partition_mmse.errors import AlphabetMismatch, FormulaDisagreement
from partition_mmse.identities import information_density_gradient_covariance
from partition_mmse.models.discrete import noiseless_binary, random_discrete_model
from partition_mmse.models.gaussian import gaussian_awgn, gaussian_mmse
from partition_mmse.oracle import enumerate_posterior

ENUM = ExpectationConfig("enumerate_y")


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 4), q=st.integers(2, 3), m=st.integers(1, 2),
       r=st.integers(2, 3))
def test_fisher_plus_error_is_prior_covariance(seed, n, q, m, r):
    model = random_discrete_model(np.random.default_rng(seed), n, q, m, r)
    rep = mmse_all_formulas(model, ENUM)
    np.testing.assert_allclose(rep.fisher + rep.error_cov, rep.cov_x, atol=1e-8)
    np.testing.assert_allclose(rep.xi + rep.error_cov, rep.second_moment, atol=1e-8)
    assert rep.spread <= 1e-8


def test_matrix_helpers_agree_with_report(rng):
    model = random_discrete_model(rng, 2, 3, 2, 2)
    rep = mmse_all_formulas(model, ENUM)
    np.testing.assert_allclose(fisher_matrix(model, ENUM), rep.fisher, atol=1e-8)
    np.testing.assert_allclose(fisher_matrix_hessian_form(model, ENUM), rep.fisher, atol=1e-6)
    np.testing.assert_allclose(xi_matrix(model, ENUM), rep.xi, atol=1e-10)


def test_score_is_posterior_minus_prior_mean(rng):
    model = random_discrete_model(rng, 3, 2, 1, 3)
    y = np.array([1.0])
    mean_x, _ = prior_moments(model)
    np.testing.assert_allclose(score(model, y), enumerate_posterior(model, y).mean() - mean_x, atol=1e-8)


def test_log_theta_vanishes_at_zero_and_matches_prior(rng):
    model = random_discrete_model(rng, 2, 3, 1, 2)
    assert log_theta(model, np.zeros(2)) == pytest.approx(0.0, abs=1e-15)
    gauss = gaussian_awgn(2.0, 1.0)
    assert log_theta(gauss, [0.5]) == pytest.approx(0.5 * 2.0 * 0.25, abs=1e-10)


def test_information_density_averages_to_mutual_information():
    model = noiseless_binary(2)
    ens = TiltedEnsemble(model, np.zeros(2))
    # a noiseless uniform binary pair carries 2 ln 2 nats
    assert information_density(ens, [1.0, -1.0], [1.0, -1.0]) == pytest.approx(2 * np.log(2), abs=1e-12)


def test_information_density_forms(rng):
    model = random_discrete_model(rng, 2, 2, 1, 3)
    rep = mmse_all_formulas(model, ENUM)
    forms = information_density_formulas(model, ENUM)
    np.testing.assert_allclose(forms, rep.mmse, atol=1e-6)
    np.testing.assert_allclose(information_density_gradient_covariance(model, ENUM), rep.fisher, atol=1e-7)


def test_gaussian_four_formulas_by_quadrature():
    rep = mmse_all_formulas(gaussian_awgn(1.0, 2.0), ExpectationConfig("quadrature_y"))
    np.testing.assert_allclose(rep.formula_values, gaussian_mmse(1.0, 2.0), atol=1e-6)


def test_formula_disagreement_raised_on_tight_tolerance(rng):
    model = random_discrete_model(rng, 2, 2, 1, 2)
    with pytest.raises(FormulaDisagreement):
        mmse_all_formulas(model, ENUM, tolerance=-1.0)


def test_mismatch_reduction_and_excess(rng):
    letters = [-1.0, 2.0]
    P = random_discrete_model(rng, 3, 2, 1, 3, letters=letters)
    Q = random_discrete_model(rng, 3, 2, 1, 3, letters=letters)
    matched = float(mmse(P, ENUM).value)
    assert mismatched_mse(P, P, ENUM).mse == pytest.approx(matched, abs=1e-10)
    assert mismatched_mse(P, Q, ENUM).mse >= matched


def test_gaussian_mismatch_value():
    rep = mismatched_mse(gaussian_awgn(1.0, 1.0), gaussian_awgn(2.0, 1.0), ExpectationConfig("quadrature_y"))
    assert rep.mse == pytest.approx(5 / 9, abs=1e-8)


def test_mismatch_needs_shared_alphabet(rng):
    P = random_discrete_model(rng, 2, 2, 1, 2, letters=[-1.0, 1.0])
    Q = random_discrete_model(rng, 2, 2, 1, 2, letters=[0.0, 1.0])
    with pytest.raises(AlphabetMismatch):
        mismatched_mse(P, Q, ENUM)
