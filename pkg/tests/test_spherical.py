import dataclasses
import json
import math
from pathlib import Path

import numpy as np
import pytest

from partition_mmse.errors import ConfigError, FlatMaximum, SignCancellation
from partition_mmse.models.cauchy import CauchyModel, cauchy_conditional_mean, cauchy_log_partition, cauchy_saddle_t
from partition_mmse.oracle import enumerate_posterior
from partition_mmse.spherical import (Bump, GammaDensity, SineKernel, SphericalKernel, SquaredDifference,
                                      TabulatedMixing, build_kernel, cauchy_kernel, load_kernel, mixture_log_density,
                                      sample_outputs_given_t, spherical_estimator, spherical_exact_mean,
                                      spherical_joint_model, spherical_log_partition, spherical_saddle_t,
                                      spherical_single_letter_mmse)

KERNELS = Path(__file__).resolve().parents[1] / "configs" / "kernels"


@pytest.fixture
def cauchy_pair(rng):
    model = CauchyModel(3, 1.0, 6.0)
    _, Y = model.sample(rng, 3)
    return model, cauchy_kernel(3, 6.0, 1.0), Y


def test_cauchy_kernel_reproduces_t_integral(cauchy_pair, rng):
    model, kernel, Y = cauchy_pair
    for y in Y:
        lam = 0.3 * rng.normal(size=3)
        v = spherical_log_partition(kernel, y, lam)
        assert v.sign == 1
        assert v.log_magnitude == pytest.approx(cauchy_log_partition(model, y, lam), abs=1e-10)
        np.testing.assert_allclose(spherical_exact_mean(kernel, y), cauchy_conditional_mean(model, y), atol=1e-10)
        assert spherical_saddle_t(kernel, y).argmax == pytest.approx(cauchy_saddle_t(model, y).argmax, rel=1e-8)


def test_kernel_file_matches_builder():
    from_file = load_kernel(KERNELS / "cauchy_n50.json")
    built = cauchy_kernel(50, 30.0, 1.0)
    assert from_file.f.log_scale == pytest.approx(built.f.log_scale, abs=1e-12)
    assert from_file.base_variance == built.base_variance


@pytest.mark.parametrize("x,y", [(0.0, 0.0), (1.0, -2.0), (3.5, 0.2)])
def test_sine_kernel_signed_quadrature(x, y):
    kernel = load_kernel(KERNELS / "sine_toy.json")
    s = (y - x) ** 2 + 0.5
    assert float(mixture_log_density(kernel, [x], [y])) == pytest.approx(1.5 / (s * s + 2.25), rel=1e-10)


def test_bump_transform():
    kernel = SphericalKernel(1, SquaredDifference(shift=0.2), Bump(2.0, 0.3))
    lf, _ = kernel.f.log_laplace(0.2 + 0.49)
    assert float(mixture_log_density(kernel, [0.3], [1.0])) == pytest.approx(math.exp(float(lf)), rel=1e-10)


def test_gamma_transform():
    f = GammaDensity(3.0, 2.0, 0.5)
    kernel = SphericalKernel(1, SquaredDifference(), f)
    s = 1.7**2
    assert float(mixture_log_density(kernel, [0.0], [1.7])) == pytest.approx(math.exp(0.5) * (1 + s / 2) ** -3,
                                                                             rel=1e-10)


def test_exact_cancellation_is_refused():
    kernel = SphericalKernel(1, SquaredDifference(), TabulatedMixing((1.0, 2.0), (1.0, -1.0)))
    with pytest.raises(SignCancellation):
        mixture_log_density(kernel, [0.0], [0.0])


def test_finite_kernel_mean_matches_enumeration(rng):
    kernel = dataclasses.replace(load_kernel(KERNELS / "binary_product.json"), n=8)
    joint = spherical_joint_model(kernel)
    for _ in range(3):
        y = rng.choice([-1.0, 1.0], 8)
        np.testing.assert_allclose(spherical_exact_mean(kernel, y), enumerate_posterior(joint, y).mean(), atol=1e-12)


def test_tabulated_phi_kernel_matches_enumeration():
    spec = {"n": 5, "phi": {"name": "tabulated", "x": [0, 1, 2], "y": [0, 1],
                            "values": [[0.0, 1.0], [0.5, 0.2], [1.5, 0.0]]},
            "f": {"name": "gamma_density", "k": 4, "rate": 2},
            "x_letters": [0, 1, 2], "y_letters": [0, 1]}
    kernel = build_kernel(spec)
    y = np.array([1.0, 0.0, 1.0, 1.0, 0.0])
    np.testing.assert_allclose(spherical_exact_mean(kernel, y),
                               enumerate_posterior(spherical_joint_model(kernel), y).mean(), atol=1e-12)


def test_saddle_estimator_at_n_200(rng):
    kernel = load_kernel(KERNELS / "binary_product.json")
    Y = sample_outputs_given_t(kernel, rng, 1.0, 2)
    for y in Y:
        exact = spherical_exact_mean(kernel, y)
        approx = spherical_estimator(kernel, y)
        assert np.linalg.norm(approx - exact) / np.linalg.norm(exact) < 0.02
        with pytest.raises(FlatMaximum):
            spherical_estimator(kernel, y, min_curvature=1e9)


def test_single_letter_mmse_binary_kernel():
    kernel = load_kernel(KERNELS / "binary_product.json")
    res = spherical_single_letter_mmse(kernel)
    # x is +-1, so E x^2 = 1; the MMSE is below the prior variance 1 - 0.4^2
    assert res.second_moment == pytest.approx(1.0, abs=1e-10)
    assert 0.0 < res.mmse < 0.84


@pytest.mark.parametrize("spec,message", [
    ({"n": 1, "phi": {"name": "cosine"}, "f": {"name": "gamma_density", "k": 2}}, "unknown phi"),
    ({"n": 1, "phi": {"name": "squared_difference"}, "f": {"name": "expression", "id": "tan"}}, "unknown expression"),
    ({"n": 1, "phi": {"name": "squared_difference"}}, "needs n, phi and f"),
    ({"n": 1, "phi": {"name": "squared_difference"}, "f": {"name": "table", "t": [0, 1], "f": [1, 1]}}, "positive"),
])
def test_kernel_description_errors(spec, message):
    with pytest.raises(ConfigError, match=message):
        build_kernel(spec)


def test_kernel_file_errors(tmp_path):
    bad = tmp_path / "k.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_kernel(bad)
    good = tmp_path / "g.json"
    good.write_text(json.dumps({"n": 1, "phi": {"name": "squared_difference"}, "f": {"name": "expression",
                                                                                    "id": "sin", "alpha": 2.0}}))
    assert isinstance(load_kernel(good).f, SineKernel)
