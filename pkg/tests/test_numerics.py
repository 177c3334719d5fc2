import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partition_mmse.errors import StepTooLarge
from partition_mmse.numerics import (DiffConfig, SignedLogValue, fd_gradient, fd_hessian, golden_newton, grid_maxima,
                                     log_cosh, log_quad, log_window_quad, richardson, window_integral)


def test_richardson_improves_central_difference():
    q = lambda h: (math.sin(1 + h) - math.sin(1 - h)) / (2 * h)  # noqa: E731
    plain, _ = richardson(q, 1e-2, 0)
    extrap, dis = richardson(q, 1e-2, 2)
    assert abs(extrap - math.cos(1)) < 1e-10 < abs(plain - math.cos(1))
    assert dis < 1e-6


def test_fd_gradient_and_hessian_of_quadratic():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    b = np.array([0.3, -0.7])
    f = lambda x: 0.5 * x @ A @ x + b @ x  # noqa: E731
    g, _ = fd_gradient(f, 2, DiffConfig())
    H, _ = fd_hessian(f, 2, DiffConfig())
    np.testing.assert_allclose(g, b, atol=1e-9)
    np.testing.assert_allclose(H, A, atol=1e-7)


def test_step_too_large_is_reported():
    cfg = DiffConfig(step=1.0, tolerance=1e-12)
    with pytest.raises(StepTooLarge):
        fd_gradient(lambda x: float(np.exp(5 * x[0])), 1, cfg)


def test_diff_config_rejects_bad_values():
    with pytest.raises(ValueError):
        DiffConfig(step=0.0)
    with pytest.raises(ValueError):
        DiffConfig(scheme="forward")


@pytest.mark.parametrize("shift", [0.0, 3.0, -250.0])
def test_log_quad_gaussian_integral(shift):
    logf = lambda x: -0.5 * (x - shift) ** 2 + 1000.0  # noqa: E731
    val = log_quad(logf, -math.inf, math.inf, guess=0.0)[0]
    assert val == pytest.approx(1000.0 + 0.5 * math.log(2 * math.pi), abs=1e-12)
    vec = lambda x: -0.5 * (np.asarray(x) - shift) ** 2 + 1000.0  # noqa: E731
    val2 = log_window_quad(vec, -math.inf, math.inf, guess=0.0)[0]
    assert val2 == pytest.approx(val, abs=1e-12)


def test_window_integral_moments():
    tot = window_integral(lambda x: -0.5 * x**2, -12, 12, 0.0, moments=lambda x: np.vstack([x, x**2]))
    mean, second = tot[1:] / tot[0]
    assert abs(mean) < 1e-14
    assert second == pytest.approx(1.0, abs=1e-13)


def test_log_cosh_large_arguments():
    x = np.array([0.0, 1.0, 800.0, -800.0])
    expected = [0.0, math.log(math.cosh(1.0)), 800 - math.log(2), 800 - math.log(2)]
    np.testing.assert_allclose(log_cosh(x), expected, rtol=1e-15, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e6, 1e6, allow_nan=False).filter(lambda v: abs(v) > 1e-300))
def test_signed_log_value_round_trip(x):
    assert float(SignedLogValue.from_float(x)) == pytest.approx(x, rel=1e-14)


def test_signed_log_value_from_parts():
    v = SignedLogValue.from_parts(math.log(3.0), math.log(5.0))
    assert v.sign == -1 and float(v) == pytest.approx(-2.0, rel=1e-14)
    assert SignedLogValue.from_parts(1.0, 1.0).sign == 0
    with pytest.raises(ValueError):
        SignedLogValue(0.0, 0)


def test_grid_maxima_and_golden_newton():
    f = lambda x: -((np.asarray(x) - 1.3) ** 2) * ((np.asarray(x) + 1.0) ** 2) + 0.1 * np.asarray(x)  # noqa: E731
    brackets = grid_maxima(f, -3, 3, 601)
    assert len(brackets) == 2
    a, b, c, _ = max(brackets, key=lambda br: br[3])
    x, _ = golden_newton(lambda t: float(f(t)), a, b, c)
    h = 1e-6
    assert abs(float(f(x + h) - f(x - h)) / (2 * h)) < 1e-6
    assert x > 1.0
