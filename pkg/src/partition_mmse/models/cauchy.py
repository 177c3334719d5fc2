"""Gaussian source observed through generalized multivariate Cauchy noise.

X ~ N(0, sigma2 I_n),  P(y|x) = C_{n,k} / (1 + ||y - x||^2)^k,  k > n/2 + 1.

Writing (1 + s)^{-k} = int t^{k-1} e^{-t(1+s)} dt / Gamma(k) makes the model a
mixture over t of Gaussian channels with noise variance 1/(2t). Given t the
posterior of each x_i is Gaussian, so ln Z reduces to one integral over t,
done here in u = ln t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ..base import Interval, JointModel, SaddleSolution
from ..errors import DomainError, FlatMaximum, InvalidTailExponent
from ..numerics import golden_newton, grid_maxima, log_window_quad

MIN_CURVATURE = 10.0


@dataclass(frozen=True)
class CauchyModel:
    n: int
    sigma2: float = 1.0
    k: float = 5.0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be positive")
        if not self.sigma2 > 0:
            raise DomainError("sigma2 must be positive")
        if not self.k > self.n / 2 + 1:
            raise InvalidTailExponent(f"k = {self.k} must exceed n/2 + 1 = {self.n / 2 + 1} for finite second moments")

    @property
    def log_const(self) -> float:
        """ln C_{n,k} = ln Gamma(k) - (n/2) ln pi - ln Gamma(k - n/2)."""
        return float(gammaln(self.k) - 0.5 * self.n * math.log(math.pi) - gammaln(self.k - 0.5 * self.n))

    @property
    def half_precision(self) -> float:
        """1 / (2 sigma2)."""
        return 0.5 / self.sigma2

    def log_prior(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return -0.5 * np.sum(X**2, axis=1) / self.sigma2 - 0.5 * X.shape[1] * math.log(2 * math.pi * self.sigma2)

    def log_channel(self, X, y) -> np.ndarray:
        return self.log_const - self.k * np.log1p(np.sum((np.asarray(y, float) - np.atleast_2d(X)) ** 2, axis=1))

    def sample(self, rng: np.random.Generator, size: int):
        """X Gaussian; noise is N(0, I/(2T)) with T ~ Gamma(k - n/2, 1)."""
        X = rng.normal(0.0, math.sqrt(self.sigma2), size=(size, self.n))
        T = rng.gamma(self.k - 0.5 * self.n, 1.0, size=size)
        Z = rng.standard_normal((size, self.n)) / np.sqrt(2 * T)[:, None]
        return X, X + Z


def _log_t_integrand(model: CauchyModel, y: np.ndarray, lam: np.ndarray):
    """ln of the u = ln t integrand, without the constant ln C_{n,k} - ln Gamma(k)."""
    n, s2, k, h = model.n, model.sigma2, model.k, model.half_precision
    S = float(y @ y)
    ly = float(lam @ y)
    ll = float(lam @ lam)

    def f(u):
        u = np.asarray(u, float)
        t = np.exp(u)
        # -t S + sum (t y_i + lam_i/2)^2 / (t + h), rearranged to avoid cancellation
        quad = (t * ly + 0.25 * ll - t * h * S) / (t + h)
        return k * u - t - 0.5 * n * np.log1p(2 * t * s2) + quad

    return f


def cauchy_log_partition(model: CauchyModel, y, lam=None) -> float:
    """ln Z(y, lam) = ln C_{n,k} - ln Gamma(k)
    + ln int t^{k-1} e^{-t} (1 + 2 t sigma2)^{-n/2} exp{-t S + sum (t y_i + lam_i/2)^2 / (t + 1/(2 sigma2))} dt

    with S = sum y_i^2 (the Gaussian prior's normalization is absorbed).
    """
    y = np.asarray(y, float).reshape(model.n)
    lam = np.zeros(model.n) if lam is None else np.asarray(lam, float).reshape(model.n)
    f = _log_t_integrand(model, y, lam)
    val = log_window_quad(f, -math.inf, math.inf, guess=math.log(model.k), scale=1.0)[0]
    return model.log_const - float(gammaln(model.k)) + val


def cauchy_conditional_mean(model: CauchyModel, y, lam=None) -> np.ndarray:
    """E[X | y] = E_t[(2 t y + lam) / (2 (t + 1/(2 sigma2)))] under the posterior of t."""
    y = np.asarray(y, float).reshape(model.n)
    lam = np.zeros(model.n) if lam is None else np.asarray(lam, float).reshape(model.n)
    h = model.half_precision
    f = _log_t_integrand(model, y, lam)
    mom = lambda u, mode: np.vstack([np.exp(u) / (np.exp(u) + h), 1.0 / (np.exp(u) + h)])  # noqa: E731
    _, _, _, _, (shrink, inv) = log_window_quad(f, -math.inf, math.inf, guess=math.log(model.k), scale=1.0,
                                                moments=mom)
    return shrink * y + 0.5 * inv * lam


def cauchy_saddle_objective(model: CauchyModel, S: float):
    """(J, dJ/dt) with J(t) = (k-1) ln t - t - (n/2) ln(1 + 2 t sigma2) - t S / (1 + 2 t sigma2)."""
    n, s2, k = model.n, model.sigma2, model.k

    def J(t):
        return (k - 1) * np.log(t) - t - 0.5 * n * np.log1p(2 * t * s2) - t * S / (1 + 2 * t * s2)

    def dJ(t):
        q = 1 + 2 * t * s2
        return (k - 1) / t - 1 - n * s2 / q - S / q**2

    return J, dJ


def cauchy_saddle_t(model: CauchyModel, y) -> SaddleSolution:
    """t-hat maximizing J(t); the curvature reported is -d^2 J / d(ln t)^2 at the maximum."""
    y = np.asarray(y, float).reshape(model.n)
    S = float(y @ y)
    J, dJ = cauchy_saddle_objective(model, S)
    Ju = lambda u: float(J(math.exp(u)))  # noqa: E731
    dJu = lambda u: math.exp(u) * float(dJ(math.exp(u)))  # noqa: E731
    brackets = grid_maxima(lambda u: J(np.exp(u)), -30.0, math.log(10 * model.k + 10) + 5.0, 801)
    if not brackets:
        raise FlatMaximum("no interior maximum of the t objective")
    a, b, c, _ = max(brackets, key=lambda br: br[3])
    u, iters = golden_newton(Ju, a, b, c, df=dJu)
    t = math.exp(u)
    q = 1 + 2 * t * model.sigma2
    d2 = -(model.k - 1) / t**2 + 2 * model.n * model.sigma2**2 / q**2 + 4 * model.sigma2 * S / q**3
    curvature = -(t * t * d2 + t * float(dJ(t)))
    return SaddleSolution(t, float(J(t)), iters, True, "unique", (), curvature, abs(float(dJ(t))))


def cauchy_saddle_estimator(model: CauchyModel, y, min_curvature: float = MIN_CURVATURE) -> np.ndarray:
    """t-hat y_i / (t-hat + 1/(2 sigma2)); refuses when the t integral is not peaked."""
    sol = cauchy_saddle_t(model, y)
    if sol.curvature < min_curvature:
        raise FlatMaximum(f"curvature {sol.curvature:.3g} in ln t is below {min_curvature:g}")
    t = sol.argmax
    return t / (t + model.half_precision) * np.asarray(y, float)


def cauchy_joint_model(model: CauchyModel) -> JointModel:
    return JointModel(
        model.n, model.n, Interval(), model.log_prior, model.log_channel, output_alphabet=Interval(),
        sampler=model.sample,
        log_partition_fn=lambda y, lam: cauchy_log_partition(model, y, lam),
        conditional_mean_fn=lambda y: cauchy_conditional_mean(model, y),
        log_theta_fn=lambda lam: 0.5 * model.sigma2 * float(np.dot(lam, lam)),
        name=f"cauchy(n={model.n},k={model.k:g})",
    )
