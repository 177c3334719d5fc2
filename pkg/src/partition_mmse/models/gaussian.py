"""Gaussian source over an additive white Gaussian noise channel."""
from __future__ import annotations

import math

import numpy as np

from ..base import Interval, JointModel
from ..errors import DomainError


def wiener_coefficient(power: float, beta: float) -> float:
    """E[X|y] / y for X ~ N(0, power) and noise variance 1/beta."""
    return power / (power + 1.0 / beta)


def gaussian_mmse(power: float, beta: float) -> float:
    return power / (1.0 + beta * power)


def gaussian_awgn(power: float = 1.0, beta: float = 1.0, n: int = 1, closed_form: bool = False) -> JointModel:
    """X ~ N(0, power I_n), Y = X + N(0, I_n / beta).

    With ``closed_form`` the model carries exact ln Z, conditional-mean and
    ln Theta hooks; otherwise ln Z is obtained by quadrature (n = 1 only).
    """
    if power <= 0 or beta <= 0:
        raise DomainError("power and beta must be positive")
    if n > 1 and not closed_form:
        raise DomainError("continuous quadrature is one-dimensional; pass closed_form=True for n > 1")
    s = 1.0 / beta
    coef = wiener_coefficient(power, beta)
    post_var = power * s / (power + s)

    def log_prior(X):
        X = np.atleast_2d(X)
        return -0.5 * np.sum(X**2, axis=1) / power - 0.5 * X.shape[1] * math.log(2 * math.pi * power)

    def log_channel(X, y):
        X = np.atleast_2d(X)
        return -0.5 * beta * np.sum((y - X) ** 2, axis=1) + 0.5 * X.shape[1] * math.log(beta / (2 * math.pi))

    def sampler(rng, size):
        X = rng.normal(0.0, math.sqrt(power), size=(size, n))
        return X, X + rng.normal(0.0, math.sqrt(s), size=(size, n))

    hooks = {}
    if closed_form:
        def log_partition_fn(y, lam):
            v = power + s
            marg = -0.5 * np.sum(y**2) / v - 0.5 * n * math.log(2 * math.pi * v)
            return float(marg + lam @ (coef * y) + 0.5 * post_var * lam @ lam)

        hooks = dict(
            log_partition_fn=log_partition_fn,
            conditional_mean_fn=lambda y: coef * np.asarray(y, float),
            log_theta_fn=lambda lam: 0.5 * power * float(lam @ lam),
        )
    return JointModel(n, n, Interval(), log_prior, log_channel, output_alphabet=Interval(), sampler=sampler,
                      name=f"gaussian_awgn(P={power:g},beta={beta:g})", **hooks)
