"""The tilted partition function ln Z(y, lam) and its derivatives at lam = 0.

Gradient of ln Z at zero tilt is the conditional mean E[X | y]; the Hessian is
the conditional covariance. Backends, in order of preference:

* a model-supplied ``log_partition_fn`` (structured 1-D representations),
* enumeration over a finite input alphabet (log-sum-exp),
* windowed Gauss-Legendre quadrature for a scalar continuous input.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from .base import ExpectationConfig, Estimate, FiniteAlphabet, Interval, JointModel
from .errors import DomainError, NonConvergent, StateSpaceTooLarge, ZeroProbability
from .numerics import DiffConfig, fd_gradient, fd_hessian, find_mode, log_window_quad, quad_moments, tail_bounds

__all__ = [
    "DiffConfig",
    "LogPartitionResult",
    "log_partition",
    "log_partition_result",
    "conditional_mean",
    "conditional_covariance",
    "expect",
    "mmse",
]


@dataclass
class LogPartitionResult:
    log_z: float
    gradient: np.ndarray
    hessian: np.ndarray
    method: str
    diagnostics: dict = field(default_factory=dict)


def _backend(model: JointModel) -> str:
    if model.log_partition_fn is not None:
        return "structured"
    if model.finite_input:
        return "enumeration"
    if isinstance(model.input_alphabet, Interval) and model.n == 1:
        return "quadrature"
    raise DomainError(
        f"no ln Z backend for a continuous {model.n}-dimensional input; supply log_partition_fn"
    )


def _scalar_log_integrand(model: JointModel, y: np.ndarray, lam: float) -> Callable[[np.ndarray], np.ndarray]:
    def g(x):
        X = np.asarray(x, dtype=float).reshape(-1, 1)
        v = lam * X[:, 0] + np.asarray(model.log_prior(X), float) + np.asarray(model.log_channel(X, y), float)
        return np.where(np.isnan(v), -np.inf, v)

    return g


def _centered_moments(x, mode):
    d = x - mode
    return np.vstack([d, d * d])


def _quad_guess(model: JointModel, y: np.ndarray) -> float:
    alpha = model.input_alphabet
    guess = float(y[0]) if model.m >= 1 else 0.0
    return min(max(guess, alpha.lo), alpha.hi)


def log_partition(model: JointModel, y, lam=None) -> float:
    """ln sum_x exp(lam.x) P(x) P(y|x) (an integral for continuous inputs).

    Returns -inf when every term vanishes; raises NonConvergent when the
    sum/integral diverges at this tilt.
    """
    y = model.check_y(y)
    lam = model.check_lambda(lam)
    kind = _backend(model)
    if kind == "structured":
        val = float(model.log_partition_fn(y, lam))
    elif kind == "enumeration":
        a = model.log_prior_states + np.asarray(model.log_channel(model.states, y), dtype=float)
        val = float(logsumexp(a + model.states @ lam))
    else:
        alpha = model.input_alphabet
        g = _scalar_log_integrand(model, y, float(lam[0]))
        val = log_window_quad(g, alpha.lo, alpha.hi, guess=_quad_guess(model, y), scale=1.0)[0]
    if math.isnan(val) or val == math.inf:
        raise NonConvergent(f"ln Z is {val} at lambda={lam}")
    return val


class _Tilt:
    """ln Z(y, lam) - ln Z(y, 0) for one observation, plus exact moments when a backend has them."""

    def __init__(self, model: JointModel, y: np.ndarray):
        self.model = model
        self.y = y
        self.kind = _backend(model)
        self.moments = None
        if self.kind == "enumeration":
            X = model.states
            a = model.log_prior_states + np.asarray(model.log_channel(X, y), dtype=float)
            self.log_z0 = float(logsumexp(a))
            if self.log_z0 == -math.inf:
                raise ZeroProbability("observation has zero probability (ln Z = -inf)")
            self._logpost = a - self.log_z0
            self._X = X
        elif self.kind == "quadrature":
            # one pass yields ln Z(y, 0) and the first two posterior moments
            alpha = model.input_alphabet
            g = _scalar_log_integrand(model, y, 0.0)
            self.log_z0, mode, _, _, mom = log_window_quad(g, alpha.lo, alpha.hi, _quad_guess(model, y), 1.0,
                                                           moments=_centered_moments)
            if self.log_z0 == -math.inf:
                raise ZeroProbability("observation has zero probability (ln Z = -inf)")
            m1, m2 = mom
            self.moments = (np.array([mode + m1]), np.array([[m2 - m1 * m1]]))
        else:
            self.log_z0 = log_partition(model, y)
            if self.log_z0 == -math.inf:
                raise ZeroProbability("observation has zero probability (ln Z = -inf)")

    def __call__(self, lam: np.ndarray) -> float:
        if self.kind == "enumeration":
            return float(logsumexp(self._logpost + self._X @ lam))
        return log_partition(self.model, self.y, lam) - self.log_z0

    def exact_moments(self):
        """(mean, covariance) from the posterior itself, or None if the backend has no exact route."""
        if self.moments is not None:
            return self.moments
        if self.kind == "enumeration":
            w = np.exp(self._logpost)
            mean = w @ self._X
            d = self._X - mean
            cov = (d * w[:, None]).T @ d
            self.moments = (mean, 0.5 * (cov + cov.T))
        return self.moments


@lru_cache(maxsize=1024)
def _cached_tilt(model: JointModel, key: bytes) -> _Tilt:
    return _Tilt(model, np.frombuffer(key, dtype=float).copy())


def _tilt(model, y):
    # expectations over y evaluate ln Z(y, 0) and the derivatives at the same points
    return _cached_tilt(model, model.check_y(y).tobytes())


def _gradient(t: _Tilt, cfg: DiffConfig):
    if cfg.scheme == "analytic_if_available":
        if t.kind == "structured" and t.model.conditional_mean_fn is not None:
            return np.asarray(t.model.conditional_mean_fn(t.y), dtype=float), "analytic", 0.0
        mom = t.exact_moments()
        if mom is not None:
            return mom[0], "analytic", 0.0
    grad, dis = fd_gradient(t, t.model.n, cfg)
    return grad, "central_difference", dis


def _hessian(t: _Tilt, cfg: DiffConfig):
    if cfg.scheme == "analytic_if_available":
        mom = t.exact_moments()
        if mom is not None:
            return mom[1], "analytic", 0.0
    hess, dis = fd_hessian(t, t.model.n, cfg)
    return 0.5 * (hess + hess.T), "central_difference", dis


def conditional_mean(model: JointModel, y, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """E[X | y] as the gradient of ln Z(y, lam) at lam = 0."""
    return _gradient(_tilt(model, y), cfg)[0]


def conditional_covariance(model: JointModel, y, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """Cov[X | y] as the Hessian of ln Z(y, lam) at lam = 0."""
    return _hessian(_tilt(model, y), cfg)[0]


def log_partition_result(model: JointModel, y, cfg: DiffConfig = DiffConfig()) -> LogPartitionResult:
    t = _tilt(model, y)
    grad, gm, gd = _gradient(t, cfg)
    hess, hm, hd = _hessian(t, cfg)
    # structured hooks are one-dimensional integral representations
    method = "enumeration" if t.kind == "enumeration" else "quadrature"
    return LogPartitionResult(
        t.log_z0, grad, hess, method,
        {"gradient_route": gm, "hessian_route": hm, "gradient_richardson_change": gd,
         "hessian_richardson_change": hd, "step": cfg.step, "hessian_step": cfg.hessian_step},
    )


# ------------------------------------------------------------ expectations


def output_states(model: JointModel) -> np.ndarray:
    alpha = model.output_alphabet
    if not isinstance(alpha, FiniteAlphabet):
        raise DomainError("enumerate_y needs a finite per-coordinate output alphabet")
    return alpha.states(model.m)


def expect(model: JointModel, fn: Callable[[np.ndarray], np.ndarray], expectation: ExpectationConfig,
           stream: int = 0) -> Estimate:
    """E over Y ~ P(y) of a vector-valued function of the observation."""
    strat = expectation.strategy
    if strat == "enumerate_y":
        ys = output_states(model)
        joint = len(ys) * (model.state_count() if model.finite_input else 1)
        if joint > expectation.joint_cap:
            raise StateSpaceTooLarge(f"{joint} joint states exceeds cap {expectation.joint_cap}; use monte_carlo")
        logp = np.array([log_partition(model, y) for y in ys])
        keep = np.isfinite(logp)
        if not keep.any():
            raise ZeroProbability("every output has zero probability")
        w = np.exp(logp[keep] - logsumexp(logp[keep]))
        vals = np.array([np.atleast_1d(fn(y)) for y in ys[keep]], dtype=float)
        return Estimate(w @ vals, np.zeros(vals.shape[1]), "enumerate_y", len(w))

    if strat == "quadrature_y":
        if model.m != 1 or not isinstance(model.output_alphabet, Interval):
            raise DomainError("quadrature_y handles a scalar continuous output only")
        alpha = model.output_alphabet
        def lp(v):
            try:
                return _tilt(model, [v]).log_z0
            except ZeroProbability:
                return -math.inf
        mode, peak = find_mode(lp, alpha.lo, alpha.hi, 0.0, 1.0)
        a, b = tail_bounds(lp, mode, peak, alpha.lo, alpha.hi, 1.0)

        def integrand(v):
            w = math.exp(lp(v) - peak)
            return np.concatenate([[w], w * np.atleast_1d(fn(np.array([v])))])

        tot = quad_moments(integrand, a, b, points=[mode], epsrel=1e-9)
        vals = tot[1:] / tot[0]
        return Estimate(vals, np.zeros_like(vals), "quadrature_y", 0)

    if strat == "monte_carlo":
        if model.sampler is None:
            raise DomainError("monte_carlo needs a model sampler")
        s1 = s2 = None
        count = 0
        for size, rng in expectation.chunk_generators(stream):
            _, ys = model.sampler(rng, size)
            vals = np.array([np.atleast_1d(fn(y)) for y in ys], dtype=float)
            s1 = vals.sum(axis=0) if s1 is None else s1 + vals.sum(axis=0)
            s2 = (vals**2).sum(axis=0) if s2 is None else s2 + (vals**2).sum(axis=0)
            count += size
        mean = s1 / count
        var = np.maximum(s2 / count - mean**2, 0.0) * count / max(count - 1, 1)
        return Estimate(mean, np.sqrt(var / count), "monte_carlo", count)

    raise DomainError(f"unknown expectation strategy {strat!r}")


def mmse(model: JointModel, expectation: ExpectationConfig, cfg: DiffConfig = DiffConfig()) -> Estimate:
    """Trace of E[Cov(X | Y)]; a Monte Carlo strategy also reports its standard error."""
    est = expect(model, lambda y: [np.trace(conditional_covariance(model, y, cfg))], expectation)
    return Estimate(float(est.value[0]), None if est.stderr is None else float(est.stderr[0]), est.method, est.samples)
