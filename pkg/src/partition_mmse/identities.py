"""Information-measure identities around ln Z.

With Theta(lam) the prior moment generating function and P_lam(y) the output
law induced by the tilted source e^{lam.x} P(x) / Theta(lam):

    E   = E[Cov(X|Y)]            (error covariance)
    J   = Cov(X) - E             (Fisher information about lam carried by Y)
    Xi  = E[grad lnZ grad lnZ^T] = J + E[X] E[X]^T = E[X X^T] - E
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from . import core
from .base import ExpectationConfig, Estimate, FiniteAlphabet, FiniteSupport, Interval, JointModel
from .errors import AlphabetMismatch, DomainError, FormulaDisagreement, ZeroMarginal, ZeroProbability
from .numerics import DiffConfig, fd_gradient, fd_hessian, log_window_quad

ENUMERATION_TOLERANCE = 1e-8
QUADRATURE_TOLERANCE = 1e-6


def _log_prior_norm(model: JointModel) -> float:
    """ln of the prior's total mass (0 for structured models, which must be normalized)."""
    if model.finite_input:
        return float(logsumexp(model.log_prior_states))
    if model.log_theta_fn is not None or model.log_partition_fn is not None:
        return 0.0
    alpha = model.input_alphabet
    return log_window_quad(_vec_prior(model), alpha.lo, alpha.hi)[0]


def _vec_prior(model: JointModel, lam: float = 0.0):
    return lambda x: np.asarray(model.log_prior(np.reshape(x, (-1, 1))), float) + lam * np.asarray(x)


def log_theta(model: JointModel, lam) -> float:
    """ln sum_x P(x) exp(lam.x) with P normalized; zero at lam = 0."""
    lam = model.check_lambda(lam)
    if model.log_theta_fn is not None:
        return float(model.log_theta_fn(lam))
    if model.finite_input:
        lp = model.log_prior_states
        return float(logsumexp(lp + model.states @ lam) - logsumexp(lp))
    if isinstance(model.input_alphabet, Interval) and model.n == 1:
        alpha = model.input_alphabet
        return log_window_quad(_vec_prior(model, lam[0]), alpha.lo, alpha.hi)[0] - _log_prior_norm(model)
    raise DomainError("log_theta needs a finite alphabet, a scalar interval, or a log_theta_fn hook")


def prior_moments(model: JointModel, cfg: DiffConfig = DiffConfig()):
    """(E[X], Cov[X]) as the gradient and Hessian of ln Theta at zero."""
    if model.finite_input:
        lp = model.log_prior_states
        w = np.exp(lp - logsumexp(lp))
        mean = w @ model.states
        d = model.states - mean
        return mean, (d * w[:, None]).T @ d
    if model.log_theta_fn is None and isinstance(model.input_alphabet, Interval) and model.n == 1:
        alpha = model.input_alphabet
        _, mode, _, _, (m1, m2) = log_window_quad(_vec_prior(model), alpha.lo, alpha.hi,
                                                  moments=lambda x, c: np.vstack([x - c, (x - c) ** 2]))
        return np.array([mode + m1]), np.array([[m2 - m1 * m1]])
    f = lambda lam: log_theta(model, lam)  # noqa: E731
    grad, _ = fd_gradient(f, model.n, cfg)
    hess, _ = fd_hessian(f, model.n, cfg)
    return grad, 0.5 * (hess + hess.T)


@dataclass(frozen=True, eq=False)
class TiltedEnsemble:
    """The source reweighted by e^{lam.x}/Theta(lam), with the output law it induces."""

    base: JointModel
    lam: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lam", self.base.check_lambda(self.lam))

    @cached_property
    def log_theta(self) -> float:
        return log_theta(self.base, self.lam)

    @cached_property
    def _log_norm(self) -> float:
        return _log_prior_norm(self.base)

    def log_prior(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.asarray(self.base.log_prior(X), float) - self._log_norm + X @ self.lam - self.log_theta

    def log_marginal(self, y) -> float:
        """ln P_lam(y)."""
        y = self.base.check_y(y)
        if self.base.finite_input:
            X = self.base.states
            return float(logsumexp(self.log_prior(X) + np.asarray(self.base.log_channel(X, y), float)))
        return core.log_partition(self.base, y, self.lam) - self._log_norm - self.log_theta


def information_density(ensemble: TiltedEnsemble, x, y) -> float:
    """i_lam(x; y) = ln P(y|x) - ln P_lam(y), in nats."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    y = ensemble.base.check_y(y)
    lm = ensemble.log_marginal(y)
    if lm == -math.inf:
        raise ZeroMarginal("P_lam(y) = 0; information density undefined")
    return float(ensemble.base.log_channel(X, y)[0]) - lm


class _TiltedMarginal:
    """lam -> ln P_lam(y) - ln P(y) for a fixed y, built by tilting the prior.

    For finite inputs, P_lam(y) / P(y) = E[e^{lam.X} | y] / E[e^{lam.X}], so the
    value is the difference of two cumulant generators. Each is evaluated
    around its own mean, which keeps the terms O(|lam|^2) and the round-off
    relative rather than absolute.
    """

    def __init__(self, model: JointModel, y: np.ndarray):
        self.model = model
        self.y = y
        self.base = 0.0
        if model.finite_input:
            X = model.states
            lp = model.log_prior_states - logsumexp(model.log_prior_states)
            lj = lp + np.asarray(model.log_channel(X, y), float)
            ev = logsumexp(lj)
            if ev == -math.inf:
                raise ZeroMarginal("P(y) = 0")
            keep = lj > -math.inf
            w_post = np.exp(lj[keep] - ev)
            w_prior = np.exp(lp)
            self._post = (X[keep], w_post / w_post.sum())
            self._prior = (X, w_prior / w_prior.sum())
            self._mu_post = self._post[1] @ self._post[0]
            self._mu_prior = self._prior[1] @ X
        else:
            self.base = TiltedEnsemble(model, np.zeros(model.n)).log_marginal(y)
            if self.base == -math.inf:
                raise ZeroMarginal("P(y) = 0")

    @staticmethod
    def _centered_cgf(X, w, mu, lam):
        a = (X - mu) @ lam
        top = a.max()
        if top > 1.0:
            return float(logsumexp(a, b=w))
        # log1p/expm1 keep full relative precision when every exponent is small
        return math.log1p(float(w @ np.expm1(a)))

    def __call__(self, lam):
        if self.model.finite_input:
            return (self._centered_cgf(*self._post, self._mu_post, lam)
                    - self._centered_cgf(*self._prior, self._mu_prior, lam)
                    + float(lam @ (self._mu_post - self._mu_prior)))
        return TiltedEnsemble(self.model, lam).log_marginal(self.y) - self.base


def score(model: JointModel, y, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """Gradient at lam = 0 of ln P_lam(y) (finite differences of the tilted marginal)."""
    return fd_gradient(_TiltedMarginal(model, model.check_y(y)), model.n, cfg)[0]


def _default_tolerance(expectation: ExpectationConfig) -> float:
    return QUADRATURE_TOLERANCE if expectation.strategy == "quadrature_y" else ENUMERATION_TOLERANCE


def fisher_matrix(model: JointModel, expectation: ExpectationConfig, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """J = E[score score^T] at lam = 0."""
    n = model.n
    est = core.expect(model, lambda y: np.outer(s := score(model, y, cfg), s).ravel(), expectation)
    J = est.value.reshape(n, n)
    return 0.5 * (J + J.T)


def fisher_matrix_hessian_form(model: JointModel, expectation: ExpectationConfig,
                               cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """-E[Hessian of ln P_lam(Y)] at lam = 0; equals the outer-product form."""
    n = model.n

    def fn(y):
        h, _ = fd_hessian(_TiltedMarginal(model, model.check_y(y)), n, cfg)
        return -h.ravel()

    J = core.expect(model, fn, expectation).value.reshape(n, n)
    return 0.5 * (J + J.T)


def xi_matrix(model: JointModel, expectation: ExpectationConfig, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """Xi = E[grad lnZ(Y) grad lnZ(Y)^T] at lam = 0."""
    n = model.n
    est = core.expect(model, lambda y: np.outer(g := core.conditional_mean(model, y, cfg), g).ravel(), expectation)
    Xi = est.value.reshape(n, n)
    return 0.5 * (Xi + Xi.T)


@dataclass
class MmseReport:
    formula_values: np.ndarray  # the four total-MMSE expressions, in order
    fisher: np.ndarray
    xi: np.ndarray
    cov_x: np.ndarray
    error_cov: np.ndarray
    mean_x: np.ndarray
    spread: float
    stderr: np.ndarray
    tolerance: float
    method: str
    extras: dict = field(default_factory=dict)

    @property
    def mmse(self) -> float:
        return float(self.formula_values[0])

    @property
    def second_moment(self) -> np.ndarray:
        return self.cov_x + np.outer(self.mean_x, self.mean_x)


_PAIRS = list(itertools.combinations(range(4), 2))


def mmse_all_formulas(model: JointModel, expectation: ExpectationConfig, cfg: DiffConfig = DiffConfig(),
                      tolerance: Optional[float] = None, check: bool = True) -> MmseReport:
    """Evaluate the four total-MMSE expressions and their ingredient matrices.

    1. sum_i E[d2 lnZ / dlam_i^2]
    2. sum_i Var(X_i) + E[d2 ln P_lam(Y) / dlam_i^2]
    3. sum_i Var(X_i) - E[(d ln P_lam(Y) / dlam_i)^2]
    4. sum_i E[X_i^2] - E[(d lnZ / dlam_i)^2]

    Raises FormulaDisagreement when they spread further apart than the tolerance
    (absolute for exact strategies, three standard errors for Monte Carlo).
    """
    n = model.n
    mean_x, cov_x = prior_moments(model, cfg)
    var_sum = float(np.trace(cov_x))
    ex2_sum = var_sum + float(mean_x @ mean_x)

    def fn(y):
        y = model.check_y(y)
        g = core.conditional_mean(model, y, cfg)
        C = core.conditional_covariance(model, y, cfg)
        tm = _TiltedMarginal(model, y)
        s, _ = fd_gradient(tm, n, cfg)
        d2, _ = fd_hessian(tm, n, cfg, diagonal_only=True)
        f = np.array([np.trace(C), var_sum + d2.sum(), var_sum - s @ s, ex2_sum - g @ g])
        diffs = np.array([f[i] - f[j] for i, j in _PAIRS])
        return np.concatenate([np.outer(g, g).ravel(), C.ravel(), np.outer(s, s).ravel(), f, diffs])

    est = core.expect(model, fn, expectation)
    v, se = est.value, est.stderr
    k = n * n
    xi = v[:k].reshape(n, n)
    E = v[k:2 * k].reshape(n, n)
    J = v[2 * k:3 * k].reshape(n, n)
    formulas = v[3 * k:3 * k + 4]
    diffs = v[3 * k + 4:]
    f_se = se[3 * k:3 * k + 4] if se is not None else np.zeros(4)
    d_se = se[3 * k + 4:] if se is not None else np.zeros(len(_PAIRS))
    spread = float(formulas.max() - formulas.min())
    if est.method == "monte_carlo":
        tol = tolerance if tolerance is not None else 3.0
        bad = np.abs(diffs) > tol * d_se + 1e-12
    else:
        tol = tolerance if tolerance is not None else _default_tolerance(expectation)
        bad = np.array([spread > tol])
    report = MmseReport(formulas, 0.5 * (J + J.T), 0.5 * (xi + xi.T), cov_x, 0.5 * (E + E.T), mean_x,
                        spread, f_se, tol, est.method, {"pair_differences": diffs, "pair_stderr": d_se})
    if check and bad.any():
        raise FormulaDisagreement(f"MMSE formulas disagree: {formulas} (spread {spread:.3g})", report)
    return report


# ------------------------------------------------ information-density forms


def _expect_joint(model: JointModel, fn, expectation: ExpectationConfig) -> Estimate:
    """E over (X, Y) ~ P of fn(x, y)."""
    if expectation.strategy == "enumerate_y":
        if not model.finite_input:
            raise DomainError("joint enumeration needs a finite input alphabet")
        X = model.states
        lp = model.log_prior_states - logsumexp(model.log_prior_states)
        total = None
        for y in core.output_states(model):
            lj = lp + np.asarray(model.log_channel(X, y), float)
            for k in np.flatnonzero(lj > -math.inf):
                val = math.exp(lj[k]) * np.atleast_1d(fn(X[k], y))
                total = val if total is None else total + val
        return Estimate(total, np.zeros_like(total), "enumerate_y", 0)
    if expectation.strategy == "monte_carlo":
        vals = []
        for size, rng in expectation.chunk_generators(stream=11):
            xs, ys = model.sampler(rng, size)
            vals.extend(np.atleast_1d(fn(x, y)) for x, y in zip(xs, ys))
        vals = np.array(vals)
        return Estimate(vals.mean(axis=0), vals.std(axis=0, ddof=1) / math.sqrt(len(vals)), "monte_carlo", len(vals))
    raise DomainError("joint expectations support enumerate_y and monte_carlo")


def _density_fn(model, x, y):
    X = np.atleast_2d(x)
    return lambda lam: information_density(TiltedEnsemble(model, lam), X, y)


def information_density_formulas(model: JointModel, expectation: ExpectationConfig,
                                 cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """MMSE formulas 2 and 3 with ln P_lam(Y) replaced by the information density i_lam(X; Y).

    Because P(y|x) carries no tilt, d i_lam = -d ln P_lam(y): formula 3 is
    unchanged under the swap, while formula 2 changes the sign of its
    second-derivative term.
    """
    n = model.n
    var_sum = float(np.trace(prior_moments(model, cfg)[1]))

    def fn(x, y):
        f = _density_fn(model, x, y)
        g, _ = fd_gradient(f, n, cfg)
        d2, _ = fd_hessian(f, n, cfg, diagonal_only=True)
        return np.array([var_sum - d2.sum(), var_sum - g @ g])

    return _expect_joint(model, fn, expectation).value


def information_density_gradient_covariance(model: JointModel, expectation: ExpectationConfig,
                                            cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """Cov over (X, Y) of the lam-gradient of i_lam(X; Y) at zero; equals J."""
    n = model.n

    def fn(x, y):
        g, _ = fd_gradient(_density_fn(model, x, y), n, cfg)
        return np.concatenate([g, np.outer(g, g).ravel()])

    v = _expect_joint(model, fn, expectation).value
    m = v[:n]
    C = v[n:].reshape(n, n) - np.outer(m, m)
    return 0.5 * (C + C.T)


# ------------------------------------------------------------- mismatch


@dataclass
class MismatchReport:
    mse: float
    error_cov: np.ndarray
    stderr: float
    method: str


def _same_alphabet(a, b) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, FiniteSupport):
        return a.points.shape == b.points.shape and np.array_equal(a.points, b.points)
    return a == b


def mismatched_mse(true_model: JointModel, assumed_model: JointModel, expectation: ExpectationConfig,
                   cfg: DiffConfig = DiffConfig()) -> MismatchReport:
    """Error covariance and MSE of the conditional mean computed under an assumed law Q,
    with expectations under the true law P:

        E_P[XX^T] - E_P[g_P g_Q^T] - E_P[g_Q g_P^T] + E_P[g_Q g_Q^T],   g = grad lnZ at 0.
    """
    if (true_model.n, true_model.m) != (assumed_model.n, assumed_model.m):
        raise AlphabetMismatch("true and assumed models differ in dimensions")
    if not _same_alphabet(true_model.input_alphabet, assumed_model.input_alphabet):
        raise AlphabetMismatch("true and assumed models have different input alphabets")
    if not _same_alphabet(true_model.output_alphabet, assumed_model.output_alphabet):
        raise AlphabetMismatch("true and assumed models have different output alphabets")
    n = true_model.n
    mean_x, cov_x = prior_moments(true_model, cfg)
    exx = cov_x + np.outer(mean_x, mean_x)
    tr_exx = float(np.trace(exx))

    def fn(y):
        gp = core.conditional_mean(true_model, y, cfg)
        gq = core.conditional_mean(assumed_model, y, cfg)
        per = tr_exx - 2.0 * gp @ gq + gq @ gq
        return np.concatenate([np.outer(gp, gq).ravel(), np.outer(gq, gq).ravel(), [per]])

    est = core.expect(true_model, fn, expectation)
    k = n * n
    pq = est.value[:k].reshape(n, n)
    qq = est.value[k:2 * k].reshape(n, n)
    E = exx - pq - pq.T + qq
    se = float(est.stderr[-1]) if est.stderr is not None else 0.0
    return MismatchReport(float(np.trace(E)), E, se, est.method)
