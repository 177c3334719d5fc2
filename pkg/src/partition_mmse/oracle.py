"""Brute-force reference computations.

Nothing here calls into ``core``, ``numerics`` or scipy's log-sum-exp: sums are
accumulated with ``math.fsum`` after a max shift, continuous integrals use a
composite Gauss-Legendre rule on a fixed box, and random streams are derived
with a different spawn key than the library's Monte Carlo paths.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .base import ExpectationConfig, FiniteAlphabet, FiniteSupport, Interval, JointModel
from .errors import DegenerateWeights, DomainError, StateSpaceTooLarge, ZeroProbability

ORACLE_STREAM = 7919  # spawn-key prefix reserved for oracle randomness


def _lse(values) -> float:
    vals = [float(v) for v in np.ravel(values)]
    top = max(vals)
    if top == -math.inf:
        return -math.inf
    return top + math.log(math.fsum(math.exp(v - top) for v in vals))


def _oracle_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(ORACLE_STREAM, *key))))


@dataclass
class PosteriorTable:
    states: np.ndarray
    log_weights: np.ndarray
    log_evidence: float  # ln sum_x P(x, y) with the model's (possibly unnormalized) prior

    def mean(self) -> np.ndarray:
        w = np.exp(self.log_weights)
        return np.array([math.fsum(w * self.states[:, i]) for i in range(self.states.shape[1])])

    def covariance(self) -> np.ndarray:
        w = np.exp(self.log_weights)
        mu = self.mean()
        d = self.states - mu
        n = d.shape[1]
        cov = np.empty((n, n))
        for i in range(n):
            for j in range(i + 1):
                cov[i, j] = cov[j, i] = math.fsum(w * d[:, i] * d[:, j])
        return cov


def _enumerate_inputs(model: JointModel, cap: int) -> np.ndarray:
    alpha = model.input_alphabet
    if isinstance(alpha, FiniteSupport):
        return np.asarray(alpha.points, dtype=float)
    if not isinstance(alpha, FiniteAlphabet):
        raise DomainError("enumeration needs a finite input alphabet")
    count = len(alpha.values) ** model.n
    if count > cap:
        raise StateSpaceTooLarge(f"{count} states exceeds oracle cap {cap}")
    return np.array(list(itertools.product(alpha.values, repeat=model.n)), dtype=float).reshape(-1, model.n)


def enumerate_posterior(model: JointModel, y, cap: int = 2**24, _states=None, _log_prior=None) -> PosteriorTable:
    """Exact posterior of X given y by listing every input state."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    states = _enumerate_inputs(model, cap) if _states is None else _states
    lp = np.asarray(model.log_prior(states), dtype=float) if _log_prior is None else _log_prior
    lj = lp + np.asarray(model.log_channel(states, y), dtype=float)
    evidence = _lse(lj)
    if evidence == -math.inf:
        raise ZeroProbability("observation has zero probability under the model")
    return PosteriorTable(states, lj - evidence, evidence)


def _gl_nodes(lo: float, hi: float, panels: int, order: int = 20):
    z, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * z[None, :]).ravel()
    wx = (half[:, None] * w[None, :]).ravel()
    return x, wx


def _box(model: JointModel, cfg: ExpectationConfig):
    L = cfg.quad_halfwidth
    alpha = model.input_alphabet
    lo = max(alpha.lo, -L) if isinstance(alpha, Interval) else -L
    hi = min(alpha.hi, L) if isinstance(alpha, Interval) else L
    return lo, hi


def quadrature_posterior_moments(model: JointModel, y, cfg: ExpectationConfig = ExpectationConfig()):
    """(log evidence, mean, variance) of a scalar continuous model by Gauss-Legendre on a box."""
    if model.n != 1 or model.finite_input:
        raise DomainError("quadrature oracle handles scalar continuous inputs only")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    lo, hi = _box(model, cfg)
    x, wx = _gl_nodes(lo, hi, cfg.quad_panels)
    X = x[:, None]
    lj = np.asarray(model.log_prior(X), dtype=float) + np.asarray(model.log_channel(X, y), dtype=float)
    top = lj.max()
    if top == -math.inf:
        raise ZeroProbability("observation has zero probability under the model")
    p = wx * np.exp(lj - top)
    z0 = math.fsum(p)
    mean = math.fsum(p * x) / z0
    var = math.fsum(p * (x - mean) ** 2) / z0
    return top + math.log(z0), mean, var


def posterior_mean(model: JointModel, y, cfg: ExpectationConfig = ExpectationConfig()) -> np.ndarray:
    if model.finite_input:
        return enumerate_posterior(model, y, cap=cfg.joint_cap).mean()
    return np.array([quadrature_posterior_moments(model, y, cfg)[1]])


@dataclass
class OracleEstimate:
    value: float
    stderr: float = 0.0
    method: str = ""


def _output_states(model: JointModel) -> np.ndarray:
    alpha = model.output_alphabet
    if not isinstance(alpha, FiniteAlphabet):
        raise DomainError("enumerate_y needs a finite output alphabet")
    return np.array(list(itertools.product(alpha.values, repeat=model.m)), dtype=float).reshape(-1, model.m)


def oracle_mmse(model: JointModel, cfg: ExpectationConfig) -> OracleEstimate:
    """Total MMSE (trace of the error covariance) by brute force."""
    if cfg.strategy == "enumerate_y":
        states = _enumerate_inputs(model, cfg.joint_cap)
        ys = _output_states(model)
        if len(states) * len(ys) > cfg.joint_cap:
            raise StateSpaceTooLarge(f"{len(states) * len(ys)} joint states exceeds cap {cfg.joint_cap}")
        lp = np.asarray(model.log_prior(states), dtype=float)
        log_py, traces = [], []
        for y in ys:
            lj = lp + np.asarray(model.log_channel(states, y), dtype=float)
            ev = _lse(lj)
            if ev == -math.inf:
                continue
            table = PosteriorTable(states, lj - ev, ev)
            log_py.append(ev)
            traces.append(float(np.trace(table.covariance())))
        norm = _lse(log_py)
        value = math.fsum(math.exp(lpy - norm) * tr for lpy, tr in zip(log_py, traces))
        return OracleEstimate(value, 0.0, "enumerate_y")

    if cfg.strategy == "quadrature_y":
        if model.n != 1 or model.m != 1 or model.finite_input:
            raise DomainError("quadrature oracle handles scalar continuous models only")
        ylo, yhi = -cfg.quad_halfwidth, cfg.quad_halfwidth
        if isinstance(model.output_alphabet, Interval):
            ylo, yhi = max(ylo, model.output_alphabet.lo), min(yhi, model.output_alphabet.hi)
        yn, wy = _gl_nodes(ylo, yhi, cfg.quad_panels)
        log_py = np.empty_like(yn)
        var = np.empty_like(yn)
        for k, yv in enumerate(yn):
            try:
                log_py[k], _, var[k] = quadrature_posterior_moments(model, [yv], cfg)
            except ZeroProbability:
                log_py[k], var[k] = -math.inf, 0.0
        top = log_py.max()
        p = wy * np.exp(log_py - top)
        return OracleEstimate(math.fsum(p * var) / math.fsum(p), 0.0, "quadrature_y")

    if cfg.strategy == "monte_carlo":
        if model.sampler is None:
            raise DomainError("monte_carlo oracle needs a sampler")
        rng = _oracle_rng(cfg.seed, 0)
        xs, ys = model.sampler(rng, cfg.samples)
        errs = np.empty(len(xs))
        for k, (x, y) in enumerate(zip(xs, ys)):
            errs[k] = float(np.sum((x - posterior_mean(model, y, cfg)) ** 2))
        se = float(np.std(errs, ddof=1) / math.sqrt(len(errs))) if len(errs) > 1 else math.inf
        return OracleEstimate(float(np.mean(errs)), se, "monte_carlo")

    raise DomainError(f"unknown strategy {cfg.strategy}")


def oracle_mismatched_mse(true_model: JointModel, assumed_model: JointModel, cfg: ExpectationConfig,
                          assumed_mean=None, batch_mean=None, chunk: int = 1_000_000) -> OracleEstimate:
    """Monte Carlo estimate of E_P ||X - E_Q[X|Y]||^2 with (X, Y) drawn from the true law.

    ``batch_mean`` maps an (N, m) array of outputs to (N, n) assumed posterior
    means; with it the draws are processed in chunks so 1e7 samples are cheap.
    """
    if true_model.sampler is None:
        raise DomainError("mismatch oracle needs a sampler on the true model")
    rng = _oracle_rng(cfg.seed, 1)
    if batch_mean is not None:
        total, total_sq, count = 0.0, 0.0, 0
        remaining = cfg.samples
        while remaining > 0:
            size = min(chunk, remaining)
            xs, ys = true_model.sampler(rng, size)
            e = np.sum((np.asarray(xs, float) - np.asarray(batch_mean(np.asarray(ys, float)), float)) ** 2, axis=1)
            total += math.fsum(e)
            total_sq += math.fsum(e * e)
            count += size
            remaining -= size
        mean = total / count
        var = max(total_sq / count - mean * mean, 0.0) * count / max(count - 1, 1)
        return OracleEstimate(mean, math.sqrt(var / count), "monte_carlo")
    mean_q = assumed_mean or (lambda y: posterior_mean(assumed_model, y, cfg))
    xs, ys = true_model.sampler(rng, cfg.samples)
    errs = np.array([float(np.sum((x - mean_q(y)) ** 2)) for x, y in zip(xs, ys)])
    se = float(np.std(errs, ddof=1) / math.sqrt(len(errs))) if len(errs) > 1 else math.inf
    return OracleEstimate(float(np.mean(errs)), se, "monte_carlo")


def tensor_quadrature_posterior(model: JointModel, y, halfwidth: float = 8.0, panels: int = 16,
                                order: int = 10, center=None, chunk: int = 1 << 20):
    """(log evidence, posterior mean) of a continuous model with n <= 3 by a tensor Gauss-Legendre rule."""
    if model.finite_input or model.n > 3:
        raise DomainError("tensor quadrature oracle handles continuous inputs with n <= 3")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    c = np.zeros(model.n) if center is None else np.asarray(center, float)
    g, gw = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(-halfwidth, halfwidth, panels + 1)
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
    x1 = (mid[:, None] + half[:, None] * g).ravel()
    w1 = (half[:, None] * gw).ravel()
    grids = np.meshgrid(*([x1] * model.n), indexing="ij")
    wgrid = np.ones_like(grids[0])
    for w in np.meshgrid(*([w1] * model.n), indexing="ij"):
        wgrid = wgrid * w
    X = np.stack([gr.ravel() for gr in grids], axis=1) + c
    W = wgrid.ravel()
    lj = np.empty(len(X))
    for s in range(0, len(X), chunk):
        part = X[s:s + chunk]
        lj[s:s + chunk] = np.asarray(model.log_prior(part), float) + np.asarray(model.log_channel(part, y), float)
    top = lj.max()
    if top == -math.inf:
        raise ZeroProbability("observation has zero probability under the model")
    p = W * np.exp(lj - top)
    z0 = math.fsum(p)
    mean = np.array([math.fsum(p * X[:, i]) / z0 for i in range(model.n)])
    return top + math.log(z0), mean


@dataclass(frozen=True)
class GaussianProposal:
    mean: np.ndarray
    cov: np.ndarray

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.multivariate_normal(np.asarray(self.mean, float), np.asarray(self.cov, float), size=size)

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        mu = np.asarray(self.mean, float)
        cov = np.atleast_2d(np.asarray(self.cov, float))
        chol = np.linalg.cholesky(cov)
        z = np.linalg.solve(chol, (x - mu).T)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        return -0.5 * np.sum(z * z, axis=0) - 0.5 * logdet - 0.5 * len(mu) * math.log(2 * math.pi)


@dataclass
class ImportanceEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    ess: float
    samples: int


def importance_sampling_mean(model: JointModel, y, proposal: GaussianProposal, cfg: ExpectationConfig,
                             min_ess_fraction: float = 0.05, bootstrap: int = 200) -> ImportanceEstimate:
    """Self-normalized importance sampling estimate of E[X | y] with bootstrap standard errors."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    rng = _oracle_rng(cfg.seed, 2)
    xs = np.atleast_2d(proposal.sample(rng, cfg.samples)).reshape(cfg.samples, model.n)
    logw = np.asarray(model.log_prior(xs), float) + np.asarray(model.log_channel(xs, y), float) - proposal.logpdf(xs)
    logw = logw - logw.max()
    w = np.exp(logw)
    w /= w.sum()
    ess = 1.0 / float(np.sum(w * w))
    if ess < min_ess_fraction * cfg.samples:
        raise DegenerateWeights(f"effective sample size {ess:.1f} below {min_ess_fraction:.0%} of {cfg.samples}")
    mean = w @ xs
    boot_rng = _oracle_rng(cfg.seed, 3)
    raw = np.exp(logw)
    reps = np.empty((bootstrap, model.n))
    for b in range(bootstrap):
        idx = boot_rng.integers(0, cfg.samples, cfg.samples)
        wb = raw[idx]
        reps[b] = (wb @ xs[idx]) / wb.sum()
    return ImportanceEstimate(mean, reps.std(axis=0, ddof=1), ess, cfg.samples)
