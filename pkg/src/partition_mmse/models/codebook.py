"""Random spherical codebook over an AWGN channel.

ln Z uses the uniform-prior convention

    ln Z(y, lam) = ln (1/M) sum_x exp(-beta ||y - x||^2 / 2 + lam.x)

so that ln Z / n is directly comparable with the typical-code asymptote.
Codeword 0 is the transmitted one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.special import gammaln, ive, logsumexp

from ..base import FiniteSupport, Interval, JointModel
from ..errors import CodebookTooLarge, DegenerateWeights, DomainError, RegimeError

MAX_ENUMERABLE = 10**6


def sample_codebook(rng: np.random.Generator, size: int, n: int, power: float) -> np.ndarray:
    """Gaussian rows renormalized to the radius sqrt(n * power) sphere (uniform by isotropy)."""
    C = rng.standard_normal((size, n))
    C *= math.sqrt(n * power) / np.linalg.norm(C, axis=1, keepdims=True)
    return C


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class CodebookModel:
    n: int
    rate: float
    power: float = 1.0
    beta: float = 1.0
    seed: int = 0
    transmitted_index: int = 0
    max_enumerable: int = MAX_ENUMERABLE

    def __post_init__(self):
        if self.n < 1 or self.rate < 0 or self.power <= 0 or self.beta <= 0:
            raise DomainError("need n >= 1, rate >= 0, power > 0, beta > 0")

    @property
    def log_size(self) -> float:
        """ln M with M = ceil(e^{nR})."""
        nr = self.n * self.rate
        return nr if nr > 30 else math.log(math.ceil(math.exp(nr) - 1e-9))

    @property
    def size(self) -> int:
        nr = self.n * self.rate
        if nr > 700:
            raise CodebookTooLarge(f"M = e^{nr:.1f} is not representable")
        return max(1, math.ceil(math.exp(nr) - 1e-9))

    @property
    def enumerable(self) -> bool:
        return self.log_size <= math.log(self.max_enumerable)

    @cached_property
    def codebook(self) -> np.ndarray:
        if not self.enumerable:
            raise CodebookTooLarge(f"M = e^{self.log_size:.1f} exceeds the enumeration limit {self.max_enumerable}")
        C = sample_codebook(_rng(self.seed, 0), self.size, self.n, self.power)
        C.setflags(write=False)
        return C

    @cached_property
    def transmitted(self) -> np.ndarray:
        """x_0; drawn from its own stream when the full codebook is never materialized."""
        if self.enumerable:
            return self.codebook[self.transmitted_index]
        return sample_codebook(_rng(self.seed, 0), 1, self.n, self.power)[0]

    def observe(self, rng: np.random.Generator) -> np.ndarray:
        """Channel output for the transmitted codeword."""
        return self.transmitted + rng.standard_normal(self.n) / math.sqrt(self.beta)

    def _scores(self, y, lam=None) -> np.ndarray:
        y = np.asarray(y, float)
        C = self.codebook
        s = -0.5 * self.beta * np.sum((y - C) ** 2, axis=1)
        if lam is not None:
            s = s + C @ np.asarray(lam, float)
        return s


def codebook_exact_log_partition(model: CodebookModel, y, lam=None) -> float:
    return float(logsumexp(model._scores(y, lam))) - model.log_size


def codebook_exact_posterior_mean(model: CodebookModel, y) -> np.ndarray:
    """sum_i w_i x_i with w_i proportional to exp(-beta ||y - x_i||^2 / 2)."""
    s = model._scores(y)
    w = np.exp(s - logsumexp(s))
    return w @ model.codebook


# ----------------------------------------------------- self-averaged large M


def _log_sphere_mgf(kappa: float, n: int) -> float:
    """ln E[exp(kappa u_1)] for u uniform on the unit sphere in R^n."""
    nu = 0.5 * n - 1.0
    if kappa == 0:
        return 0.0
    return float(gammaln(0.5 * n) + nu * math.log(2.0 / kappa) + math.log(ive(nu, kappa)) + kappa)


def _direction_ratio(kappa: float, n: int) -> float:
    """E[u_1 exp(kappa u_1)] / E[exp(kappa u_1)] = I_{n/2}(kappa) / I_{n/2-1}(kappa)."""
    if kappa == 0:
        return 0.0
    return float(ive(0.5 * n, kappa) / ive(0.5 * n - 1.0, kappa))


@dataclass
class LargeCodebookEstimate:
    mean: np.ndarray
    log_partition: float
    effective_count: float  # (M-1) (E w)^2 / E[w^2] over the non-transmitted codewords
    correct_weight: float  # posterior probability of x_0


def codebook_large_m_posterior_mean(model: CodebookModel, y, min_effective: float = 1e4) -> LargeCodebookEstimate:
    """Posterior mean with the M - 1 competing codewords replaced by their spherical average.

    The competitors enter only through sum_i w_i and sum_i w_i x_i. When their
    effective count (M-1)(E w)^2/E w^2 is large these sums concentrate on
    (M-1) E[w] and (M-1) E[w x], which have closed forms in Bessel functions.
    Refuses (DegenerateWeights) when the effective count is below ``min_effective``.
    """
    y = np.asarray(y, float)
    n, P, beta = model.n, model.power, model.beta
    x0 = model.transmitted
    r = math.sqrt(n * P)
    ny = float(np.linalg.norm(y))
    kappa = beta * r * ny
    common = -0.5 * beta * (ny**2 + n * P)
    log_rest = math.log(-math.expm1(-model.log_size)) + model.log_size if model.log_size > 0 else -math.inf
    if log_rest == -math.inf:
        raise DomainError("single-codeword book has no competitors")
    log_ew = _log_sphere_mgf(kappa, n)
    neff = math.exp(log_rest + 2 * log_ew - _log_sphere_mgf(2 * kappa, n))
    if neff < min_effective:
        raise DegenerateWeights(f"effective competitor count {neff:.3g} below {min_effective:g}; enumerate instead")
    l0 = beta * float(x0 @ y)
    lrest = log_rest + log_ew
    top = max(l0, lrest)
    w0, wr = math.exp(l0 - top), math.exp(lrest - top)
    direction = y / ny if ny > 0 else np.zeros(n)
    rest_mean = r * _direction_ratio(kappa, n) * direction
    mean = (w0 * x0 + wr * rest_mean) / (w0 + wr)
    log_z = common + top + math.log(w0 + wr) - model.log_size
    return LargeCodebookEstimate(mean, log_z, neff, w0 / (w0 + wr))


# ------------------------------------------------------- asymptotic formulas


def gamma_exponent(rho: float) -> float:
    """Exponent of the fraction of the sphere at correlation rho: 0.5 ln(1 - rho^2)."""
    if not abs(rho) < 1:
        raise DomainError("gamma_exponent needs |rho| < 1")
    return 0.5 * math.log1p(-rho * rho)


def critical_beta(rate: float, power: float) -> float:
    """beta_R = (e^{2R} - 1) / P_x, the channel reliability at which capacity equals R."""
    return math.expm1(2 * rate) / power


@dataclass(frozen=True)
class CodebookAsymptotics:
    P_y: float
    P_a: float
    P_g: float  # sqrt(P_x P_y') with y' = y + lam/beta
    theta: float
    rho_beta: float
    rho_star: float
    eps1: float
    eps2: float
    beta_R: float

    @classmethod
    def from_energies(cls, rate: float, power: float, beta: float, P_y: float, P_y_tilted: Optional[float] = None):
        Pyt = P_y if P_y_tilted is None else P_y_tilted
        P_a = 0.5 * (power + P_y)
        P_g = math.sqrt(power * Pyt)
        theta = 1.0 / (2 * beta * P_g)
        rho_beta = math.sqrt(1 + theta * theta) - theta
        rho_star = math.sqrt(-math.expm1(-2 * rate))
        return cls(P_y, P_a, P_g, theta, rho_beta, rho_star, P_a - P_g * rho_star, P_a + P_g * rho_star,
                   critical_beta(rate, power))

    @classmethod
    def typical(cls, rate: float, power: float, beta: float):
        """Quantities at lam = 0 with the typical output energy P_y = P_x + 1/beta."""
        return cls.from_energies(rate, power, beta, power + 1.0 / beta)


def codebook_asymptotics(model: CodebookModel, y, lam=None) -> CodebookAsymptotics:
    y = np.asarray(y, float)
    P_y = float(y @ y) / model.n
    yt = y if lam is None else y + np.asarray(lam, float) / model.beta
    return CodebookAsymptotics.from_energies(model.rate, model.power, model.beta, P_y, float(yt @ yt) / model.n)


def error_exponent(a: CodebookAsymptotics, beta: float) -> float:
    """max over |rho| <= rho_* of Gamma(rho) - beta (P_a - rho P_g')."""
    rho = min(a.rho_beta, a.rho_star)
    if rho >= 1.0:
        return -math.inf
    return gamma_exponent(rho) - beta * (a.P_a - rho * a.P_g)


def codebook_asymptotic_log_partition(model: CodebookModel, y, lam=None):
    """(ln Z asymptote, regime) for a typical code.

    Error-dominated (beta < beta_R): n [Gamma(rho_beta) - beta (P_a - rho_beta P_g')].
    Correct-dominated: -n (R + 1/2) + lam.x_0.
    """
    a = codebook_asymptotics(model, y, lam)
    if model.beta < a.beta_R:
        return model.n * error_exponent(a, model.beta), "error_dominated"
    shift = 0.0 if lam is None else float(np.asarray(lam, float) @ model.transmitted)
    return -model.n * (model.rate + 0.5) + shift, "correct_dominated"


def codebook_saddle_estimator(model: CodebookModel, y) -> np.ndarray:
    """Wiener shrinkage P_x / (P_x + 1/beta) * y, valid when competitors dominate."""
    if model.beta >= critical_beta(model.rate, model.power):
        raise RegimeError("beta >= beta_R: the transmitted codeword dominates; the estimate is close to x_0")
    return model.power / (model.power + 1.0 / model.beta) * np.asarray(y, float)


def codebook_joint_model(model: CodebookModel) -> JointModel:
    """The codebook as a finite-support JointModel (uniform prior, AWGN channel)."""
    C = model.codebook
    beta, n = model.beta, model.n

    def log_prior(X):
        return np.full(np.atleast_2d(X).shape[0], -model.log_size)

    def log_channel(X, y):
        return -0.5 * beta * np.sum((y - np.atleast_2d(X)) ** 2, axis=1) + 0.5 * n * math.log(beta / (2 * math.pi))

    def sampler(rng, size):
        X = C[rng.integers(0, len(C), size)]
        return X, X + rng.standard_normal(X.shape) / math.sqrt(beta)

    return JointModel(n, n, FiniteSupport(C), log_prior, log_channel, output_alphabet=Interval(), sampler=sampler,
                      state_cap=model.max_enumerable, name=f"codebook(n={n},R={model.rate:g})")


@dataclass
class CodebookMseResult:
    per_symbol_mse: float
    stderr: float
    method: str
    replicas: int
    min_effective_count: float = math.nan


def codebook_monte_carlo_mse(n: int, rate: float, power: float, beta: float, seeds, min_effective: float = 1e4,
                             estimator: str = "posterior_mean") -> CodebookMseResult:
    """Per-symbol squared error of an estimator of x_0, one fresh codebook and noise per seed.

    ``estimator`` is "posterior_mean" (exact enumeration when M is enumerable,
    otherwise the self-averaged large-M form) or "wiener".
    """
    errs, neffs, methods = [], [], set()
    for s in seeds:
        model = CodebookModel(n, rate, power, beta, seed=int(s))
        y = model.observe(_rng(int(s), 1))
        if estimator == "wiener":
            xh = codebook_saddle_estimator(model, y)
            methods.add("wiener")
        elif model.enumerable:
            xh = codebook_exact_posterior_mean(model, y)
            methods.add("enumeration")
        else:
            est = codebook_large_m_posterior_mean(model, y, min_effective)
            xh = est.mean
            neffs.append(est.effective_count)
            methods.add("self_averaged")
        errs.append(float(np.mean((xh - model.transmitted) ** 2)))
    errs = np.array(errs)
    se = float(errs.std(ddof=1) / math.sqrt(len(errs))) if len(errs) > 1 else math.nan
    return CodebookMseResult(float(errs.mean()), se, "+".join(sorted(methods)), len(errs),
                             min(neffs) if neffs else math.nan)


def codebook_log_partition_spread(n: int, rate: float, power: float, beta: float, seeds, observation_seed: int = 0):
    """(mean, std) over codebook seeds of (1/n) ln Z at a fixed transmitted word and noise draw.

    Only the competing codewords are redrawn, so the spread measures how
    strongly ln Z self-averages over the code ensemble.
    """
    base = CodebookModel(n, rate, power, beta, seed=observation_seed)
    x0 = base.transmitted
    y = base.observe(_rng(observation_seed, 1))
    vals = []
    for s in seeds:
        model = CodebookModel(n, rate, power, beta, seed=int(s))
        C = np.array(model.codebook)
        C[model.transmitted_index] = x0
        sc = -0.5 * beta * np.sum((y - C) ** 2, axis=1)
        vals.append((float(logsumexp(sc)) - model.log_size) / n)
    vals = np.array(vals)
    return float(vals.mean()), float(vals.std(ddof=1)), y
