"""Curie-Weiss spins observed through a binary symmetric channel.

Source  P(x) = C_n exp{(a/2n) S^2 + b S},  S = sum_i x_i,  x in {-1, +1}^n
Channel P(y|x) = prod_i e^{beta x_i y_i} / (2 cosh beta)

C_n is computed exactly (sum over the magnetization levels), so Z(y, 0) = P(y)
for every backend. The Gaussian identity

    exp{(a/2n) S^2} = sqrt(n / (2 pi a)) int exp{-n theta^2/(2a) + theta S} dtheta

decouples the spins and leaves a 1-D integral over theta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import optimize
from scipy.special import gammaln, logsumexp

from ..base import ExpectationConfig, FiniteAlphabet, JointModel, SaddleSolution
from ..errors import DomainError, NoConvergence
from ..numerics import log_cosh, window_integral

SPINS = FiniteAlphabet((-1.0, 1.0))
LOG_DROP = 50.0


@dataclass(frozen=True)
class CurieWeissModel:
    n: int
    a: float
    b: float
    beta: float

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be positive")
        if self.a < 0:
            raise DomainError("coupling a must be nonnegative")
        if self.beta < 0:
            raise DomainError("beta must be nonnegative")

    @cached_property
    def level_log_weights(self) -> np.ndarray:
        """ln P(sum x = 2k - n), k = 0..n, normalized."""
        k = np.arange(self.n + 1)
        s = 2.0 * k - self.n
        lw = gammaln(self.n + 1) - gammaln(k + 1) - gammaln(self.n - k + 1) + self.a / (2 * self.n) * s**2 + self.b * s
        return lw - logsumexp(lw)

    @cached_property
    def log_norm(self) -> float:
        """ln C_n."""
        k = np.arange(self.n + 1)
        s = 2.0 * k - self.n
        lw = gammaln(self.n + 1) - gammaln(k + 1) - gammaln(self.n - k + 1) + self.a / (2 * self.n) * s**2 + self.b * s
        return -float(logsumexp(lw))

    @property
    def log_channel_norm(self) -> float:
        return float(log_cosh(self.beta)) + math.log(2.0)

    def log_prior(self, X) -> np.ndarray:
        S = np.atleast_2d(X).sum(axis=1)
        return self.log_norm + self.a / (2 * self.n) * S**2 + self.b * S

    def log_channel(self, X, y) -> np.ndarray:
        return self.beta * np.atleast_2d(X) @ np.asarray(y, float) - self.n * self.log_channel_norm

    def sample(self, rng: np.random.Generator, size: int):
        """Exact joint draws: magnetization level, then a random arrangement, then channel flips."""
        n = self.n
        p = np.exp(self.level_log_weights)
        ks = rng.choice(n + 1, size=size, p=p / p.sum())
        X = -np.ones((size, n))
        for r, k in enumerate(ks):
            X[r, rng.permutation(n)[:k]] = 1.0
        flip = rng.random((size, n)) < math.exp(-self.beta) / (2 * math.cosh(self.beta))
        return X, np.where(flip, -X, X)

    def fields(self, y, lam=None) -> np.ndarray:
        """c_i = beta y_i + lam_i + b."""
        c = self.beta * np.asarray(y, float) + self.b
        return c if lam is None else c + np.asarray(lam, float)


# ------------------------------------------------------------ theta integral


def _hs_exponent(model: CurieWeissModel, c: np.ndarray):
    n, a = model.n, model.a

    def h(theta):
        th = np.atleast_1d(np.asarray(theta, float))
        return -n * th**2 / (2 * a) + log_cosh(c[None, :] + th[:, None]).sum(axis=1)

    return h


def _stationary_maxima(model: CurieWeissModel, c: np.ndarray):
    """All local maxima of the theta exponent; they solve theta = (a/n) sum tanh(c_i + theta)."""
    a, n = model.a, model.n
    g = lambda t: t - a / n * float(np.tanh(c + t).sum())  # noqa: E731
    dg = lambda t: 1.0 - a / n * float((1.0 - np.tanh(c + t) ** 2).sum())  # noqa: E731
    grid = np.linspace(-a - 1e-9, a + 1e-9, 801)
    vals = np.concatenate([blk - a / n * np.tanh(c[None, :] + blk[:, None]).sum(axis=1)
                           for blk in np.array_split(grid, 8)])
    roots = []
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            roots.append(grid[i])
        elif vals[i] < 0 < vals[i + 1] or vals[i] > 0 > vals[i + 1]:
            roots.append(optimize.brentq(g, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200))
    # a maximum of the exponent is where the fixed-point map has slope below one (g crosses upward)
    maxima = [r for r in roots if dg(r) > 0]
    if not maxima:
        raise NoConvergence("no stationary maximum found for the theta exponent")
    return maxima


def _theta_window(model: CurieWeissModel):
    # beyond |theta| > a the exponent falls at least like n (|theta| - a)^2 / (2a)
    pad = math.sqrt(2 * model.a * LOG_DROP / model.n)
    return -model.a - pad, model.a + pad


def _theta_integral(model: CurieWeissModel, c: np.ndarray, moments=None):
    h = _hs_exponent(model, c)
    maxima = _stationary_maxima(model, c)
    heights = [float(h(t)[0]) for t in maxima]
    peak = max(heights)
    lo, hi = _theta_window(model)
    # h is monotone outside its outermost maxima, so cut where it has dropped LOG_DROP nats
    kept = [t for t, v in zip(maxima, heights) if v >= peak - LOG_DROP]
    drop = lambda t: float(h(t)[0]) - (peak - LOG_DROP)  # noqa: E731
    if drop(lo) < 0:
        lo = optimize.brentq(drop, lo, min(kept), xtol=1e-12)
    if drop(hi) < 0:
        hi = optimize.brentq(drop, max(kept), hi, xtol=1e-12)
    # the exponent is a sum of n terms, so its rounding noise grows with n
    tot = window_integral(h, lo, hi, peak, moments, points=maxima, start=16, rtol=max(1e-13, 4e-15 * model.n))
    return peak + math.log(tot[0]), tot, maxima


def cw_log_partition_hs(model: CurieWeissModel, y, lam=None) -> float:
    """ln Z(y, lam) through the theta integral (product form when a = 0).

    ln Z = ln C_n - n ln(2 cosh beta) + n ln 2 + 1/2 ln(n / (2 pi a))
           + ln int exp{-n theta^2/(2a) + sum_i ln cosh(c_i + theta)} dtheta
    """
    c = model.fields(y, lam)
    const = model.log_norm - model.n * model.log_channel_norm + model.n * math.log(2.0)
    if model.a == 0:
        return const + float(log_cosh(c).sum())
    log_int, _, _ = _theta_integral(model, c)
    return const + 0.5 * math.log(model.n / (2 * math.pi * model.a)) + log_int


def cw_conditional_mean_hs(model: CurieWeissModel, y, lam=None) -> np.ndarray:
    """E[X | y] = average of tanh(c_i + theta) over the normalized theta density."""
    c = model.fields(y, lam)
    if model.a == 0:
        return np.tanh(c)
    _, tot, _ = _theta_integral(model, c, moments=lambda th: np.tanh(c[:, None] + th[None, :]))
    return tot[1:] / tot[0]


def cw_joint_model(model: CurieWeissModel, backend: str = "enumeration") -> JointModel:
    """``enumeration`` sums over {-1,+1}^n; ``hs`` uses the theta integral and its exact gradient."""
    hooks = {}
    if backend == "hs":
        hooks = dict(
            log_partition_fn=lambda y, lam: cw_log_partition_hs(model, y, lam),
            conditional_mean_fn=lambda y: cw_conditional_mean_hs(model, y),
        )
    elif backend != "enumeration":
        raise DomainError(f"unknown backend {backend!r}")
    return JointModel(model.n, model.n, SPINS, model.log_prior, model.log_channel, output_alphabet=SPINS,
                      sampler=model.sample, name=f"curie_weiss(n={model.n},a={model.a:g},b={model.b:g})", **hooks)


# ------------------------------------------------------------- saddle point


def cw_saddle_fixed_point(model: CurieWeissModel, y, lam=None, damping: float = 0.5, max_iter: int = 10_000,
                          tol: float = 1e-13) -> SaddleSolution:
    """theta* maximizing -n theta^2/(2a) + sum ln cosh(c_i + theta).

    Damped iteration theta <- (1-d) theta + d (a/n) sum tanh(c_i + theta) from
    -a, 0 and +a, each polished by bisection on the stationarity residual.
    Two maxima of equal height are reported as a symmetric pair.
    """
    if model.a <= 0:
        raise DomainError("the saddle point needs a > 0")
    c = model.fields(y, lam)
    a, n = model.a, model.n
    h = _hs_exponent(model, c)
    T = lambda t: a / n * float(np.tanh(c + t).sum())  # noqa: E731
    g = lambda t: t - T(t)  # noqa: E731

    found, iters_total = [], 0
    for start in (-a, 0.0, a):
        t = start
        for it in range(max_iter):
            new = (1 - damping) * t + damping * T(t)
            if abs(new - t) < tol:
                t = new
                break
            t = new
        else:
            raise NoConvergence(f"fixed-point iteration from {start} did not settle in {max_iter} steps")
        iters_total += it + 1
        # bisection polish on a bracket around the iterate
        w = 1e-6
        while g(t - w) * g(t + w) > 0 and w < 4 * a:
            w *= 4
        if g(t - w) * g(t + w) <= 0:
            t = optimize.brentq(g, t - w, t + w, xtol=1e-15, rtol=1e-15, maxiter=500)
        if 1.0 - a / n * float((1 - np.tanh(c + t) ** 2).sum()) > 0 and not any(abs(t - f) < 1e-9 for f in found):
            found.append(t)
    if not found:
        raise NoConvergence("no maximizing fixed point found")
    vals = [float(h(t)[0]) for t in found]
    order = np.argsort(vals)[::-1]
    found = [found[i] for i in order]
    vals = [vals[i] for i in order]
    best = found[0]
    multiplicity = "unique"
    if len(found) > 1 and abs(vals[0] - vals[1]) <= 1e-9 * max(1.0, abs(vals[0])):
        multiplicity = "symmetric_pair"
    curvature = -n / a + float((1 - np.tanh(c + best) ** 2).sum())
    return SaddleSolution(best, vals[0], iters_total, True, multiplicity, tuple(found[1:]), curvature, abs(g(best)))


def cw_saddle_estimator(model: CurieWeissModel, y, lam=None) -> np.ndarray:
    """tanh(beta y_i + b + theta*), the mean-field conditional-mean approximation."""
    sol = cw_saddle_fixed_point(model, y, lam)
    return np.tanh(model.fields(y, lam) + sol.argmax)


# ------------------------------------------------------------ magnetization


def _binary_entropy_nats(p):
    return -(p * np.log(p) + (1 - p) * np.log1p(-p))


def magnetization_objective(m, a: float, b: float):
    """h2((1+m)/2) + a m^2 / 2 + b m (nats)."""
    m = np.asarray(m, float)
    return _binary_entropy_nats((1 + m) / 2) + 0.5 * a * m**2 + b * m


def magnetization(a: float, b: float) -> SaddleSolution:
    """Maximizer m* of the mean-field free energy; stationary points solve m = tanh(a m + b)."""
    g = lambda m: m - math.tanh(a * m + b)  # noqa: E731
    grid = np.linspace(-1 + 1e-12, 1 - 1e-12, 2001)
    vals = np.array([g(m) for m in grid])
    roots = []
    for i in range(len(grid) - 1):
        if vals[i] == 0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(optimize.brentq(g, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15))
    maxima = [r for r in roots if 1 - a * (1 - math.tanh(a * r + b) ** 2) > 0] or roots
    vals = [float(magnetization_objective(r, a, b)) for r in maxima]
    order = np.argsort(vals)[::-1]
    maxima = [maxima[i] for i in order]
    vals = [vals[i] for i in order]
    mult = "unique"
    if len(maxima) > 1 and abs(vals[0] - vals[1]) <= 1e-12:
        mult = "symmetric_pair"
        maxima[:2] = sorted(maxima[:2], reverse=True)
    return SaddleSolution(maxima[0], vals[0], 0, True, mult, tuple(maxima[1:]), residual=abs(g(maxima[0])))


# ------------------------------------------------------------ asymptotic MMSE


@dataclass
class AsymptoticMmse:
    value: float
    magnetization: float
    theta0: tuple  # one entry per branch
    branch_values: tuple
    multiplicity: str
    extra: dict = field(default_factory=dict)


def _theta0(a: float, b: float, beta: float, m: float) -> float:
    """Root of theta = a E tanh(beta Y + b + theta), Y = +-1 with mean m tanh(beta), nearest a m."""
    p1 = 0.5 * (1 + m * math.tanh(beta))

    def T(t):
        return a * (p1 * math.tanh(beta + b + t) + (1 - p1) * math.tanh(-beta + b + t))

    g = lambda t: t - T(t)  # noqa: E731
    t = a * m
    for _ in range(10_000):
        new = 0.5 * t + 0.5 * T(t)
        if abs(new - t) < 1e-15:
            break
        t = new
    w = 1e-8
    while g(t - w) * g(t + w) > 0 and w < 4 * a + 1:
        w *= 4
    if g(t - w) * g(t + w) <= 0:
        t = optimize.brentq(g, t - w, t + w, xtol=1e-15, rtol=1e-15)
    return t


def cw_asymptotic_mmse(model: CurieWeissModel) -> AsymptoticMmse:
    """Per-symbol 1 - E tanh^2(beta Y + b + theta0) in the large-n limit.

    With b = 0 and a > 1 both magnetization branches +-m* are evaluated and
    averaged, since each occurs with probability 1/2.
    """
    a, b, beta = model.a, model.b, model.beta
    mag = magnetization(a, b)
    branches = [mag.argmax]
    if mag.multiplicity == "symmetric_pair":
        branches.append(mag.alternatives[0])
    thetas, values = [], []
    for m in branches:
        t0 = _theta0(a, b, beta, m) if a > 0 else 0.0
        p1 = 0.5 * (1 + m * math.tanh(beta))
        e2 = p1 * math.tanh(beta + b + t0) ** 2 + (1 - p1) * math.tanh(-beta + b + t0) ** 2
        thetas.append(t0)
        values.append(1.0 - e2)
    return AsymptoticMmse(float(np.mean(values)), mag.argmax, tuple(thetas), tuple(values), mag.multiplicity)


@dataclass
class EmpiricalMmse:
    value: float
    stderr: float
    replicas: int
    estimator: str


def cw_empirical_mmse(model: CurieWeissModel, cfg: ExpectationConfig, estimator: str = "saddle") -> EmpiricalMmse:
    """Monte Carlo per-symbol squared error of the saddle ("saddle") or exact ("hs") conditional mean.

    ``cfg.samples`` is the number of independent (x, y) blocks of length n.
    """
    per_block = []
    for size, rng in cfg.chunk_generators(stream=23):
        X, Y = model.sample(rng, size)
        for x, y in zip(X, Y):
            xh = cw_saddle_estimator(model, y) if estimator == "saddle" else cw_conditional_mean_hs(model, y)
            per_block.append(float(np.mean((x - xh) ** 2)))
    v = np.array(per_block)
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else math.nan
    return EmpiricalMmse(float(v.mean()), se, len(v), estimator)
