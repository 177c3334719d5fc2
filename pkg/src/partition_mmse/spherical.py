"""Joint laws of the form P(x, y) = F_n(sum_i phi(x_i, y_i)).

With F_n(s) = int f_n(t) e^{-t s} dt the joint law is a (possibly signed)
mixture over t of i.i.d. laws proportional to exp(-t phi(x, y)), so

    Z(y, lam) = int dt f_n(t) prod_i exp rho(lam_i, y_i, t),
    rho(lam, y, t) = ln int dx g(x) e^{lam x - t phi(x, y)},

where g is an optional per-letter base weight on x (a folded-in prior).
Outer t-integrals run in u = ln t and split at sign changes of f_n; positive
and negative parts are accumulated separately.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln, log_ndtr, logsumexp

from .base import FiniteAlphabet, Interval, JointModel, SaddleSolution
from .errors import (ConfigError, DomainError, FlatMaximum, MultiModal, NegativeMmse, NonConvergent,
                     QuadratureFailure, SignCancellation)
from .numerics import (SignedLogValue, _panel_nodes, find_mode, golden_newton, grid_maxima, richardson,
                       tail_bounds, window_integral)

MIN_CURVATURE = 10.0
CANCELLATION_RTOL = 1e-12


# ---------------------------------------------------------------- phi registry


@dataclass(frozen=True)
class SquaredDifference:
    """phi(x, y) = (y - x)^2 + quadratic * x^2 + shift."""

    shift: float = 0.0
    quadratic: float = 0.0

    def __call__(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        return (y - x) ** 2 + self.quadratic * x**2 + self.shift

    def quadratic_form(self, lam, y, t, h):
        """(A, numerator, const) with -A x^2 + B x + C the exponent and B^2/(4A) + C = numerator/A + const."""
        A = t * (1 + self.quadratic) + h
        num = t * y * lam + 0.25 * lam**2 - t * y**2 * (t * self.quadratic + h)
        return A, num, -t * self.shift, 0.5 * (2 * t * y + lam)


@dataclass(frozen=True)
class Product:
    """phi(x, y) = offset - scale * x * y."""

    offset: float = 0.0
    scale: float = 1.0

    def __call__(self, x, y):
        return self.offset - self.scale * np.asarray(x, float) * np.asarray(y, float)

    def quadratic_form(self, lam, y, t, h):
        if h <= 0:
            raise DomainError("product phi on the real line needs a Gaussian base")
        b = lam + t * self.scale * y
        return np.full(np.shape(b), float(h)), 0.25 * b**2, -t * self.offset, 0.5 * b


@dataclass(frozen=True)
class TabulatedPhi:
    """phi given on finite x and y alphabets; values[i][j] = phi(x_i, y_j)."""

    x: tuple
    y: tuple
    values: tuple

    def __call__(self, x, y):
        xs, ys = np.asarray(self.x, float), np.asarray(self.y, float)
        tab = np.asarray(self.values, float)
        xi = np.searchsorted(xs, np.asarray(x, float))
        yj = np.searchsorted(ys, np.asarray(y, float))
        xi, yj = np.clip(xi, 0, len(xs) - 1), np.clip(yj, 0, len(ys) - 1)
        ok = (xs[xi] == np.asarray(x, float)) & (ys[yj] == np.asarray(y, float))
        if not np.all(ok):
            raise DomainError("tabulated phi evaluated off its alphabets")
        return tab[xi, yj]


PHI_REGISTRY = {"squared_difference": SquaredDifference, "product": Product, "tabulated": TabulatedPhi}


# -------------------------------------------------------------- f_n registry


class MixingFunction:
    """Signed f_n on t > 0 with sign changes at known points."""

    support = (0.0, math.inf)

    def log_abs(self, t):
        raise NotImplementedError

    def sign(self, t):
        return np.ones_like(np.asarray(t, float))

    def log_envelope(self, t):
        """Smooth upper bound on ln|f_n| used to size integration windows."""
        return self.log_abs(t)

    def breaks(self, lo: float, hi: float):
        return []

    def guess(self):
        """(center, scale) for the mode search in u = ln t."""
        return 0.0, 1.0

    def log_laplace(self, s):
        """(ln|F_n(s)|, sign) in closed form, when known."""
        raise DomainError(f"{type(self).__name__} has no closed-form Laplace transform")


@dataclass(frozen=True)
class GammaDensity(MixingFunction):
    """f(t) = e^{log_scale} rate^k t^{k-1} e^{-rate t} / Gamma(k); F(s) = e^{log_scale} (1 + s/rate)^{-k}."""

    k: float
    rate: float = 1.0
    log_scale: float = 0.0

    def __post_init__(self):
        if not (self.k > 0 and self.rate > 0):
            raise ConfigError("gamma_density needs k > 0 and rate > 0")

    def log_abs(self, t):
        t = np.asarray(t, float)
        with np.errstate(divide="ignore"):
            return (self.log_scale + self.k * math.log(self.rate) + (self.k - 1) * np.log(t) - self.rate * t
                    - gammaln(self.k))

    def guess(self):
        return math.log(self.k / self.rate), 1.0

    def log_laplace(self, s):
        return self.log_scale - self.k * np.log1p(np.asarray(s, float) / self.rate), np.ones_like(np.asarray(s, float))


@dataclass(frozen=True)
class SineKernel(MixingFunction):
    """f(t) = e^{log_scale} sin(alpha t); F(s) = e^{log_scale} alpha / (s^2 + alpha^2) for s > 0."""

    alpha: float = 1.0
    log_scale: float = 0.0

    def log_abs(self, t):
        with np.errstate(divide="ignore"):
            return self.log_scale + np.log(np.abs(np.sin(self.alpha * np.asarray(t, float))))

    def sign(self, t):
        return np.sign(np.sin(self.alpha * np.asarray(t, float)))

    def log_envelope(self, t):
        return np.full(np.shape(t), self.log_scale)

    def breaks(self, lo, hi):
        period = math.pi / self.alpha
        first = math.floor(lo / period) + 1
        last = math.ceil(hi / period) - 1
        if last - first > 200000:
            raise QuadratureFailure("too many sign changes in the integration window")
        return [j * period for j in range(max(first, 1), last + 1)]

    def guess(self):
        return math.log(1.0 / self.alpha), 1.0

    def log_laplace(self, s):
        s = np.asarray(s, float)
        if np.any(s <= 0):
            raise DomainError("sine kernel transform needs s > 0")
        return self.log_scale + math.log(self.alpha) - np.log(s**2 + self.alpha**2), np.ones_like(s)


@dataclass(frozen=True)
class Bump(MixingFunction):
    """Normalized Gaussian bump at ``center`` with width ``width``; a point-mass surrogate."""

    center: float
    width: float
    log_scale: float = 0.0

    def __post_init__(self):
        if not (self.center > 0 and self.width > 0):
            raise ConfigError("bump needs center > 0 and width > 0")

    @property
    def support(self):
        return (max(self.center - 40 * self.width, 0.0), self.center + 40 * self.width)

    def log_abs(self, t):
        t = np.asarray(t, float)
        z = (t - self.center) / self.width
        return self.log_scale - 0.5 * z * z - math.log(math.sqrt(2 * math.pi) * self.width)

    def guess(self):
        return math.log(self.center), self.width / self.center

    def log_laplace(self, s):
        # int_0^inf N(t; c, w^2) e^{-t s} dt = e^{-c s + s^2 w^2 / 2} Phi((c - s w^2) / w)
        s = np.asarray(s, float)
        c, w = self.center, self.width
        return self.log_scale - c * s + 0.5 * (s * w) ** 2 + log_ndtr((c - s * w * w) / w), np.ones_like(s)


@dataclass(frozen=True)
class TabulatedMixing(MixingFunction):
    """Piecewise-linear f_n through (t_i, f_i), zero outside [t_0, t_last]; requires t_0 > 0."""

    t: tuple
    f: tuple

    def __post_init__(self):
        t = np.asarray(self.t, float)
        if len(t) < 2 or len(t) != len(self.f) or np.any(np.diff(t) <= 0) or t[0] <= 0:
            raise ConfigError("table needs >= 2 strictly increasing positive t values and matching f values")

    @property
    def support(self):
        return (float(self.t[0]), float(self.t[-1]))

    def _value(self, t):
        return np.interp(np.asarray(t, float), np.asarray(self.t, float), np.asarray(self.f, float),
                         left=0.0, right=0.0)

    def log_abs(self, t):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self._value(t)))

    def sign(self, t):
        return np.sign(self._value(t))

    def log_envelope(self, t):
        with np.errstate(divide="ignore"):
            return np.full(np.shape(t), math.log(float(np.max(np.abs(self.f)))))

    def breaks(self, lo, hi):
        t, f = np.asarray(self.t, float), np.asarray(self.f, float)
        pts = list(t)
        for i in range(len(t) - 1):
            if f[i] * f[i + 1] < 0:
                pts.append(t[i] - f[i] * (t[i + 1] - t[i]) / (f[i + 1] - f[i]))
        return sorted(p for p in pts if lo < p < hi)

    def guess(self):
        t = np.asarray(self.t, float)
        return float(np.log(t[np.argmax(np.abs(self.f))])), 1.0


EXPRESSION_REGISTRY = {"sin": SineKernel, "bump": Bump}


# ------------------------------------------------------------------ kernel


@dataclass(frozen=True)
class SphericalKernel:
    """phi, f_n, and the per-letter inner integrals.

    ``x_letters``/``y_letters`` switch the inner x-integral or the y-domain to sums;
    ``base_variance`` folds a N(0, base_variance) weight into the x-integral and
    ``base_log_weights`` gives per-letter log-weights for finite x.
    """

    n: int
    phi: object
    f: MixingFunction
    base_variance: Optional[float] = None
    x_letters: Optional[tuple] = None
    y_letters: Optional[tuple] = None
    base_log_weights: Optional[tuple] = None
    t_domain: tuple = (0.0, math.inf)
    name: str = "spherical"

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be positive")
        if self.x_letters is None and not hasattr(self.phi, "quadratic_form"):
            raise ConfigError("continuous x needs a phi with a closed-form inner integral")
        if self.x_letters is None and isinstance(self.phi, Product) and self.base_variance is None:
            raise ConfigError("product phi on the real line needs base_variance")
        if self.base_log_weights is not None and (self.x_letters is None
                                                 or len(self.base_log_weights) != len(self.x_letters)):
            raise ConfigError("base_log_weights must match x_letters")

    @property
    def u_support(self):
        lo = max(self.t_domain[0], self.f.support[0])
        hi = min(self.t_domain[1] if self.t_domain[1] is not None else math.inf, self.f.support[1])
        return (math.log(lo) if lo > 0 else -math.inf), (math.log(hi) if math.isfinite(hi) else math.inf)

    # inner integrals -------------------------------------------------------

    def _finite_terms(self, lam, y, t):
        xs = np.asarray(self.x_letters, float)
        lg = np.zeros(len(xs)) if self.base_log_weights is None else np.asarray(self.base_log_weights, float)
        if self.base_variance is not None:
            lg = lg - 0.5 * xs**2 / self.base_variance
        lam, y, t = (np.asarray(v, float)[..., None] for v in (lam, y, t))
        return lg + lam * xs - t * self.phi(xs, y), xs

    def rho(self, lam, y, t):
        """ln int dx g(x) e^{lam x - t phi(x, y)}, broadcast over lam, y, t."""
        if self.x_letters is not None:
            e, _ = self._finite_terms(lam, y, t)
            return logsumexp(e, axis=-1)
        lam, y, t = np.broadcast_arrays(*(np.asarray(v, float) for v in (lam, y, t)))
        h = 0.0 if self.base_variance is None else 0.5 / self.base_variance
        A, num, c, _ = self.phi.quadratic_form(lam, y, t, h)
        norm = 0.0 if self.base_variance is None else -0.5 * math.log(2 * math.pi * self.base_variance)
        with np.errstate(divide="ignore", invalid="ignore"):
            return norm + 0.5 * np.log(math.pi / A) + num / A + c

    def rho0(self, y, t):
        return self.rho(0.0, y, t)

    def zeta(self, y, t):
        """d rho / d lam at lam = 0: the conditional mean of x given y at fixed t."""
        return self._mean_var(y, t)[0]

    def inner_variance(self, y, t):
        return self._mean_var(y, t)[1]

    def _mean_var(self, y, t):
        if self.x_letters is not None:
            e, xs = self._finite_terms(0.0, y, t)
            w = np.exp(e - logsumexp(e, axis=-1, keepdims=True))
            m = w @ xs
            return m, w @ xs**2 - m**2
        y, t = np.broadcast_arrays(np.asarray(y, float), np.asarray(t, float))
        h = 0.0 if self.base_variance is None else 0.5 / self.base_variance
        A, _, _, half_b = self.phi.quadratic_form(0.0 * y, y, t, h)
        return half_b / A, 0.5 / A

    def log_density(self, X, y):
        """ln F_n(sum phi) + sum ln g(x_i) from the closed-form transform of f_n."""
        X = np.atleast_2d(np.asarray(X, float))
        s = np.sum(self.phi(X, np.asarray(y, float)), axis=1)
        lf, sg = self.f.log_laplace(s)
        if np.any(np.asarray(sg) < 0):
            raise DomainError("F_n is negative at this point; not a density")
        return lf + self._log_base(X)

    def _log_base(self, X):
        out = np.zeros(X.shape[0])
        if self.base_variance is not None:
            out += np.sum(-0.5 * X**2 / self.base_variance - 0.5 * math.log(2 * math.pi * self.base_variance), axis=1)
        if self.base_log_weights is not None:
            xs = np.asarray(self.x_letters, float)
            out += np.asarray(self.base_log_weights, float)[np.searchsorted(xs, X)].sum(axis=1)
        return out


def build_kernel(spec: dict) -> SphericalKernel:
    """Kernel from a declarative description (see ``load_kernel`` for the format)."""
    try:
        phi_spec = dict(spec["phi"])
        f_spec = dict(spec["f"])
        n = int(spec["n"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"kernel description needs n, phi and f: {exc}") from exc
    pname = phi_spec.pop("name", None)
    if pname not in PHI_REGISTRY:
        raise ConfigError(f"unknown phi {pname!r}; choose from {sorted(PHI_REGISTRY)}")
    if pname == "tabulated":
        phi = TabulatedPhi(tuple(map(float, phi_spec["x"])), tuple(map(float, phi_spec["y"])),
                           tuple(tuple(map(float, row)) for row in phi_spec["values"]))
    else:
        phi = PHI_REGISTRY[pname](**phi_spec)
    fname = f_spec.pop("name", None)
    if fname == "gamma_density":
        f = GammaDensity(**f_spec)
    elif fname == "table":
        f = TabulatedMixing(tuple(map(float, f_spec["t"])), tuple(map(float, f_spec["f"])))
    elif fname == "expression":
        eid = f_spec.pop("id", None)
        if eid not in EXPRESSION_REGISTRY:
            raise ConfigError(f"unknown expression {eid!r}; choose from {sorted(EXPRESSION_REGISTRY)}")
        f = EXPRESSION_REGISTRY[eid](**f_spec)
    else:
        raise ConfigError(f"unknown f_n {fname!r}; choose from gamma_density, table, expression")
    base = spec.get("base") or {}
    if base and base.get("name") not in ("gaussian", "weights"):
        raise ConfigError("base must be {name: gaussian, variance} or {name: weights, log_weights}")
    t_dom = spec.get("t_domain") or [0.0, None]
    return SphericalKernel(
        n=n, phi=phi, f=f,
        base_variance=float(base["variance"]) if base.get("name") == "gaussian" else None,
        x_letters=tuple(map(float, spec["x_letters"])) if spec.get("x_letters") else None,
        y_letters=tuple(map(float, spec["y_letters"])) if spec.get("y_letters") else None,
        base_log_weights=tuple(map(float, base["log_weights"])) if base.get("name") == "weights" else None,
        t_domain=(float(t_dom[0]), math.inf if t_dom[1] is None else float(t_dom[1])),
        name=str(spec.get("name", "spherical")),
    )


def load_kernel(path) -> SphericalKernel:
    """Read a kernel description from JSON.

    {"n": 50, "phi": {"name": "squared_difference"},
     "f": {"name": "gamma_density", "k": 30, "log_scale": 0.0},
     "base": {"name": "gaussian", "variance": 1.0}}

    phi names: squared_difference(shift, quadratic), product(offset, scale),
    tabulated(x, y, values). f names: gamma_density(k, rate, log_scale),
    table(t, f), expression(id in {sin, bump}, ...).
    """
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read kernel file {path}: {exc}") from exc
    return build_kernel(spec)


def cauchy_kernel(n: int, k: float, sigma2: float = 1.0) -> SphericalKernel:
    """The Gaussian-source Cauchy-noise model as a kernel: phi = (y - x)^2, f = C_{n,k} t^{k-1} e^{-t} / Gamma(k)."""
    log_c = float(gammaln(k) - 0.5 * n * math.log(math.pi) - gammaln(k - 0.5 * n))
    return SphericalKernel(n=n, phi=SquaredDifference(), f=GammaDensity(k, 1.0, log_c), base_variance=sigma2,
                           name=f"cauchy(n={n},k={k:g})")


# -------------------------------------------------------- signed t-integrals


@dataclass
class SignedIntegral:
    value: SignedLogValue
    moments: Optional[np.ndarray]  # signed averages of the requested moments
    window: tuple
    pieces: int


def _signed_t_integral(kernel: SphericalKernel, rest: Callable[[np.ndarray], np.ndarray], moments=None,
                       rtol: float = 1e-13, guess: Optional[float] = None) -> SignedIntegral:
    """int f_n(t) exp(rest(t)) [1, moments(t)] dt over the t-domain, in u = ln t."""
    f = kernel.f
    lo, hi = kernel.u_support
    g0, scale = f.guess()
    g0 = g0 if guess is None else guess
    g0 = min(max(g0, lo), hi)

    def env(u):
        t = math.exp(u)
        return float(u + f.log_envelope(np.array([t]))[0] + rest(np.array([t]))[0])

    def logabs(u):
        t = np.exp(u)
        return u + f.log_abs(t) + rest(t)

    mode, peak = find_mode(env, lo, hi, g0, scale)
    if not math.isfinite(peak):
        raise NonConvergent("t-integrand is not finite at its maximum")
    a, b = tail_bounds(env, mode, peak, lo, hi, scale)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise NonConvergent("t-integration window is unbounded")
    cuts = [math.log(p) for p in f.breaks(math.exp(a), math.exp(b)) if p > 0]
    edges = [a, *[c for c in cuts if a < c < b], b]
    mfn = None if moments is None else (lambda u: moments(np.exp(u)))
    pos, neg = [], []
    msum = None
    for left, right in zip(edges[:-1], edges[1:]):
        if right - left <= 1e-14 * max(1.0, abs(left)):
            continue
        mid = 0.5 * (left + right)
        sg = float(f.sign(np.array([math.exp(mid)]))[0])
        if sg == 0:
            continue
        pts = [mode] if left < mode < right else []
        tot = window_integral(logabs, left, right, peak, mfn, points=pts, rtol=rtol)
        (pos if sg > 0 else neg).append(tot[0])
        if moments is not None:
            msum = sg * tot[1:] if msum is None else msum + sg * tot[1:]
    P, N = math.fsum(pos), math.fsum(neg)
    if P == 0 and N == 0:
        raise QuadratureFailure("t-integral vanished on its window")
    if abs(P - N) <= CANCELLATION_RTOL * max(P, N):
        raise SignCancellation(f"positive ({P:.17g}) and negative ({N:.17g}) parts cancel")
    lp = peak + math.log(P) if P > 0 else -math.inf
    ln = peak + math.log(N) if N > 0 else -math.inf
    value = SignedLogValue.from_parts(lp, ln)
    mom = None if moments is None else msum / (P - N)
    return SignedIntegral(value, mom, (math.exp(a), math.exp(b)), len(edges) - 1)


def _vec(y, n):
    y = np.asarray(y, float).reshape(-1)
    if y.shape[0] != n:
        raise DomainError(f"expected a vector of length {n}, got {y.shape[0]}")
    return y


def spherical_log_partition(kernel: SphericalKernel, y, lam=None) -> SignedLogValue:
    """ln Z(y, lam) = ln int dt f_n(t) prod_i exp rho(lam_i, y_i, t), with its sign."""
    y = _vec(y, kernel.n)
    lam = np.zeros(kernel.n) if lam is None else _vec(lam, kernel.n)
    rest = lambda t: np.sum(kernel.rho(lam[:, None], y[:, None], t[None, :]), axis=0)  # noqa: E731
    return _signed_t_integral(kernel, rest).value


def mixture_log_density(kernel: SphericalKernel, X, y) -> SignedLogValue:
    """ln int f_n(t) e^{-t sum phi(x_i, y_i)} dt by signed quadrature (base weights excluded)."""
    s = float(np.sum(kernel.phi(_vec(X, kernel.n), _vec(y, kernel.n))))
    return _signed_t_integral(kernel, lambda t: -t * s).value


def spherical_exact_mean(kernel: SphericalKernel, y) -> np.ndarray:
    """int f_n zeta(y_i, t) e^{sum rho0} dt / int f_n e^{sum rho0} dt for every i."""
    y = _vec(y, kernel.n)
    rest = lambda t: np.sum(kernel.rho0(y[:, None], t[None, :]), axis=0)  # noqa: E731
    mom = lambda t: kernel.zeta(y[:, None], t[None, :])  # noqa: E731
    return _signed_t_integral(kernel, rest, mom).moments


# ------------------------------------------------------------------- saddle


def _saddle_objective(kernel: SphericalKernel, weights_y, weights_p=None, scale: float = 1.0):
    """u -> ln|f_n(e^u)| + scale * sum_j p_j rho0(y_j, e^u)."""
    ys = np.asarray(weights_y, float)
    ps = np.ones_like(ys) if weights_p is None else np.asarray(weights_p, float)

    def L(u):
        t = np.exp(np.atleast_1d(np.asarray(u, float)))
        r = ps @ kernel.rho0(ys[:, None], t[None, :])
        return kernel.f.log_abs(t) + scale * r

    return L


def _maximize_u(kernel: SphericalKernel, L, lo: float, hi: float, points: int, ratio: float,
                strict: bool = True):
    brackets = grid_maxima(L, lo, hi, points)
    if not brackets:
        raise FlatMaximum("objective has no finite maximum on the scan window")
    best = max(brackets, key=lambda br: br[3])
    rivals = [br for br in brackets if br is not best and br[3] >= best[3] + math.log(ratio)]
    a, b, c, _ = best
    Ls = lambda u: float(L(u)[0])  # noqa: E731
    if not (a < b < c):
        raise FlatMaximum("maximum sits on the edge of the scan window")
    u, iters = golden_newton(Ls, a, b, c)
    if strict and rivals:
        found = [(math.exp(u), Ls(u))] + [(math.exp(br[1]), br[3]) for br in rivals]
        raise MultiModal(f"{len(found)} local maxima within a factor {ratio:g} of the global one", found)
    return u, iters


def _scan_window(kernel: SphericalKernel, L):
    lo, hi = kernel.u_support
    g0, scale = kernel.f.guess()
    g0 = min(max(g0, lo), hi)
    Ls = lambda u: float(L(u)[0])  # noqa: E731
    mode, peak = find_mode(Ls, lo, hi, g0, scale)
    a, b = tail_bounds(Ls, mode, peak, lo, hi, scale, drop=30.0)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise FlatMaximum("saddle objective does not decay; no isolated maximum")
    return a, b


def spherical_saddle_t(kernel: SphericalKernel, y, points: int = 801, ratio: float = 1e-3) -> SaddleSolution:
    """t-hat maximizing ln|f_n(t)| + sum_i rho0(y_i, t).

    A coarse grid in ln t brackets the maxima; golden-section then a Brent
    solve of the stationarity condition refine the global one. Curvature is
    -d^2/d(ln t)^2 of the objective at t-hat.
    """
    y = _vec(y, kernel.n)
    L = _saddle_objective(kernel, y)
    a, b = _scan_window(kernel, L)
    u, iters = _maximize_u(kernel, L, a, b, points, ratio)
    h = 1e-3 * max(1.0, abs(u))
    Ls = lambda v: float(L(v)[0])  # noqa: E731
    d2, _ = richardson(lambda s: (Ls(u + s) - 2 * Ls(u) + Ls(u - s)) / (s * s), h, 2)
    d1, _ = richardson(lambda s: (Ls(u + s) - Ls(u - s)) / (2 * s), h, 2)
    return SaddleSolution(math.exp(u), Ls(u), iters, True, "unique", (), -d2, abs(d1))


def spherical_estimator(kernel: SphericalKernel, y, min_curvature: float = MIN_CURVATURE) -> np.ndarray:
    """zeta(y_i, t-hat) for every coordinate."""
    y = _vec(y, kernel.n)
    sol = spherical_saddle_t(kernel, y)
    if sol.curvature < min_curvature:
        raise FlatMaximum(f"curvature {sol.curvature:.3g} in ln t is below {min_curvature:g}")
    return kernel.zeta(y, sol.argmax)


# ------------------------------------------------- per-t output expectations


def _output_rule(kernel: SphericalKernel, t: float, rtol: float = 1e-12):
    """(log mass, nodes, normalized weights) for the per-t output law proportional to e^{rho0(y, t)}."""
    if kernel.y_letters is not None:
        ys = np.asarray(kernel.y_letters, float)
        lr = kernel.rho0(ys, t)
        lz = float(logsumexp(lr))
        return lz, ys, np.exp(lr - lz)
    logf = lambda v: float(kernel.rho0(np.array([v]), t)[0])  # noqa: E731
    mode, peak = find_mode(logf, -math.inf, math.inf, 0.0, 1.0)
    if not math.isfinite(peak):
        raise DomainError("per-t output marginal is not normalizable")
    try:
        a, b = tail_bounds(logf, mode, peak, -math.inf, math.inf, 1.0)
    except NonConvergent as exc:
        raise DomainError(f"per-t output marginal is not normalizable at t = {t:g}") from exc
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError(f"per-t output marginal is not normalizable at t = {t:g}")
    panels = 4
    prev = None
    while panels <= 1024:
        ys, w = _panel_nodes(np.array([a, mode, b]), panels)
        p = w * np.exp(kernel.rho0(ys, t) - peak)
        tot = p.sum()
        stat = np.array([tot, p @ ys**2 / tot])
        if prev is not None and np.max(np.abs(stat - prev) / np.abs(stat)) <= rtol:
            return peak + math.log(tot), ys, p / tot
        prev = stat
        panels *= 2
    raise QuadratureFailure("output-marginal rule did not settle")


def log_output_mass(kernel: SphericalKernel, t: float) -> float:
    """ln Z_t = ln int dy exp rho0(y, t)."""
    return _output_rule(kernel, t)[0]


def typical_saddle_t(kernel: SphericalKernel, t: float, window: Optional[tuple] = None, points: int = 241) -> float:
    """t0(t): maximizer of ln|f_n(t')| + n E_t[rho0(Y, t')] with Y from the per-t output law."""
    _, ys, ps = _output_rule(kernel, t)
    L = _saddle_objective(kernel, ys, ps, scale=kernel.n)
    a, b = _scan_window(kernel, L) if window is None else window
    u, _ = _maximize_u(kernel, L, a, b, points, 1e-3, strict=False)
    return math.exp(u)


@dataclass
class SingleLetterMmse:
    mmse: float
    second_moment: float
    zeta_second_moment: float
    t_window: tuple
    extras: dict = field(default_factory=dict)


def spherical_single_letter_mmse(kernel: SphericalKernel, tolerance: float = 1e-6,
                                 rtol: float = 1e-8) -> SingleLetterMmse:
    """E X_i^2 - E zeta^2(Y_i, t0(t)) with t drawn from w_n(t) = f_n(t) Z_t^n (normalized)."""
    cache: dict = {}
    scan: dict = {}

    def per_t(t):
        key = float(t)
        if key not in cache:
            _, ys, ps = _output_rule(kernel, key)
            m, v = kernel._mean_var(ys, key)
            L = _saddle_objective(kernel, ys, ps, scale=kernel.n)
            if "window" not in scan:
                scan["window"] = _scan_window(kernel, L)
            a, b = scan["window"]
            try:
                u, _ = _maximize_u(kernel, L, a - 1.0, b + 1.0, 241, 1e-3, strict=False)
            except FlatMaximum:
                u, _ = _maximize_u(kernel, L, *_scan_window(kernel, L), 241, 1e-3, strict=False)
            t0 = math.exp(u)
            cache[key] = (float(ps @ (v + m * m)), float(ps @ kernel.zeta(ys, t0) ** 2), t0)
        return cache[key]

    def moments(t):
        vals = np.array([per_t(tt)[:2] for tt in np.ravel(t)])
        return vals.T

    rest = lambda t: kernel.n * np.array([log_output_mass(kernel, float(tt)) for tt in np.ravel(t)])  # noqa: E731
    res = _signed_t_integral(kernel, rest, moments, rtol=rtol)
    ex2, ez2 = (float(v) for v in res.moments)
    mmse = ex2 - ez2
    if mmse < -tolerance:
        raise NegativeMmse(f"single-letter MMSE {mmse:.3g} is negative; the saddle approximation broke down")
    t0s = sorted((k, v[2]) for k, v in cache.items())
    return SingleLetterMmse(mmse, ex2, ez2, res.window, {"t0": t0s, "log_total_mass": res.value.log_magnitude})


# -------------------------------------------------------------- sampling


def sample_outputs_given_t(kernel: SphericalKernel, rng: np.random.Generator, t: float, size: int) -> np.ndarray:
    """(size, n) outputs drawn i.i.d. from the per-t output law proportional to e^{rho0(y, t)}."""
    if kernel.y_letters is not None:
        ys = np.asarray(kernel.y_letters, float)
        lr = kernel.rho0(ys, t)
        p = np.exp(lr - logsumexp(lr))
        return rng.choice(ys, size=(size, kernel.n), p=p)
    # closed-form families give a quadratic rho0 in y, i.e. a Gaussian output law
    r = kernel.rho0(np.array([-1.0, 0.0, 1.0]), t)
    curv = r[0] - 2 * r[1] + r[2]
    slope = 0.5 * (r[2] - r[0])
    if not curv < 0:
        raise DomainError("per-t output law is not normalizable")
    var = -1.0 / curv
    return rng.normal(slope * var, math.sqrt(var), size=(size, kernel.n))


def spherical_joint_model(kernel: SphericalKernel) -> JointModel:
    """JointModel whose joint density is F_n(sum phi) times the base weights (closed-form F_n only)."""
    alpha = FiniteAlphabet(kernel.x_letters) if kernel.x_letters is not None else Interval()
    out = FiniteAlphabet(kernel.y_letters) if kernel.y_letters is not None else Interval()

    def log_prior(X):
        return kernel._log_base(np.atleast_2d(np.asarray(X, float)))

    def log_channel(X, y):
        X = np.atleast_2d(np.asarray(X, float))
        s = np.sum(kernel.phi(X, np.asarray(y, float)), axis=1)
        return kernel.f.log_laplace(s)[0]

    def log_partition(y, lam):
        v = spherical_log_partition(kernel, y, lam)
        if v.sign <= 0:
            raise DomainError("partition function is not positive")
        return v.log_magnitude

    return JointModel(kernel.n, kernel.n, alpha, log_prior, log_channel, output_alphabet=out,
                      log_partition_fn=log_partition, conditional_mean_fn=lambda y: spherical_exact_mean(kernel, y),
                      name=kernel.name)
