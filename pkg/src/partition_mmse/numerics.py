"""Finite differences with Richardson extrapolation and log-domain 1-D quadrature."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import NonConvergent, QuadratureFailure, StepTooLarge

LOG_DROP = 45.0  # nats below the peak at which an integrand tail is discarded


@dataclass(frozen=True)
class DiffConfig:
    """Differentiation settings for tilt derivatives at lambda = 0.

    ``step`` is the base step for gradients, ``hessian_step`` for second
    derivatives; both are scaled by max(1, |lambda_i|). Each Richardson level
    halves the step once. Second differences take a larger step and an extra
    level because their round-off grows as 1/h^2.
    """

    scheme: Literal["analytic_if_available", "central_difference"] = "analytic_if_available"
    step: float = 1e-5
    hessian_step: float = 1e-2
    richardson: bool = True
    levels: int = 1
    hessian_levels: int = 2
    tolerance: float = 1e-3

    def __post_init__(self):
        if not (self.step > 0 and self.hessian_step > 0):
            raise ValueError("finite-difference steps must be positive")
        if self.scheme not in ("analytic_if_available", "central_difference"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def n_levels(self) -> int:
        return self.levels if self.richardson else 0

    @property
    def n_hessian_levels(self) -> int:
        return self.hessian_levels if self.richardson else 0


def richardson(quotient: Callable[[float], float], h: float, levels: int):
    """Extrapolate a difference quotient whose error expands in even powers of h.

    Returns (estimate, disagreement) where disagreement is the change made by
    the last extrapolation level (zero when levels == 0).
    """
    row = [quotient(h)]
    if levels == 0:
        return row[0], 0.0
    last = row[0]
    for k in range(1, levels + 1):
        new = [quotient(h / 2**k)]
        for j in range(1, k + 1):
            fac = 4.0**j
            new.append((fac * new[j - 1] - row[j - 1]) / (fac - 1.0))
        last, row = row[-1], new
    return row[-1], abs(row[-1] - last)


def _check(value, disagreement, cfg: DiffConfig, what: str):
    if not np.isfinite(value):
        raise NonConvergent(f"non-finite {what} from finite differences")
    if disagreement > cfg.tolerance * max(1.0, abs(value)):
        raise StepTooLarge(f"Richardson levels disagree by {disagreement:.3g} for {what}")


def fd_gradient(f: Callable[[np.ndarray], float], n: int, cfg: DiffConfig, at=None):
    at = np.zeros(n) if at is None else np.asarray(at, dtype=float)
    grad = np.empty(n)
    worst = 0.0
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        h = cfg.step * max(1.0, abs(at[i]))
        val, dis = richardson(lambda s: (f(at + s * e) - f(at - s * e)) / (2 * s), h, cfg.n_levels)
        _check(val, dis, cfg, f"d/dlambda_{i}")
        grad[i] = val
        worst = max(worst, dis)
    return grad, worst


def fd_hessian(f: Callable[[np.ndarray], float], n: int, cfg: DiffConfig, at=None, diagonal_only=False):
    at = np.zeros(n) if at is None else np.asarray(at, dtype=float)
    f0 = f(at)
    hess = np.zeros((n, n))
    worst = 0.0
    eye = np.eye(n)
    for i in range(n):
        h = cfg.hessian_step * max(1.0, abs(at[i]))
        ei = eye[i]
        val, dis = richardson(lambda s: (f(at + s * ei) - 2 * f0 + f(at - s * ei)) / (s * s), h,
                              cfg.n_hessian_levels)
        _check(val, dis, cfg, f"d2/dlambda_{i}^2")
        hess[i, i] = val
        worst = max(worst, dis)
        if diagonal_only:
            continue
        for j in range(i):
            ej = eye[j]

            def q(s):
                return (
                    f(at + s * ei + s * ej) - f(at + s * ei - s * ej) - f(at - s * ei + s * ej) + f(at - s * ei - s * ej)
                ) / (4 * s * s)

            val, dis = richardson(q, h, cfg.n_hessian_levels)
            _check(val, dis, cfg, f"d2/dlambda_{i}dlambda_{j}")
            hess[i, j] = hess[j, i] = val
            worst = max(worst, dis)
    return (np.diag(hess).copy() if diagonal_only else hess), worst


# ---------------------------------------------------------------- quadrature


def find_mode(logf: Callable[[float], float], lo: float, hi: float, guess: float, scale: float,
              grid: int = 0):
    """Locate a maximizer of a log-integrand on [lo, hi] by uphill doubling, then Brent refinement."""

    def clip(x):
        return min(max(x, lo), hi)

    if grid:
        a = guess - 50 * scale if not math.isfinite(lo) else lo
        b = guess + 50 * scale if not math.isfinite(hi) else hi
        xs = np.linspace(a, b, grid)
        vals = np.array([logf(x) for x in xs])
        guess = float(xs[int(np.nanargmax(vals))])
        scale = (b - a) / grid
    best, fbest = clip(guess), logf(clip(guess))
    step = scale
    for _ in range(400):
        moved = False
        for cand in (clip(best - step), clip(best + step)):
            fc = logf(cand)
            if fc > fbest:
                best, fbest, moved = cand, fc, True
        if not moved:
            break
        step *= 2.0
        if step > 1e12 * max(1.0, scale):
            raise NonConvergent("log-integrand keeps increasing; integral diverges")
    else:
        raise NonConvergent("mode search did not terminate")
    left, right = clip(best - step), clip(best + step)
    res = optimize.minimize_scalar(lambda x: -logf(x), bounds=(left, right), method="bounded",
                                   options={"xatol": 1e-9 * max(scale, abs(best))})
    x = float(res.x)
    fx = logf(x)
    if not fx >= fbest:
        x, fx = best, fbest
    return x, fx


def tail_bounds(logf, mode: float, peak: float, lo: float, hi: float, scale: float, drop: float = LOG_DROP):
    """Expand outward from the mode until the log-integrand falls ``drop`` nats below its peak."""

    def walk(direction, limit):
        step = scale
        x = mode
        for _ in range(400):
            nxt = x + direction * step
            if (direction < 0 and nxt <= limit) or (direction > 0 and nxt >= limit):
                return limit
            if logf(nxt) < peak - drop:
                return nxt
            x = nxt
            step *= 1.6
        raise NonConvergent("integrand tail does not decay; integral diverges")

    return walk(-1, lo), walk(+1, hi)


def log_quad(logf: Callable[[float], float], lo: float, hi: float, guess: float = 0.0, scale: float = 1.0,
             points: Sequence[float] = (), epsrel: float = 1e-13, grid: int = 0):
    """ln of the integral of exp(logf) over [lo, hi], computed around the dominant peak.

    Returns (log_value, mode, peak, (a, b)) where [a, b] is the effective domain.
    """
    mode, peak = find_mode(logf, lo, hi, guess, scale, grid=grid)
    if not np.isfinite(peak):
        if peak == -np.inf:
            return -np.inf, mode, peak, (lo, hi)
        raise NonConvergent("log-integrand is not finite at its maximum")
    a, b = tail_bounds(logf, mode, peak, lo, hi, scale)
    brk = sorted({p for p in [mode, *points] if a < p < b})
    val, err = integrate.quad(lambda x: math.exp(logf(x) - peak), a, b, points=brk or None,
                              epsabs=0.0, epsrel=epsrel, limit=1000)
    if not (val > 0 and np.isfinite(val)):
        raise QuadratureFailure(f"quadrature returned {val}")
    if err > 1e-6 * val:
        raise QuadratureFailure(f"quadrature error estimate {err:.3g} too large relative to {val:.3g}")
    return peak + math.log(val), mode, peak, (a, b)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def _panel_nodes(edges: np.ndarray, panels: int):
    """Nodes and weights of a 20-point Gauss-Legendre rule on ``panels`` equal cells per segment."""
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        e = np.linspace(lo, hi, panels + 1)
        half = 0.5 * np.diff(e)
        mid = 0.5 * (e[1:] + e[:-1])
        xs.append((mid[:, None] + half[:, None] * _GL_NODES).ravel())
        ws.append((half[:, None] * _GL_WEIGHTS).ravel())
    return np.concatenate(xs), np.concatenate(ws)


def window_integral(logf_vec: Callable[[np.ndarray], np.ndarray], a: float, b: float, peak: float,
                    moments: Optional[Callable[[np.ndarray], np.ndarray]] = None, points: Sequence[float] = (),
                    rtol: float = 1e-13, start: int = 4, max_panels: int = 4096) -> np.ndarray:
    """Integrals of exp(logf - peak) * [1, moments(x)...] over a finite window.

    Composite Gauss-Legendre; the panel count doubles until every component
    changes by less than ``rtol`` relative to the largest one.
    """
    edges = np.array(sorted({a, b, *[p for p in points if a < p < b]}), dtype=float)

    def rule(panels):
        x, w = _panel_nodes(edges, panels)
        lv = np.asarray(logf_vec(x), dtype=float)
        lv = np.where(np.isnan(lv), -np.inf, lv)
        base = w * np.exp(lv - peak)
        if moments is None:
            return np.array([base.sum()])
        return np.concatenate([[base.sum()], np.atleast_2d(moments(x)) @ base])

    panels = start
    prev = rule(panels)
    while panels < max_panels:
        panels *= 2
        cur = rule(panels)
        if np.max(np.abs(cur - prev)) <= rtol * np.max(np.abs(cur)):
            return cur
        prev = cur
    raise QuadratureFailure(f"Gauss-Legendre refinement did not settle within {max_panels} panels")


def log_window_quad(logf_vec: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, guess: float = 0.0,
                    scale: float = 1.0, moments=None, points: Sequence[float] = (), rtol: float = 1e-13):
    """ln of the integral of exp(logf) over [lo, hi] for a vectorized log-integrand.

    Returns (log_value, mode, peak, window, normalized_moments) where the moments are
    the averages of ``moments(x, mode)`` under the normalized integrand (None if not
    requested); passing the mode lets callers center before squaring.
    """
    scalar = lambda x: float(logf_vec(np.array([x]))[0])  # noqa: E731
    mode, peak = find_mode(scalar, lo, hi, guess, scale)
    if not np.isfinite(peak):
        if peak == -np.inf:
            return -np.inf, mode, peak, (lo, hi), None
        raise NonConvergent("log-integrand is not finite at its maximum")
    a, b = tail_bounds(scalar, mode, peak, lo, hi, scale)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise NonConvergent("integration window is unbounded")
    mfn = None if moments is None else (lambda x: moments(x, mode))
    tot = window_integral(logf_vec, a, b, peak, mfn, points=[mode, *points], rtol=rtol)
    if not tot[0] > 0:
        raise QuadratureFailure(f"quadrature returned {tot[0]}")
    mom = tot[1:] / tot[0] if moments is not None else None
    return peak + math.log(tot[0]), mode, peak, (a, b), mom


def quad_moments(fn_vec: Callable[[float], np.ndarray], a: float, b: float, points: Sequence[float] = (),
                 epsrel: float = 1e-12):
    """Vector-valued adaptive Gauss-Kronrod integral on a finite interval."""
    brk = sorted({p for p in points if a < p < b})
    if brk:
        edges = [a, *brk, b]
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            val, _ = integrate.quad_vec(fn_vec, lo, hi, epsabs=0.0, epsrel=epsrel, norm="max", limit=2000)
            total = total + val
        return np.asarray(total)
    val, _ = integrate.quad_vec(fn_vec, a, b, epsabs=0.0, epsrel=epsrel, norm="max", limit=2000)
    return np.asarray(val)


def gauss_hermite_log_integral(logf_vec: Callable[[np.ndarray], np.ndarray], center: float, scale: float,
                               nodes: int = 64):
    """ln of the integral of exp(logf) over R after the affine map x = center + sqrt(2)*scale*z."""
    z, w = np.polynomial.hermite.hermgauss(nodes)
    x = center + math.sqrt(2.0) * scale * z
    lv = logf_vec(x) + z**2 + np.log(w)
    top = np.max(lv)
    return top + math.log(np.sum(np.exp(lv - top))) + math.log(math.sqrt(2.0) * scale), x, lv


def log_cosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2.0 * x)) - math.log(2.0)


@dataclass(frozen=True)
class SignedLogValue:
    """A real number stored as (sign, ln|value|)."""

    log_magnitude: float
    sign: int

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError("sign must be -1, 0 or +1")
        if (self.sign == 0) != (self.log_magnitude == -math.inf):
            raise ValueError("sign 0 exactly when the magnitude is zero")

    @classmethod
    def from_parts(cls, log_pos: float, log_neg: float) -> "SignedLogValue":
        """Combine ln(positive part) and ln(negative part) of a signed sum."""
        if log_pos == log_neg:
            return cls(-math.inf, 0)
        if log_pos > log_neg:
            return cls(log_pos + math.log1p(-math.exp(log_neg - log_pos)), 1)
        return cls(log_neg + math.log1p(-math.exp(log_pos - log_neg)), -1)

    @classmethod
    def from_float(cls, x: float) -> "SignedLogValue":
        if x == 0:
            return cls(-math.inf, 0)
        return cls(math.log(abs(x)), 1 if x > 0 else -1)

    def __float__(self):
        return self.sign * math.exp(self.log_magnitude) if self.sign else 0.0


# ------------------------------------------------------------ 1-D maximization


def grid_maxima(f_vec: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, points: int = 401):
    """Local maxima of a vectorized function on a uniform grid, as (left, mid, right, value) brackets."""
    xs = np.linspace(lo, hi, points)
    v = np.asarray(f_vec(xs), dtype=float)
    v = np.where(np.isnan(v), -np.inf, v)
    out = []
    for i in range(points):
        left = v[i - 1] if i > 0 else -np.inf
        right = v[i + 1] if i < points - 1 else -np.inf
        if np.isfinite(v[i]) and v[i] >= left and v[i] > right:
            out.append((xs[max(i - 1, 0)], xs[i], xs[min(i + 1, points - 1)], float(v[i])))
    return out


def golden_newton(f: Callable[[float], float], a: float, b: float, c: float,
                  df: Optional[Callable[[float], float]] = None, step: float = 1e-5):
    """Maximize f inside the bracket a < b < c (f(b) >= f(a), f(c)).

    Golden-section search narrows the bracket; the stationarity equation f' = 0
    is then solved by a safeguarded Newton (Brent) step on the final interval.
    Without ``df`` the derivative is a Richardson-extrapolated central difference.
    Returns (x, iterations).
    """
    if df is None:
        def df(x):
            h = step * max(1.0, abs(x))
            return richardson(lambda s: (f(x + s) - f(x - s)) / (2 * s), h, 1)[0]

    res = optimize.minimize_scalar(lambda x: -f(x), bracket=(a, b, c), method="golden", tol=1e-10)
    x = float(res.x)
    iters = int(getattr(res, "nit", 0))
    width = max(1e-6 * max(1.0, abs(x)), 4 * abs(c - a) * 1e-8)
    lo, hi = x - width, x + width
    dlo, dhi = df(lo), df(hi)
    grow = 0
    while dlo * dhi > 0 and grow < 30:
        width *= 2
        lo, hi = max(a, x - width), min(c, x + width)
        dlo, dhi = df(lo), df(hi)
        grow += 1
    if dlo * dhi <= 0:
        r = optimize.brentq(df, lo, hi, xtol=1e-14 * max(1.0, abs(x)), rtol=1e-15, maxiter=200, full_output=True)
        x = float(r[0])
        iters += r[1].iterations
    return x, iters
