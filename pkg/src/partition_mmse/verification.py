"""The deterministic identity suite behind ``verify``."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .base import ExpectationConfig
from .errors import PartitionError
from .records import ResultRecord


def _rng(*key):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(2024, spawn_key=key)))


def random_model_shapes(rng: np.random.Generator, count: int, max_n: int = 8, max_input: int = 3,
                        max_states: int = 6561):
    """(n, input_size, m, output_size) draws with n <= max_n and input_size^n <= max_states."""
    out = []
    while len(out) < count:
        n = int(rng.integers(1, max_n + 1))
        q = int(rng.integers(2, max_input + 1))
        if q**n > max_states:
            continue
        out.append((n, q, int(rng.integers(1, 3)), int(rng.integers(2, 4))))
    return out


def check_four_formulas(quick: bool):
    from .identities import mmse_all_formulas
    from .models.discrete import random_discrete_model
    from .oracle import oracle_mmse

    rng = _rng(1)
    shapes = random_model_shapes(rng, 5 if quick else 20, max_n=5 if quick else 8)
    cfg = ExpectationConfig("enumerate_y")
    worst = 0.0
    for n, q, m, r in shapes:
        model = random_discrete_model(rng, n, q, m, r)
        rep = mmse_all_formulas(model, cfg, check=False)
        ref = oracle_mmse(model, cfg).value
        worst = max(worst, rep.spread, float(np.max(np.abs(rep.formula_values - ref))))
    return worst, 1e-8, "enumeration_vs_oracle", {"models": len(shapes)}


def check_gaussian_closed_form(quick: bool):
    from .core import mmse
    from .models.gaussian import gaussian_awgn, gaussian_mmse

    grid = [(1.0, 1.0)] if quick else [(p, b) for p in (0.5, 1.0, 2.0) for b in (0.5, 1.0, 2.0)]
    worst = 0.0
    for p, b in grid:
        val = mmse(gaussian_awgn(p, b), ExpectationConfig("quadrature_y")).value
        worst = max(worst, abs(val - gaussian_mmse(p, b)))
    return worst, 1e-6, "quadrature_vs_closed_form", {"points": len(grid)}


def check_matched_mismatch(quick: bool):
    from .core import mmse
    from .identities import mismatched_mse
    from .models.discrete import random_discrete_model

    rng = _rng(2)
    shapes = random_model_shapes(rng, 3 if quick else 10, max_n=5)
    cfg = ExpectationConfig("enumerate_y")
    worst = 0.0
    for n, q, m, r in shapes:
        model = random_discrete_model(rng, n, q, m, r)
        worst = max(worst, abs(mismatched_mse(model, model, cfg).mse - mmse(model, cfg).value))
    return worst, 1e-8, "enumeration", {"models": len(shapes)}


def check_gaussian_mismatch(quick: bool):
    from .identities import mismatched_mse
    from .models.gaussian import gaussian_awgn

    rep = mismatched_mse(gaussian_awgn(1.0, 1.0), gaussian_awgn(2.0, 1.0), ExpectationConfig("quadrature_y"))
    return abs(rep.mse - 5.0 / 9.0), 1e-8, "quadrature_vs_closed_form", {"value": rep.mse}


def check_signed_mixture(quick: bool):
    from .spherical import SineKernel, SphericalKernel, SquaredDifference, mixture_log_density

    rng = _rng(3)
    kernel = SphericalKernel(1, SquaredDifference(shift=0.5), SineKernel(1.5))
    worst = 0.0
    count = 20 if quick else 100
    for _ in range(count):
        x, y = rng.normal(0, 2, 1), rng.normal(0, 2, 1)
        v = float(mixture_log_density(kernel, x, y))
        lf, sg = kernel.f.log_laplace(float(kernel.phi(x, y)[0]))
        direct = float(sg) * math.exp(float(lf))
        worst = max(worst, abs(v - direct) / abs(direct))
    return worst, 1e-8, "signed_quadrature_vs_closed_form", {"points": count}


def _cauchy_pairs(quick: bool):
    from .models.cauchy import CauchyModel
    from .spherical import cauchy_kernel

    rng = _rng(4)
    for n, k in ((3, 6.0), (50, 30.0)):
        model, kernel = CauchyModel(n, 1.0, k), cauchy_kernel(n, k, 1.0)
        _, Y = model.sample(rng, 2 if quick else 5)
        for y in Y:
            yield model, kernel, y, 0.3 * rng.normal(size=n)


def check_cauchy_log_partition(quick: bool):
    from .models.cauchy import cauchy_log_partition
    from .spherical import spherical_log_partition

    worst = max(abs(cauchy_log_partition(m, y, lam) - spherical_log_partition(k, y, lam).log_magnitude)
                for m, k, y, lam in _cauchy_pairs(quick))
    return worst, 1e-10, "t_integral_vs_spherical", {}


def check_cauchy_saddle_t(quick: bool):
    from .models.cauchy import cauchy_saddle_t
    from .spherical import spherical_saddle_t

    worst = max(abs(cauchy_saddle_t(m, y).argmax - spherical_saddle_t(k, y).argmax)
                for m, k, y, _ in _cauchy_pairs(quick))
    return worst, 1e-8, "saddle_vs_spherical", {}


def check_curie_weiss_three_way(quick: bool):
    from .core import conditional_mean
    from .models.curie_weiss import CurieWeissModel, cw_conditional_mean_hs, cw_joint_model
    from .numerics import DiffConfig
    from .oracle import enumerate_posterior

    fd_cfg = DiffConfig(scheme="central_difference")
    rng = _rng(5)
    worst = 0.0
    count = 10 if quick else 50
    for _ in range(count):
        n = int(rng.integers(1, 15))
        model = CurieWeissModel(n, float(rng.uniform(0, 2.5)), float(rng.uniform(-1, 1)), float(rng.uniform(0.1, 2)))
        y = rng.choice([-1.0, 1.0], n)
        ex = enumerate_posterior(cw_joint_model(model), y).mean()
        hs = cw_conditional_mean_hs(model, y)
        fd = conditional_mean(cw_joint_model(model, backend="hs"), y, fd_cfg)
        worst = max(worst, float(np.max(np.abs(ex - hs))), float(np.max(np.abs(ex - fd))))
    return worst, 1e-6, "enumeration_hs_fd", {"draws": count}


def check_critical_beta(quick: bool):
    from .models.codebook import critical_beta

    return abs(critical_beta(math.log(2.0), 1.0) - 3.0), 1e-12, "closed_form", {}


CHECKS = {
    "four_formulas_random_discrete": check_four_formulas,
    "gaussian_closed_form": check_gaussian_closed_form,
    "matched_mismatch_reduction": check_matched_mismatch,
    "gaussian_mismatch": check_gaussian_mismatch,
    "signed_mixture": check_signed_mixture,
    "cauchy_log_partition_cross_module": check_cauchy_log_partition,
    "cauchy_saddle_t_cross_module": check_cauchy_saddle_t,
    "curie_weiss_three_way": check_curie_weiss_three_way,
    "critical_beta": check_critical_beta,
}


def _run_check(args):
    name, quick = args
    try:
        err, tol, method, prov = CHECKS[name](quick)
    except (PartitionError, ValueError, ArithmeticError) as exc:
        return ResultRecord("verify", {"check": name, "quick": quick}, {"passed": 0.0}, {"passed": "error"},
                            error=f"{type(exc).__name__}: {exc}")
    metrics = {"error": float(err), "tolerance": float(tol), "passed": float(err <= tol)}
    methods = {"error": method, "tolerance": "declared", "passed": "derived"}
    return ResultRecord("verify", {"check": name, "quick": quick}, metrics, methods, provenance=prov)


def verify(quick: bool = False, workers: int = 1) -> list:
    """Run every check; records come back in the fixed CHECKS order."""
    tasks = [(name, quick) for name in CHECKS]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_check, tasks))
    return [_run_check(t) for t in tasks]
