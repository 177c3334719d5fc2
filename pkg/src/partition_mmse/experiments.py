"""Declarative experiment configs and the batch runner."""
from __future__ import annotations

import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .base import ExpectationConfig
from .errors import ConfigError, PartitionError
from .records import ResultRecord

# parameter defaults per experiment; sweep names must be keys here
DEFAULTS = {
    "verify_identities": {"n": 4, "input_size": 2, "m": 1, "output_size": 2, "coupling": 1.0, "tolerance": 1e-8},
    "awgn_codebook": {"n": 20, "rate": 1.5, "power": 1.0, "beta": 0.5, "min_effective": 1e4},
    "curie_weiss": {"n": 400, "a": 1.5, "b": 0.1, "beta": 1.0, "blocks": 100, "tolerance": 0.02},
    "cauchy": {"n": 50, "k": 30.0, "sigma2": 1.0, "samples": 20, "min_curvature": 2.0, "single_letter": False},
    "spherical": {"kernel": None, "t": 1.0, "samples": 10, "min_curvature": 0.0, "single_letter": False},
}
STOCHASTIC = set(DEFAULTS)
# the metric whose cross-seed standard error an aggregate row reports
PRIMARY = {"verify_identities": "spread", "awgn_codebook": "per_symbol_mse", "curie_weiss": "empirical_mmse",
           "cauchy": "mc_mmse", "spherical": "max_saddle_relative_error"}


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0])
    output: Optional[str] = None
    format: str = "jsonl"

    def __post_init__(self):
        if self.experiment not in DEFAULTS:
            raise ConfigError(f"field 'experiment': unknown value {self.experiment!r}; choose from {sorted(DEFAULTS)}")
        known = DEFAULTS[self.experiment]
        for where, names in (("params", self.params), ("sweep", self.sweep)):
            bad = sorted(set(names) - set(known))
            if bad:
                raise ConfigError(f"field '{where}': unknown parameter(s) {bad} for {self.experiment}; "
                                  f"known: {sorted(known)}")
        for name, values in self.sweep.items():
            if not isinstance(values, list) or not values:
                raise ConfigError(f"field 'sweep.{name}': expected a nonempty list")
        if self.experiment in STOCHASTIC and not self.seeds:
            raise ConfigError("field 'seeds': stochastic experiments need at least one seed")
        if not all(isinstance(s, int) and not isinstance(s, bool) for s in self.seeds):
            raise ConfigError("field 'seeds': seeds must be integers")
        if self.format not in ("csv", "jsonl"):
            raise ConfigError(f"field 'format': expected csv or jsonl, got {self.format!r}")

    def points(self) -> list:
        base = {**DEFAULTS[self.experiment], **self.params}
        names = sorted(self.sweep)
        out = []
        for combo in itertools.product(*[self.sweep[k] for k in names]):
            out.append({**base, **dict(zip(names, combo))})
        return out


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be an object")
    allowed = {"experiment", "params", "sweep", "seeds", "output", "format"}
    extra = sorted(set(raw) - allowed)
    if extra:
        raise ConfigError(f"{source}: unknown field(s) {extra}")
    if "experiment" not in raw:
        raise ConfigError(f"{source}: missing field 'experiment'")
    try:
        return ExperimentConfig(**raw)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text, str(path))
    kernel = cfg.params.get("kernel")
    if isinstance(kernel, str) and not Path(kernel).is_absolute():
        cfg.params["kernel"] = str((Path(path).parent / kernel).resolve())
    return cfg


# ----------------------------------------------------------------- experiments


def _verify_identities(p, seed):
    from .identities import mmse_all_formulas
    from .models.discrete import random_discrete_model
    from .oracle import oracle_mmse

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(101,))))
    model = random_discrete_model(rng, int(p["n"]), int(p["input_size"]), int(p["m"]), int(p["output_size"]),
                                  float(p["coupling"]))
    cfg = ExpectationConfig("enumerate_y")
    rep = mmse_all_formulas(model, cfg, check=False)
    ref = oracle_mmse(model, cfg).value
    metrics = {f"formula_{i + 1}": float(v) for i, v in enumerate(rep.formula_values)}
    metrics.update(oracle=ref, spread=rep.spread,
                   max_oracle_gap=float(np.max(np.abs(rep.formula_values - ref))))
    metrics["within_tolerance"] = float(max(metrics["spread"], metrics["max_oracle_gap"]) <= p["tolerance"])
    methods = {k: "enumeration" for k in metrics}
    methods["oracle"] = "oracle_enumeration"
    return metrics, methods, None, {"tolerance": p["tolerance"]}


def _awgn_codebook(p, seed):
    from .models.codebook import CodebookAsymptotics, codebook_monte_carlo_mse, critical_beta

    res = codebook_monte_carlo_mse(int(p["n"]), p["rate"], p["power"], p["beta"], [seed], p["min_effective"])
    beta_r = critical_beta(p["rate"], p["power"])
    typ = CodebookAsymptotics.typical(p["rate"], p["power"], p["beta"])
    metrics = {
        "per_symbol_mse": res.per_symbol_mse,
        "wiener_prediction": p["power"] / (1 + p["beta"] * p["power"]),
        "beta_R": beta_r,
        "error_dominated": float(p["beta"] < beta_r),
        "rho_beta": typ.rho_beta,
    }
    methods = {"per_symbol_mse": res.method, "wiener_prediction": "closed_form", "beta_R": "closed_form",
               "error_dominated": "regime_rule", "rho_beta": "closed_form"}
    if not math.isnan(res.min_effective_count):
        metrics["min_effective_count"] = res.min_effective_count
        methods["min_effective_count"] = res.method
    return metrics, methods, None, {"replicas": 1}


def _curie_weiss(p, seed):
    from .models.curie_weiss import CurieWeissModel, cw_asymptotic_mmse, cw_empirical_mmse

    model = CurieWeissModel(int(p["n"]), p["a"], p["b"], p["beta"])
    asym = cw_asymptotic_mmse(model)
    emp = cw_empirical_mmse(model, ExpectationConfig("monte_carlo", samples=int(p["blocks"]), seed=seed))
    gap = abs(emp.value - asym.value)
    # declared relative tolerance plus three Monte Carlo standard errors
    ok = gap <= p["tolerance"] * asym.value + 3 * emp.stderr
    metrics = {"asymptotic_mmse": asym.value, "empirical_mmse": emp.value, "relative_gap": gap / asym.value,
               "magnetization": asym.magnetization, "within_tolerance": float(ok)}
    methods = {"asymptotic_mmse": "saddle_asymptotic", "empirical_mmse": "monte_carlo_saddle",
               "relative_gap": "derived", "magnetization": "fixed_point", "within_tolerance": "derived"}
    return metrics, methods, emp.stderr, {"blocks": emp.replicas, "tolerance": p["tolerance"]}


def _cauchy(p, seed):
    from .models.cauchy import CauchyModel, cauchy_conditional_mean, cauchy_saddle_estimator, cauchy_saddle_t

    model = CauchyModel(int(p["n"]), p["sigma2"], p["k"])
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(131,))))
    X, Y = model.sample(rng, int(p["samples"]))
    rel, err, curv = [], [], []
    for x, y in zip(X, Y):
        exact = cauchy_conditional_mean(model, y)
        approx = cauchy_saddle_estimator(model, y, p["min_curvature"])
        rel.append(float(np.linalg.norm(approx - exact) / np.linalg.norm(exact)))
        err.append(float(np.mean((x - exact) ** 2)))
        curv.append(cauchy_saddle_t(model, y).curvature)
    err = np.array(err)
    metrics = {"max_saddle_relative_error": max(rel), "mean_saddle_relative_error": float(np.mean(rel)),
               "mc_mmse": float(err.mean()), "min_curvature": min(curv)}
    methods = {"max_saddle_relative_error": "t_integral_vs_saddle", "mean_saddle_relative_error": "t_integral_vs_saddle",
               "mc_mmse": "monte_carlo_exact_mean", "min_curvature": "saddle"}
    se = float(err.std(ddof=1) / math.sqrt(len(err))) if len(err) > 1 else None
    return metrics, methods, se, {"samples": len(err)}


def _cauchy_point(p):
    if not p["single_letter"]:
        return None
    from .spherical import cauchy_kernel, spherical_single_letter_mmse

    res = spherical_single_letter_mmse(cauchy_kernel(int(p["n"]), p["k"], p["sigma2"]))
    return {"single_letter_mmse": res.mmse, "second_moment": res.second_moment}, \
        {"single_letter_mmse": "spherical_saddle", "second_moment": "spherical_quadrature"}


def _kernel(p):
    from .spherical import build_kernel, load_kernel

    k = p["kernel"]
    if k is None:
        raise ConfigError("field 'params.kernel': a kernel file or inline description is required")
    return build_kernel(k) if isinstance(k, dict) else load_kernel(k)


def _spherical(p, seed):
    from .spherical import sample_outputs_given_t, spherical_estimator, spherical_exact_mean, spherical_saddle_t

    kernel = _kernel(p)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(137,))))
    Y = sample_outputs_given_t(kernel, rng, float(p["t"]), int(p["samples"]))
    rel, ts, curv = [], [], []
    for y in Y:
        sol = spherical_saddle_t(kernel, y)
        exact = spherical_exact_mean(kernel, y)
        approx = spherical_estimator(kernel, y, p["min_curvature"])
        rel.append(float(np.linalg.norm(approx - exact) / max(np.linalg.norm(exact), 1e-300)))
        ts.append(sol.argmax)
        curv.append(sol.curvature)
    metrics = {"max_saddle_relative_error": max(rel), "mean_t_hat": float(np.mean(ts)), "min_curvature": min(curv)}
    methods = {"max_saddle_relative_error": "ratio_vs_saddle", "mean_t_hat": "saddle", "min_curvature": "saddle"}
    return metrics, methods, None, {"samples": len(rel), "kernel": kernel.name}


def _spherical_point(p):
    if not p["single_letter"]:
        return None
    from .spherical import spherical_single_letter_mmse

    res = spherical_single_letter_mmse(_kernel(p))
    return {"single_letter_mmse": res.mmse, "second_moment": res.second_moment}, \
        {"single_letter_mmse": "spherical_saddle", "second_moment": "spherical_quadrature"}


RUNNERS = {
    "verify_identities": (_verify_identities, None),
    "awgn_codebook": (_awgn_codebook, None),
    "curie_weiss": (_curie_weiss, None),
    "cauchy": (_cauchy, _cauchy_point),
    "spherical": (_spherical, _spherical_point),
}


def _task(args):
    experiment, index, point, seed = args
    fn = RUNNERS[experiment][0] if seed is not None else RUNNERS[experiment][1]
    start = time.perf_counter()
    try:
        out = fn(point, seed) if seed is not None else fn(point)
    except (PartitionError, ValueError, ArithmeticError) as exc:
        rec = ResultRecord(experiment, point, {"failed": 1.0}, {"failed": "error"}, seed,
                           error=f"{type(exc).__name__}: {exc}")
    else:
        if out is None:
            return index, seed, None
        if len(out) == 2:
            metrics, methods = out
            se, prov = None, {}
        else:
            metrics, methods, se, prov = out
        rec = ResultRecord(experiment, point, metrics, methods, seed, se, prov)
    rec.wall_ms = 1000 * (time.perf_counter() - start)
    return index, seed, rec


def _aggregate(experiment: str, point: dict, rows: list) -> Optional[ResultRecord]:
    ok = [r for r in rows if r.error is None]
    if len(ok) < 2:
        return None
    names = sorted(set.intersection(*[set(r.metrics) for r in ok]))
    metrics, methods = {}, {}
    stderr = None
    for k in names:
        v = np.array([r.metrics[k] for r in ok], float)
        metrics[f"mean.{k}"] = float(v.mean())
        metrics[f"std.{k}"] = float(v.std(ddof=1))
        methods[f"mean.{k}"] = methods[f"std.{k}"] = f"seed_aggregate({ok[0].methods[k]})"
    primary = PRIMARY[experiment]
    if primary in names:
        stderr = metrics[f"std.{primary}"] / math.sqrt(len(ok))
    return ResultRecord(experiment, point, metrics, methods, None, stderr, {"seeds": [r.seed for r in ok]})


def run(config: ExperimentConfig, workers: int = 1, seed_override: Optional[int] = None) -> list:
    """Records ordered by (point index, seed), then one aggregate row per point."""
    seeds = [seed_override] if seed_override is not None else list(config.seeds)
    points = config.points()
    tasks = [(config.experiment, i, pt, s) for i, pt in enumerate(points) for s in seeds]
    if RUNNERS[config.experiment][1] is not None:
        tasks += [(config.experiment, i, pt, None) for i, pt in enumerate(points)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    by_point: dict = {}
    extra: dict = {}
    for index, seed, rec in results:
        if rec is None:
            continue
        if seed is None:
            extra[index] = rec
        else:
            by_point.setdefault(index, []).append(rec)
    out = []
    for i, pt in enumerate(points):
        rows = sorted(by_point.get(i, []), key=lambda r: r.seed)
        out.extend(rows)
        agg = _aggregate(config.experiment, pt, rows)
        if agg is not None:
            out.append(agg)
        if i in extra:
            out.append(extra[i])
    return out
