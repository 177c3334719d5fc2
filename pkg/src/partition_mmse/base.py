"""Shared value types: alphabets, the joint source/channel model, expectation configs."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Literal, Optional, Sequence, Union

import numpy as np

from .errors import DimensionMismatch, DomainError, StateSpaceTooLarge

DEFAULT_STATE_CAP = 2**24


@dataclass(frozen=True)
class FiniteAlphabet:
    """Finite set of real letters, shared by every coordinate."""

    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise DomainError("empty alphabet")
        if len(set(vals)) != len(vals):
            raise DomainError("alphabet letters must be distinct")
        if not all(math.isfinite(v) for v in vals):
            raise DomainError("alphabet letters must be finite reals")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def count(self, n: int) -> int:
        return len(self.values) ** n

    def states(self, n: int) -> np.ndarray:
        return np.array(list(itertools.product(self.values, repeat=n)), dtype=float).reshape(-1, n)


@dataclass(frozen=True)
class FiniteSupport:
    """Explicit list of admissible vectors (e.g. a codebook); rows are states."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __hash__(self):
        return id(self)

    def count(self, n: int) -> int:
        return self.points.shape[0]

    def states(self, n: int) -> np.ndarray:
        if self.points.shape[1] != n:
            raise DimensionMismatch(f"support vectors have length {self.points.shape[1]}, model n={n}")
        return self.points


@dataclass(frozen=True)
class Interval:
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"empty interval [{self.lo}, {self.hi}]")


Alphabet = Union[FiniteAlphabet, FiniteSupport, Interval]


def is_finite(alphabet) -> bool:
    return isinstance(alphabet, (FiniteAlphabet, FiniteSupport))


@dataclass(frozen=True, eq=False)
class JointModel:
    """A source P(x) and channel P(y|x) given through log-evaluators.

    ``log_prior(X)`` maps an (k, n) array of inputs to k log-probabilities (an
    additive constant is allowed). ``log_channel(X, y)`` maps (k, n) inputs and
    one output vector of length m to k values of ln P(y|x).

    Optional hooks let structured models bypass brute force:

    * ``log_partition_fn(y, lam)`` -- ln Z(y, lam) in closed/1-D form,
    * ``conditional_mean_fn(y)`` -- exact gradient of ln Z at lam = 0,
    * ``log_theta_fn(lam)`` -- ln of the prior moment generating function,
    * ``sampler(rng, size)`` -- draws (X, Y) pairs from the joint law.
    """

    n: int
    m: int
    input_alphabet: Alphabet
    log_prior: Callable[[np.ndarray], np.ndarray]
    log_channel: Callable[[np.ndarray, np.ndarray], np.ndarray]
    output_alphabet: Optional[Alphabet] = None
    sampler: Optional[Callable] = None
    log_partition_fn: Optional[Callable] = None
    conditional_mean_fn: Optional[Callable] = None
    log_theta_fn: Optional[Callable] = None
    state_cap: int = DEFAULT_STATE_CAP
    name: str = "model"

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise DimensionMismatch("n and m must be positive")

    @property
    def finite_input(self) -> bool:
        return is_finite(self.input_alphabet)

    @property
    def finite_output(self) -> bool:
        return isinstance(self.output_alphabet, FiniteAlphabet)

    def state_count(self) -> int:
        if not self.finite_input:
            raise DomainError("continuous input alphabet has no state count")
        return self.input_alphabet.count(self.n)

    @cached_property
    def states(self) -> np.ndarray:
        count = self.state_count()
        if count > self.state_cap:
            raise StateSpaceTooLarge(
                f"{count} input states exceeds the enumeration cap {self.state_cap}; "
                "use a Monte Carlo expectation or a structured log_partition_fn"
            )
        return self.input_alphabet.states(self.n)

    @cached_property
    def log_prior_states(self) -> np.ndarray:
        lp = np.asarray(self.log_prior(self.states), dtype=float)
        lp.setflags(write=False)
        return lp

    def check_y(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if y.shape != (self.m,):
            raise DimensionMismatch(f"y has shape {y.shape}, expected ({self.m},)")
        return y

    def check_lambda(self, lam) -> np.ndarray:
        if lam is None:
            return np.zeros(self.n)
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if lam.shape != (self.n,):
            raise DimensionMismatch(f"lambda has shape {lam.shape}, expected ({self.n},)")
        if not np.all(np.isfinite(lam)):
            raise DomainError("tilt parameters must be finite")
        return lam


def tilt_vector(n: int, values: Optional[Sequence[float]] = None) -> np.ndarray:
    """Tilt parameters lambda; all zeros unless given."""
    if values is None:
        return np.zeros(n)
    lam = np.asarray(values, dtype=float).reshape(n)
    if not np.all(np.isfinite(lam)):
        raise DomainError("tilt parameters must be finite")
    return lam


Strategy = Literal["enumerate_y", "quadrature_y", "monte_carlo"]


@dataclass(frozen=True)
class ExpectationConfig:
    """How to average over the output Y."""

    strategy: Strategy = "enumerate_y"
    samples: int = 100_000
    seed: int = 0
    report_stderr: bool = True
    chunk: int = 4096
    joint_cap: int = DEFAULT_STATE_CAP
    quad_halfwidth: float = 20.0
    quad_panels: int = 400

    def __post_init__(self):
        if self.strategy not in ("enumerate_y", "quadrature_y", "monte_carlo"):
            raise DomainError(f"unknown expectation strategy {self.strategy!r}")
        if self.strategy == "monte_carlo" and self.samples < 1:
            raise DomainError("monte_carlo needs samples >= 1")

    def chunk_generators(self, stream: int = 0):
        """Yield (size, Generator) per chunk; streams depend only on (seed, stream, chunk index)."""
        remaining = self.samples
        j = 0
        while remaining > 0:
            size = min(self.chunk, remaining)
            ss = np.random.SeedSequence(self.seed, spawn_key=(stream, j))
            yield size, np.random.Generator(np.random.Philox(ss))
            remaining -= size
            j += 1


@dataclass
class Estimate:
    value: np.ndarray
    stderr: Optional[np.ndarray] = None
    method: str = ""
    samples: int = 0


@dataclass
class SaddleSolution:
    argmax: float
    exponent_value: float
    iterations: int = 0
    converged: bool = True
    multiplicity: Literal["unique", "symmetric_pair"] = "unique"
    alternatives: tuple = ()
    curvature: float = math.nan
    residual: float = 0.0
    extra: dict = field(default_factory=dict)
