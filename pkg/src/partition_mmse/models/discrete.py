"""Small finite source/channel pairs for identity checks."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

from ..base import FiniteAlphabet, JointModel
from ..errors import DomainError


def _index_of(X: np.ndarray, letters: np.ndarray) -> np.ndarray:
    """Row index of each state in the lexicographic product ordering."""
    pos = np.searchsorted(letters, X)
    base = len(letters)
    weights = base ** np.arange(X.shape[1] - 1, -1, -1)
    return pos @ weights


def random_discrete_model(rng: np.random.Generator, n: int, input_size: int = 2, m: int = 1,
                          output_size: int = 2, coupling: float = 1.0, name: str = "random_discrete",
                          letters=None) -> JointModel:
    """Dense random prior over X^n and a softmax channel where every y_j sees all of x.

    P(y|x) = prod_j softmax_k(coupling * W_jk . x + c_jk)[y_j]. Input letters are
    drawn from {-3, ..., 3} unless given, so two calls can share an alphabet.
    """
    if input_size < 1 or output_size < 1:
        raise DomainError("alphabet sizes must be positive")
    if letters is None:
        letters = rng.choice(np.arange(-3, 4), size=input_size, replace=False)
    letters = np.sort(np.asarray(letters, dtype=float))
    input_size = len(letters)
    out_letters = np.arange(output_size, dtype=float)
    table = rng.normal(size=input_size**n)
    table -= logsumexp(table)
    W = coupling * rng.normal(size=(m, output_size, n))
    c = rng.normal(size=(m, output_size))

    def log_prior(X):
        return table[_index_of(np.atleast_2d(X), letters)]

    def _logits(X):
        z = np.einsum("jkn,bn->bjk", W, np.atleast_2d(X)) + c
        return z - logsumexp(z, axis=2, keepdims=True)

    def log_channel(X, y):
        ll = _logits(X)
        idx = np.asarray(y, dtype=int)
        return ll[:, np.arange(m), idx].sum(axis=1)

    states = FiniteAlphabet(tuple(letters)).states(n)
    p = np.exp(table)

    def sampler(gen, size):
        X = states[gen.choice(len(states), size=size, p=p / p.sum())]
        pr = np.exp(_logits(X))
        u = gen.random((size, m, 1))
        Y = (u > np.cumsum(pr, axis=2)).sum(axis=2).clip(max=output_size - 1)
        return X, Y.astype(float)

    return JointModel(n, m, FiniteAlphabet(tuple(letters)), log_prior, log_channel,
                      output_alphabet=FiniteAlphabet(tuple(out_letters)), sampler=sampler, name=name)


def noiseless_binary(n: int = 1) -> JointModel:
    """X uniform on {-1, +1}^n observed without noise."""

    def log_prior(X):
        return np.full(np.atleast_2d(X).shape[0], -n * math.log(2.0))

    def log_channel(X, y):
        return np.where(np.all(np.atleast_2d(X) == y, axis=1), 0.0, -np.inf)

    def sampler(rng, size):
        X = rng.choice([-1.0, 1.0], size=(size, n))
        return X, X.copy()

    pm = FiniteAlphabet((-1.0, 1.0))
    return JointModel(n, n, pm, log_prior, log_channel, output_alphabet=pm, sampler=sampler, name="noiseless_binary")


def independent_model(probs, n: int = 1, letters=(-1.0, 1.0), output_probs=(0.5, 0.5)) -> JointModel:
    """i.i.d. source with per-letter probabilities ``probs``; Y is independent noise."""
    lp = np.log(np.asarray(probs, float) / np.sum(probs))
    lq = np.log(np.asarray(output_probs, float) / np.sum(output_probs))
    letters = np.asarray(letters, float)
    order = np.argsort(letters)
    letters, lp = letters[order], lp[order]

    def log_prior(X):
        X = np.atleast_2d(X)
        return lp[np.searchsorted(letters, X)].sum(axis=1)

    def log_channel(X, y):
        return np.full(np.atleast_2d(X).shape[0], float(lq[np.asarray(y, int)].sum()))

    def sampler(rng, size):
        X = rng.choice(letters, size=(size, n), p=np.exp(lp))
        Y = rng.choice(len(lq), size=(size, n), p=np.exp(lq)).astype(float)
        return X, Y

    return JointModel(n, n, FiniteAlphabet(tuple(letters)), log_prior, log_channel,
                      output_alphabet=FiniteAlphabet(tuple(float(k) for k in range(len(lq)))), sampler=sampler,
                      name="independent")
