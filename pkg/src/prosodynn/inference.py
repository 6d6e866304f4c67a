"""Tag lattice: path scores, Viterbi decoding and the log-partition function.

A path's score is the sum of per-position network scores plus tag-to-tag
transition scores. The first position has no predecessor and uses a
separate vector of initial scores instead.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .features import N_TAGS, tag_indices
from .numerics import DTYPE, DimensionError, as_float, logsumexp

MAX_BRUTE_FORCE_T = 8


@dataclass
class TransitionMatrix:
    S: np.ndarray
    S_init: np.ndarray

    def __post_init__(self):
        self.S = as_float(self.S)
        self.S_init = as_float(self.S_init)
        if self.S.shape != (N_TAGS, N_TAGS) or self.S_init.shape != (N_TAGS,):
            raise DimensionError(f"transition shapes {self.S.shape}, {self.S_init.shape}")

    @classmethod
    def zeros(cls) -> "TransitionMatrix":
        return cls(np.zeros((N_TAGS, N_TAGS)), np.zeros(N_TAGS))

    def named_parameters(self):
        return [("trans.S", self.S), ("trans.S_init", self.S_init)]


def _check_scores(f) -> np.ndarray:
    f = as_float(f)
    if f.ndim != 2 or f.shape[1] != N_TAGS:
        raise DimensionError(f"score matrix must be (T, {N_TAGS}), got {f.shape}")
    if f.shape[0] == 0:
        raise ValueError("empty score matrix (T = 0)")
    return f


def sentence_score(f, tr: TransitionMatrix, tags) -> float:
    f = _check_scores(f)
    y = tag_indices(tags)
    if len(y) != f.shape[0]:
        raise DimensionError(f"{len(y)} tags for {f.shape[0]} positions")
    # same accumulation order as viterbi_decode, so best scores agree bit for bit
    s = tr.S_init[y[0]] + f[0, y[0]]
    for t in range(1, len(y)):
        s = s + tr.S[y[t - 1], y[t]]
        s = s + f[t, y[t]]
    return s


def viterbi_decode(f, tr: TransitionMatrix):
    """Best path and its score. Ties go to the lower tag index."""
    f = _check_scores(f)
    T = f.shape[0]
    delta = tr.S_init + f[0]
    back = np.zeros((T, N_TAGS), dtype=np.int64)
    for t in range(1, T):
        cand = delta[:, None] + tr.S  # [prev, cur]
        back[t] = np.argmax(cand, axis=0)  # argmax returns the first maximum
        delta = cand[back[t], np.arange(N_TAGS)] + f[t]
    path = np.empty(T, dtype=np.int64)
    path[-1] = int(np.argmax(delta))
    best = delta[path[-1]]
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, best


def forward_backward(f, tr: TransitionMatrix):
    """Log-space alpha/beta tables and ``log Z``."""
    f = _check_scores(f)
    T = f.shape[0]
    dtype = np.result_type(f, tr.S)
    alpha = np.empty((T, N_TAGS), dtype=dtype)
    beta = np.zeros((T, N_TAGS), dtype=dtype)
    alpha[0] = tr.S_init + f[0]
    for t in range(1, T):
        alpha[t] = logsumexp(alpha[t - 1][:, None] + tr.S, axis=0) + f[t]
    for t in range(T - 2, -1, -1):
        beta[t] = logsumexp(tr.S + (f[t + 1] + beta[t + 1])[None, :], axis=1)
    return alpha, beta, logsumexp(alpha[-1])


def log_partition(f, tr: TransitionMatrix):
    """Return ``(logZ, marginals)``; ``marginals[t, g] = P(tag_t = g)``."""
    alpha, beta, logz = forward_backward(f, tr)
    return logz, np.exp(alpha + beta - logz)


def pairwise_marginals(f, tr: TransitionMatrix, alpha=None, beta=None, logz=None) -> np.ndarray:
    """Expected transition counts summed over positions, shape (|G|, |G|)."""
    f = _check_scores(f)
    if alpha is None:
        alpha, beta, logz = forward_backward(f, tr)
    T = f.shape[0]
    if T == 1:
        return np.zeros((N_TAGS, N_TAGS), dtype=DTYPE)
    # xi[t, a, b] for the transition between t and t+1
    xi = alpha[:-1, :, None] + tr.S[None] + (f[1:] + beta[1:])[:, None, :] - logz
    return np.exp(xi).sum(axis=0)


def brute_force_paths(f, tr: TransitionMatrix):
    """Every tag path with its exact score. Refuses T > 8."""
    f = _check_scores(f)
    T = f.shape[0]
    if T > MAX_BRUTE_FORCE_T:
        raise ValueError(f"refusing to enumerate {N_TAGS}**{T} paths (T > {MAX_BRUTE_FORCE_T})")
    return [(np.array(p), sentence_score(f, tr, p))
            for p in itertools.product(range(N_TAGS), repeat=T)]
