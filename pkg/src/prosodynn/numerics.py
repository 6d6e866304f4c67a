"""Small dense-math helpers shared by the network and lattice code.

Everything is float64. Arrays are plain numpy arrays; the helpers here add
shape checking and the couple of operations numpy does not ship directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DTYPE = np.float64


class DimensionError(ValueError):
    """Raised when array shapes do not line up."""


class NonFiniteError(FloatingPointError):
    """Raised when a NaN or Inf shows up where finite values are required."""


def as_float(a) -> np.ndarray:
    """Float array; float64 unless the input already carries extended precision."""
    a = np.asarray(a)
    if a.dtype == np.longdouble:
        return a
    return a.astype(DTYPE, copy=False)


def check_finite(a: np.ndarray, what: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{what} contains NaN or Inf")
    return a


def affine(W: np.ndarray, x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Return ``W @ x + b`` with explicit shape checks."""
    W = np.asarray(W, dtype=DTYPE)
    x = np.asarray(x, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if W.ndim != 2 or x.ndim != 1 or b.ndim != 1:
        raise DimensionError(f"affine expects matrix/vector/vector, got W{W.shape}, x{x.shape}, b{b.shape}")
    m, n = W.shape
    if x.shape[0] != n or b.shape[0] != m:
        raise DimensionError(f"cannot apply W{W.shape} to x{x.shape} with b{b.shape}")
    return W @ x + b


def sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form: no overflow branch needed
    return 0.5 + 0.5 * np.tanh(0.5 * as_float(z))


def activate(kind: str, v: np.ndarray) -> np.ndarray:
    if kind == "sigmoid":
        return sigmoid(v)
    if kind == "tanh":
        return np.tanh(np.asarray(v, dtype=DTYPE))
    if kind == "linear":
        return np.array(v, dtype=DTYPE)
    raise ValueError(f"unknown activation {kind!r}")


def logsumexp(v, axis=None):
    """Stable ``log(sum(exp(v)))``.

    With ``axis=None`` the whole array is reduced to a float. An empty input
    raises ``ValueError``.
    """
    v = as_float(v)
    if v.size == 0:
        raise ValueError("logsumexp of an empty array")
    m = np.max(v, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    s = np.log(np.sum(np.exp(v - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return s.reshape(())[()]
    return np.squeeze(s, axis=axis)


@dataclass
class OptimizerState:
    learning_rate: float
    momentum: float
    velocity: list = field(default_factory=list)

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")

    @classmethod
    def for_params(cls, params, learning_rate: float, momentum: float) -> "OptimizerState":
        return cls(learning_rate, momentum, [np.zeros_like(p, dtype=DTYPE) for p in params])


def sgd_momentum_step(params, grads, state: OptimizerState):
    """One classical-momentum step.

    ``v <- momentum * v - lr * grad`` then ``p <- p + v``. Inputs are left
    untouched; new parameter arrays and a new state are returned.
    """
    params = list(params)
    grads = list(grads)
    if len(params) != len(grads) or len(params) != len(state.velocity):
        raise DimensionError(
            f"{len(params)} params, {len(grads)} grads, {len(state.velocity)} velocity buffers")
    new_params, new_vel = [], []
    for p, g, v in zip(params, grads, state.velocity):
        if p.shape != g.shape or p.shape != v.shape:
            raise DimensionError(f"param {p.shape}, grad {g.shape}, velocity {v.shape}")
        v2 = state.momentum * v - state.learning_rate * g
        new_vel.append(v2)
        new_params.append(p + v2)
    return new_params, OptimizerState(state.learning_rate, state.momentum, new_vel)
