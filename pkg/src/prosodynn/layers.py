"""Feed-forward and bidirectional LSTM layers with hand-written gradients.

All layers work on padded batches laid out time-major, ``(T, B, features)``,
with a ``(T, B)`` mask marking real positions. Single-sentence helpers wrap
the batch code with ``B = 1``.

The LSTM uses diagonal peepholes. Gate pre-activations for the input, forget,
cell and output blocks are stacked (in that order) into one ``4H`` axis so a
whole time step is two matrix products.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .features import N_TAGS, EncodedSentence
from .numerics import DTYPE, DimensionError, sigmoid

TOPOLOGY_RE = re.compile(r"^[FB]*$")
INIT_SCALE = 0.1


def check_topology(topology: str) -> str:
    if not isinstance(topology, str) or not TOPOLOGY_RE.match(topology):
        raise ValueError(f"topology must be a string over 'F' and 'B', got {topology!r}")
    return topology


class InputBatch:
    """Padded batch of encoded sentences, kept sparse in one-hot mode."""

    def __init__(self, sentences: Sequence[EncodedSentence]):
        if not sentences:
            raise ValueError("empty batch")
        first = sentences[0]
        for s in sentences:
            if s.dim != first.dim or (s.indices is None) != (first.indices is None):
                raise DimensionError("all sentences in a batch must share one encoding")
            if len(s) == 0:
                raise ValueError("cannot encode an empty sentence")
        self.dim = first.dim
        self.lengths = np.array([len(s) for s in sentences])
        T, B = int(self.lengths.max()), len(sentences)
        k = first.dense.shape[1]
        self.mask = np.zeros((T, B), dtype=DTYPE)
        self.dense = np.zeros((T, B, k), dtype=DTYPE)
        self.indices = None if first.indices is None else np.zeros((T, B), dtype=np.int64)
        for j, s in enumerate(sentences):
            n = len(s)
            self.mask[:n, j] = 1.0
            self.dense[:n, j] = s.dense
            if self.indices is not None:
                self.indices[:n, j] = s.indices
        self.onehot_size = self.dim - k if self.indices is not None else 0

    @property
    def shape(self):
        return self.mask.shape


def project(W: np.ndarray, X) -> np.ndarray:
    """``X @ W.T`` over the last axis; one-hot inputs become column lookups."""
    if isinstance(X, InputBatch):
        if W.shape[1] != X.dim:
            raise DimensionError(f"weight {W.shape} does not accept input dim {X.dim}")
        if X.indices is None:
            return X.dense @ W.T
        nh = X.onehot_size
        out = W[:, :nh].T[X.indices]
        if X.dense.shape[2]:
            out = out + X.dense @ W[:, nh:].T
        return out
    if W.shape[1] != X.shape[-1]:
        raise DimensionError(f"weight {W.shape} does not accept input dim {X.shape[-1]}")
    return X @ W.T


def project_grad(dY: np.ndarray, X, W: np.ndarray, need_dx: bool = True):
    """Gradients of :func:`project` w.r.t. the weight and (if dense) the input."""
    out_dim = W.shape[0]
    flat_dy = dY.reshape(-1, out_dim)
    if isinstance(X, InputBatch):
        if X.indices is None:
            dW = flat_dy.T @ X.dense.reshape(-1, X.dim)
        else:
            nh = X.onehot_size
            cols = np.zeros((nh, out_dim), dtype=DTYPE)
            np.add.at(cols, X.indices.reshape(-1), flat_dy)
            dW = np.empty_like(W)
            dW[:, :nh] = cols.T
            if X.dense.shape[2]:
                dW[:, nh:] = flat_dy.T @ X.dense.reshape(-1, X.dense.shape[2])
        return dW, None
    dW = flat_dy.T @ X.reshape(-1, X.shape[-1])
    dX = dY @ W if need_dx else None
    return dW, dX


class FeedForwardLayer:
    kind = "F"

    def __init__(self, in_dim: int, hidden: int, rng=None, scale: float = INIT_SCALE):
        self.in_dim, self.hidden = in_dim, hidden
        self.W = np.zeros((hidden, in_dim), dtype=DTYPE)
        self.b = np.zeros(hidden, dtype=DTYPE)
        if rng is not None:
            self.W[...] = rng.uniform(-scale, scale, self.W.shape)

    @property
    def out_dim(self) -> int:
        return self.hidden

    def named_parameters(self):
        return [("W", self.W), ("b", self.b)]

    def forward(self, X, mask):
        Y = np.tanh(project(self.W, X) + self.b) * mask[..., None]
        return Y, (X, Y)

    def backward(self, dY, cache, mask, need_dx=True):
        X, Y = cache
        dA = dY * (1.0 - Y * Y) * mask[..., None]
        dW, dX = project_grad(dA, X, self.W, need_dx)
        return {"W": dW, "b": dA.sum(axis=(0, 1))}, dX


def ffnn_forward(layer: FeedForwardLayer, xs) -> np.ndarray:
    X = np.asarray(xs, dtype=DTYPE)
    if X.ndim != 2 or X.shape[1] != layer.in_dim:
        raise DimensionError(f"expected (T, {layer.in_dim}) inputs, got {X.shape}")
    Y, _ = layer.forward(X[:, None, :], np.ones((X.shape[0], 1)))
    return Y[:, 0, :]


class LstmCellParams:
    """Parameters of one LSTM direction.

    ``W_x`` is (4H, in), ``W_h`` is (4H, H) and ``b`` is (4H,), blocks ordered
    input, forget, cell, output. Peepholes ``p_i``, ``p_f``, ``p_o`` are
    length-H vectors.
    """

    def __init__(self, in_dim: int, hidden: int, rng=None, scale: float = INIT_SCALE):
        H = hidden
        self.in_dim, self.hidden = in_dim, H
        self.W_x = np.zeros((4 * H, in_dim), dtype=DTYPE)
        self.W_h = np.zeros((4 * H, H), dtype=DTYPE)
        self.p_i = np.zeros(H, dtype=DTYPE)
        self.p_f = np.zeros(H, dtype=DTYPE)
        self.p_o = np.zeros(H, dtype=DTYPE)
        self.b = np.zeros(4 * H, dtype=DTYPE)
        if rng is not None:
            for a in (self.W_x, self.W_h, self.p_i, self.p_f, self.p_o):
                a[...] = rng.uniform(-scale, scale, a.shape)

    def named_parameters(self):
        return [("W_x", self.W_x), ("W_h", self.W_h), ("p_i", self.p_i),
                ("p_f", self.p_f), ("p_o", self.p_o), ("b", self.b)]

    def _block(self, a, k):
        H = self.hidden
        return a[k * H:(k + 1) * H]

    W_xi = property(lambda s: s._block(s.W_x, 0))
    W_xf = property(lambda s: s._block(s.W_x, 1))
    W_xc = property(lambda s: s._block(s.W_x, 2))
    W_xo = property(lambda s: s._block(s.W_x, 3))
    W_hi = property(lambda s: s._block(s.W_h, 0))
    W_hf = property(lambda s: s._block(s.W_h, 1))
    W_hc = property(lambda s: s._block(s.W_h, 2))
    W_ho = property(lambda s: s._block(s.W_h, 3))
    b_i = property(lambda s: s._block(s.b, 0))
    b_f = property(lambda s: s._block(s.b, 1))
    b_c = property(lambda s: s._block(s.b, 2))
    b_o = property(lambda s: s._block(s.b, 3))


def _step(p: LstmCellParams, zx, h_prev, c_prev, p_if=None):
    """One time step from the input projection ``zx = W_x x + b``."""
    H = p.hidden
    if p_if is None:
        p_if = np.concatenate([p.p_i, p.p_f])
    z = zx + h_prev @ p.W_h.T
    # input and forget gates share one pass; both peek at c_{t-1}
    a_if = z[..., :2 * H] + p_if * np.concatenate([c_prev, c_prev], axis=-1)
    s_if = 0.5 + 0.5 * np.tanh(0.5 * a_if)
    i, f = s_if[..., :H], s_if[..., H:]
    g = np.tanh(z[..., 2 * H:3 * H])
    c = f * c_prev + i * g
    o = sigmoid(z[..., 3 * H:] + p.p_o * c)
    tc = np.tanh(c)
    return o * tc, c, (i, f, g, o, tc)


def lstm_cell_step(p: LstmCellParams, x_t, h_prev, c_prev):
    """Single LSTM step on plain vectors; returns ``(h_t, c_t)``."""
    x_t = np.asarray(x_t, dtype=DTYPE)
    h_prev = np.asarray(h_prev, dtype=DTYPE)
    c_prev = np.asarray(c_prev, dtype=DTYPE)
    if x_t.shape != (p.in_dim,) or h_prev.shape != (p.hidden,) or c_prev.shape != (p.hidden,):
        raise DimensionError(
            f"cell expects x({p.in_dim},), h({p.hidden},), c({p.hidden},); "
            f"got x{x_t.shape}, h{h_prev.shape}, c{c_prev.shape}")
    h, c, _ = _step(p, p.W_x @ x_t + p.b, h_prev, c_prev)
    return h, c


def _scan(p: LstmCellParams, X, mask, reverse: bool):
    T, B = mask.shape
    H = p.hidden
    Zx = project(p.W_x, X) + p.b
    p_if = np.concatenate([p.p_i, p.p_f])
    full = mask.all(axis=1)
    h = np.zeros((B, H), dtype=Zx.dtype)
    c = np.zeros((B, H), dtype=Zx.dtype)
    hs = np.zeros((T, B, H), dtype=Zx.dtype)
    steps = [None] * T
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        h_new, c_new, gates = _step(p, Zx[t], h, c, p_if)
        steps[t] = (h, c, c_new, gates)
        if full[t]:
            h, c = h_new, c_new
            hs[t] = h
            continue
        # padded positions keep the previous state (zeros for a reverse scan)
        m = mask[t][:, None]
        h = m * h_new + (1.0 - m) * h
        c = m * c_new + (1.0 - m) * c
        hs[t] = h * m
    return hs, steps


def _scan_backward(p: LstmCellParams, X, mask, steps, dhs, reverse: bool, need_dx: bool):
    T, B = mask.shape
    H = p.hidden
    dZ = np.zeros((T, B, 4 * H), dtype=DTYPE)
    dW_h = np.zeros_like(p.W_h)
    dp_i = np.zeros(H)
    dp_f = np.zeros(H)
    dp_o = np.zeros(H)
    dh = np.zeros((B, H), dtype=DTYPE)
    dc = np.zeros((B, H), dtype=DTYPE)
    order = range(T) if reverse else range(T - 1, -1, -1)
    for t in order:
        m = mask[t][:, None]
        h_prev, c_prev, c_new, (i, f, g, o, tc) = steps[t]
        dh = dh + dhs[t] * m
        dh_new, dc_new = m * dh, m * dc
        dh_carry, dc_carry = (1.0 - m) * dh, (1.0 - m) * dc
        do = dh_new * tc
        dc_new = dc_new + dh_new * o * (1.0 - tc * tc)
        da_o = do * o * (1.0 - o)
        dc_new = dc_new + da_o * p.p_o
        di = dc_new * g
        df = dc_new * c_prev
        dg = dc_new * i
        da_i = di * i * (1.0 - i)
        da_f = df * f * (1.0 - f)
        da_g = dg * (1.0 - g * g)
        dz = np.concatenate([da_i, da_f, da_g, da_o], axis=1)
        dZ[t] = dz
        dp_i += np.sum(da_i * c_prev, axis=0)
        dp_f += np.sum(da_f * c_prev, axis=0)
        dp_o += np.sum(da_o * c_new, axis=0)
        dW_h += dz.T @ h_prev
        dh = dz @ p.W_h + dh_carry
        dc = dc_new * f + da_i * p.p_i + da_f * p.p_f + dc_carry
    dW_x, dX = project_grad(dZ, X, p.W_x, need_dx)
    grads = {"W_x": dW_x, "W_h": dW_h, "p_i": dp_i, "p_f": dp_f, "p_o": dp_o,
             "b": dZ.sum(axis=(0, 1))}
    return grads, dX


class BlstmLayer:
    kind = "B"

    def __init__(self, in_dim: int, hidden: int, rng=None, scale: float = INIT_SCALE):
        self.in_dim, self.hidden = in_dim, hidden
        self.forward_cell = LstmCellParams(in_dim, hidden, rng, scale)
        self.backward_cell = LstmCellParams(in_dim, hidden, rng, scale)

    @property
    def out_dim(self) -> int:
        return 2 * self.hidden

    def named_parameters(self):
        return ([("fwd." + n, a) for n, a in self.forward_cell.named_parameters()]
                + [("bwd." + n, a) for n, a in self.backward_cell.named_parameters()])

    def forward(self, X, mask):
        hf, sf = _scan(self.forward_cell, X, mask, reverse=False)
        hb, sb = _scan(self.backward_cell, X, mask, reverse=True)
        return np.concatenate([hf, hb], axis=2), (X, sf, sb)

    def backward(self, dY, cache, mask, need_dx=True):
        X, sf, sb = cache
        H = self.hidden
        gf, dxf = _scan_backward(self.forward_cell, X, mask, sf, dY[..., :H], False, need_dx)
        gb, dxb = _scan_backward(self.backward_cell, X, mask, sb, dY[..., H:], True, need_dx)
        grads = {"fwd." + k: v for k, v in gf.items()}
        grads.update({"bwd." + k: v for k, v in gb.items()})
        dX = dxf + dxb if need_dx and dxf is not None else None
        return grads, dX


def blstm_forward(layer: BlstmLayer, xs) -> np.ndarray:
    X = np.asarray(xs, dtype=DTYPE)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("blstm_forward needs a non-empty (T, in) sequence")
    if X.shape[1] != layer.in_dim:
        raise DimensionError(f"expected input dim {layer.in_dim}, got {X.shape[1]}")
    Y, _ = layer.forward(X[:, None, :], np.ones((X.shape[0], 1)))
    return Y[:, 0, :]


_LAYER_TYPES = {"F": FeedForwardLayer, "B": BlstmLayer}


class NetworkModel:
    """Stacked F/B layers followed by a linear output over the tag set."""

    def __init__(self, topology: str, input_dim: int, hidden: int, seed: Optional[int] = 0,
                 level: str = "PW", feature_mode: str = "onehot", cascade: bool = False,
                 init_scale: float = INIT_SCALE):
        self.topology = check_topology(topology)
        if input_dim <= 0 or hidden <= 0:
            raise ValueError("input_dim and hidden must be positive")
        self.input_dim, self.hidden = int(input_dim), int(hidden)
        self.level, self.feature_mode, self.cascade = level, feature_mode, bool(cascade)
        rng = np.random.default_rng(seed) if seed is not None else None
        self.layers = []
        d = self.input_dim
        for kind in topology:
            layer = _LAYER_TYPES[kind](d, self.hidden, rng, init_scale)
            self.layers.append(layer)
            d = layer.out_dim
        self.W_out = np.zeros((N_TAGS, d), dtype=DTYPE)
        self.b_out = np.zeros(N_TAGS, dtype=DTYPE)
        if rng is not None:
            self.W_out[...] = rng.uniform(-init_scale, init_scale, self.W_out.shape)

    def signature(self):
        return (self.topology, self.input_dim, self.hidden)

    def named_parameters(self):
        out = []
        for n, layer in enumerate(self.layers):
            out += [(f"layer{n}.{layer.kind}.{k}", a) for k, a in layer.named_parameters()]
        out += [("out.W", self.W_out), ("out.b", self.b_out)]
        return out


@dataclass
class ForwardCache:
    signature: tuple
    batch: InputBatch
    layer_caches: list = field(default_factory=list)
    top: object = None
    single: bool = False


def forward_batch(model: NetworkModel, batch: InputBatch):
    """Scores of shape (T, B, |G|) for a padded batch, plus the backward cache."""
    if batch.dim != model.input_dim:
        raise DimensionError(f"model expects input dim {model.input_dim}, got {batch.dim}")
    mask = batch.mask
    X = batch
    caches = []
    for layer in model.layers:
        X, c = layer.forward(X, mask)
        caches.append(c)
    scores = (project(model.W_out, X) + model.b_out) * mask[..., None]
    return scores, ForwardCache(model.signature(), batch, caches, X)


def forward_from(model: NetworkModel, X, mask, start: int) -> np.ndarray:
    """Scores computed from the input ``X`` of layer ``start`` upward (no cache).

    ``start == len(model.layers)`` applies only the output projection.
    """
    for layer in model.layers[start:]:
        X, _ = layer.forward(X, mask)
    return (project(model.W_out, X) + model.b_out) * mask[..., None]


def backward_batch(model: NetworkModel, cache: ForwardCache, dscores: np.ndarray) -> dict:
    if cache.signature != model.signature():
        raise ValueError(f"cache was built for {cache.signature}, model is {model.signature()}")
    mask = cache.batch.mask
    if dscores.shape != mask.shape + (N_TAGS,):
        raise DimensionError(f"dScores shape {dscores.shape} does not match {mask.shape + (N_TAGS,)}")
    dscores = dscores * mask[..., None]
    grads = {}
    dW, dX = project_grad(dscores, cache.top, model.W_out, need_dx=bool(model.layers))
    grads["out.W"] = dW
    grads["out.b"] = dscores.sum(axis=(0, 1))
    for n in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[n]
        g, dX = layer.backward(dX, cache.layer_caches[n], mask, need_dx=n > 0)
        for k, v in g.items():
            grads[f"layer{n}.{layer.kind}.{k}"] = v
    return {name: grads[name] for name, _ in model.named_parameters()}


def network_forward(model: NetworkModel, enc: EncodedSentence):
    """Scores (T, |G|) for one sentence plus a cache for :func:`network_backward`."""
    scores, cache = forward_batch(model, InputBatch([enc]))
    cache.single = True
    return scores[:, 0, :], cache


def network_backward(model: NetworkModel, cache: ForwardCache, dscores: np.ndarray) -> dict:
    """Parameter gradients of ``sum(dscores * scores)``, keyed by parameter name."""
    dscores = np.asarray(dscores, dtype=DTYPE)
    if cache.single:
        dscores = dscores[:, None, :]
    return backward_batch(model, cache, dscores)
