import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prosodynn.features import build_dictionary, encode_onehot
from prosodynn.layers import (BlstmLayer, FeedForwardLayer, InputBatch, LstmCellParams, NetworkModel, blstm_forward,
                              check_topology, ffnn_forward, forward_batch, lstm_cell_step, network_backward,
                              network_forward)
from prosodynn.numerics import DimensionError
from prosodynn.training import ModelBundle, TrainConfig, extended_precision_copy, random_gradcheck_case
from prosodynn.inference import TransitionMatrix


def sig(z):
    return 1.0 / (1.0 + math.exp(-z))


def scalar_lstm_step(x, h, c, w):
    """One-unit LSTM with peepholes written out in plain floats."""
    i = sig(w["xi"] * x + w["hi"] * h + w["pi"] * c + w["bi"])
    f = sig(w["xf"] * x + w["hf"] * h + w["pf"] * c + w["bf"])
    c_new = f * c + i * math.tanh(w["xc"] * x + w["hc"] * h + w["bc"])
    o = sig(w["xo"] * x + w["ho"] * h + w["po"] * c_new + w["bo"])
    return o * math.tanh(c_new), c_new


def scalar_cell(seed):
    rng = np.random.default_rng(seed)
    w = {k: float(rng.normal()) for k in
         ["xi", "xf", "xc", "xo", "hi", "hf", "hc", "ho", "pi", "pf", "po", "bi", "bf", "bc", "bo"]}
    p = LstmCellParams(1, 1)
    p.W_x[:, 0] = [w["xi"], w["xf"], w["xc"], w["xo"]]
    p.W_h[:, 0] = [w["hi"], w["hf"], w["hc"], w["ho"]]
    p.b[:] = [w["bi"], w["bf"], w["bc"], w["bo"]]
    p.p_i[:], p.p_f[:], p.p_o[:] = w["pi"], w["pf"], w["po"]
    return p, w


def test_topology_validation():
    assert check_topology("") == ""
    assert check_topology("FBB") == "FBB"
    for bad in ["FXB", "fb", "F B"]:
        with pytest.raises(ValueError):
            check_topology(bad)


def test_ffnn_forward_example():
    layer = FeedForwardLayer(2, 2)
    layer.W[...] = np.eye(2)
    out = ffnn_forward(layer, [[0.0, 0.0], [1.0, 0.0]])
    np.testing.assert_allclose(out, [[0.0, 0.0], [math.tanh(1.0), 0.0]], atol=1e-15)
    with pytest.raises(DimensionError):
        ffnn_forward(layer, [[1.0, 2.0, 3.0]])


def test_ffnn_positions_independent():
    layer = FeedForwardLayer(3, 4, np.random.default_rng(0))
    xs = np.random.default_rng(1).normal(size=(5, 3))
    full = ffnn_forward(layer, xs)
    for t in range(5):
        np.testing.assert_array_equal(full[t], ffnn_forward(layer, xs[t:t + 1])[0])


def test_zero_cell_step_is_zero():
    p = LstmCellParams(2, 3)
    h, c = lstm_cell_step(p, np.zeros(2), np.zeros(3), np.zeros(3))
    np.testing.assert_array_equal(h, 0.0)
    np.testing.assert_array_equal(c, 0.0)


def test_cell_step_dimension_error():
    p = LstmCellParams(2, 3)
    with pytest.raises(DimensionError, match="cell expects"):
        lstm_cell_step(p, np.zeros(4), np.zeros(3), np.zeros(3))


@settings(max_examples=30)
@given(st.integers(0, 1000), st.lists(st.floats(-3, 3), min_size=1, max_size=6))
def test_cell_matches_scalar_oracle(seed, xs):
    p, w = scalar_cell(seed)
    h = c = 0.0
    hv, cv = np.zeros(1), np.zeros(1)
    for x in xs:
        h, c = scalar_lstm_step(x, h, c, w)
        hv, cv = lstm_cell_step(p, [x], hv, cv)
        assert hv[0] == pytest.approx(h, abs=1e-13)
        assert cv[0] == pytest.approx(c, abs=1e-13)


def test_saturated_forget_gate_keeps_cell():
    p = LstmCellParams(1, 1)
    p.b_f[:] = 1e3  # forget gate fully open
    p.b_i[:] = -1e3  # input gate closed
    _, c = lstm_cell_step(p, [0.7], [0.0], [0.42])
    assert c[0] == pytest.approx(0.42, abs=1e-12)


def test_blstm_output_layout_and_reversal():
    layer = BlstmLayer(3, 4, np.random.default_rng(2))
    xs = np.random.default_rng(3).normal(size=(6, 3))
    y = blstm_forward(layer, xs)
    assert y.shape == (6, 8)
    # the backward half on reversed input equals a forward scan with swapped cells
    swapped = BlstmLayer(3, 4)
    swapped.forward_cell, swapped.backward_cell = layer.backward_cell, layer.forward_cell
    y_rev = blstm_forward(swapped, xs[::-1])
    np.testing.assert_allclose(y[:, 4:], y_rev[::-1, :4], atol=1e-14)
    np.testing.assert_allclose(y[:, :4], y_rev[::-1, 4:], atol=1e-14)


def test_blstm_empty_sequence():
    with pytest.raises(ValueError):
        blstm_forward(BlstmLayer(2, 2), np.zeros((0, 2)))


def test_blstm_first_forward_output_ignores_later_inputs():
    layer = BlstmLayer(2, 3, np.random.default_rng(4))
    xs = np.random.default_rng(5).normal(size=(4, 2))
    ys = xs.copy()
    ys[2:] += 10.0
    a, b = blstm_forward(layer, xs), blstm_forward(layer, ys)
    np.testing.assert_array_equal(a[:2, :3], b[:2, :3])
    assert not np.allclose(a[:2, 3:], b[:2, 3:])


def test_onehot_sparse_matches_dense_bitwise():
    d = build_dictionary(["天地人山水", "风云"])
    model = NetworkModel("FBB", len(d) + 1, 5, seed=3, cascade=True)
    sents = [encode_onehot(s, d, ["NB", "B", "O", "B"][:len(s)]) for s in ["天地人", "云风山水", "x"]]
    sparse = InputBatch(sents)
    dense = InputBatch(sents)
    T = sparse.shape[0]
    dense.dense = np.stack([np.pad(e.vectors(), ((0, T - len(e)), (0, 0))) for e in sents], axis=1)
    dense.indices = None
    a, _ = forward_batch(model, sparse)
    b, _ = forward_batch(model, dense)
    assert a.tobytes() == b.tobytes()


def test_padding_does_not_change_scores():
    d = build_dictionary(["天地人山水风云日月"])
    model = NetworkModel("FB", len(d), 4, seed=1)
    short, long = encode_onehot("天地", d), encode_onehot("人山水风云", d)
    alone, _ = network_forward(model, short)
    batched, _ = forward_batch(model, InputBatch([short, long]))
    np.testing.assert_allclose(batched[:2, 0], alone, atol=1e-15)
    np.testing.assert_array_equal(batched[2:, 0], 0.0)


def test_network_named_parameters():
    model = NetworkModel("FB", 5, 2, seed=0)
    names = [n for n, _ in model.named_parameters()]
    assert names[:2] == ["layer0.F.W", "layer0.F.b"]
    assert "layer1.B.fwd.W_x" in names and "layer1.B.bwd.p_o" in names
    assert names[-2:] == ["out.W", "out.b"]
    assert model.W_out.shape == (3, 4)


def test_init_range_and_determinism():
    a, b = NetworkModel("FBB", 7, 6, seed=11), NetworkModel("FBB", 7, 6, seed=11)
    for (n, x), (_, y) in zip(a.named_parameters(), b.named_parameters()):
        assert x.tobytes() == y.tobytes()
        assert np.all(np.abs(x) <= 0.1)
        if n.endswith(".b"):
            assert not x.any()


def _scalar_objective(model, enc, dscores):
    f, _ = network_forward(model, enc)
    return np.sum(dscores * f)


@pytest.mark.parametrize("topology", ["F", "B", "FBB"])
def test_network_backward_matches_finite_differences(topology):
    bundle, enc, _ = random_gradcheck_case(topology, hidden=8, input_dim=6, length=5, seed=7)
    dscores = np.random.default_rng(8).normal(size=(5, 3))
    _, cache = network_forward(bundle.network, enc)
    grads = network_backward(bundle.network, cache, dscores)
    ext = extended_precision_copy(bundle).network
    eps = np.longdouble(1e-6)
    rng = np.random.default_rng(9)
    for name, p in ext.named_parameters():
        flat = p.reshape(-1)
        for k in rng.choice(flat.size, size=min(flat.size, 6), replace=False):
            keep = flat[k]
            flat[k] = keep + eps
            up = _scalar_objective(ext, enc, dscores)
            flat[k] = keep - eps
            down = _scalar_objective(ext, enc, dscores)
            flat[k] = keep
            num = float((up - down) / (2 * eps))
            ana = grads[name].reshape(-1)[k]
            assert abs(ana - num) <= 1e-6 * max(abs(ana), abs(num), 1e-3), (name, k, ana, num)


def test_backward_is_linear_in_dscores():
    bundle, enc, _ = random_gradcheck_case("FB", hidden=4, input_dim=5, length=4, seed=2)
    rng = np.random.default_rng(0)
    d1, d2 = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    _, cache = network_forward(bundle.network, enc)
    g1 = network_backward(bundle.network, cache, d1)
    g2 = network_backward(bundle.network, cache, d2)
    g12 = network_backward(bundle.network, cache, d1 + d2)
    g0 = network_backward(bundle.network, cache, np.zeros((4, 3)))
    for n in g1:
        np.testing.assert_allclose(g12[n], g1[n] + g2[n], atol=1e-12)
        assert not g0[n].any()


def test_backward_rejects_foreign_cache():
    a = NetworkModel("FB", 4, 3, seed=0)
    b = NetworkModel("BB", 4, 3, seed=0)
    enc = random_gradcheck_case("F", hidden=3, input_dim=4, length=3)[1]
    _, cache = network_forward(a, enc)
    with pytest.raises(ValueError):
        network_backward(b, cache, np.zeros((3, 3)))


def test_empty_topology_is_linear_model():
    model = NetworkModel("", 3, 2, seed=0)
    bundle = ModelBundle(model, TransitionMatrix.zeros(), TrainConfig(topology=""))
    enc = random_gradcheck_case("", hidden=2, input_dim=3, length=2)[1]
    f, _ = network_forward(bundle.network, enc)
    np.testing.assert_allclose(f, enc.vectors() @ model.W_out.T + model.b_out, atol=1e-15)
