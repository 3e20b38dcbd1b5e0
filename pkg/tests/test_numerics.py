"""Layer kernels against brute-force oracles and central finite differences."""

from __future__ import annotations

import math

import numpy as np
import pytest

import meshseg.numerics as nm


def fd_grad(f, x, h=1e-5):
    """Central finite differences of scalar f() w.r.t. array x, in place."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2.0 * h)
    return g


def rel_err(a, b):
    denom = max(np.abs(b).max(), 1e-8)
    return np.abs(a - b).max() / denom


RNG = np.random.default_rng(12345)


def test_linear_forward_matches_triple_loop():
    x = RNG.normal(size=(4, 3))
    W = RNG.normal(size=(3, 5))
    b = RNG.normal(size=(1, 5))
    y, _ = nm.linear_forward(x, W, b)
    ref = np.zeros((4, 5))
    for i in range(4):
        for j in range(5):
            acc = b[0, j]
            for k in range(3):
                acc += x[i, k] * W[k, j]
            ref[i, j] = acc
    assert np.allclose(y, ref, atol=1e-12)


def test_linear_forward_validates_shapes():
    x = np.zeros((2, 3))
    W = np.zeros((4, 5))
    with pytest.raises(ValueError):
        nm.linear_forward(x, W, np.zeros((1, 5)))
    with pytest.raises(ValueError):
        nm.linear_forward(np.zeros((2, 4)), W, np.zeros(5))


def test_linear_backward_finite_differences():
    x = RNG.normal(size=(6, 4))
    W = RNG.normal(size=(4, 3))
    b = RNG.normal(size=(1, 3))
    r = RNG.normal(size=(6, 3))

    def loss():
        y, _ = nm.linear_forward(x, W, b)
        return float((y * r).sum())

    y, tr = nm.linear_forward(x, W, b)
    gx, gW, gb = nm.linear_backward(tr, r)
    assert rel_err(gx, fd_grad(loss, x)) < 1e-6
    assert rel_err(gW, fd_grad(loss, W)) < 1e-6
    assert rel_err(gb, fd_grad(loss, b)) < 1e-6


def test_relu_backward_finite_differences():
    x = RNG.normal(size=(5, 7))
    x[np.abs(x) < 0.05] = 0.3  # keep clear of the kink
    r = RNG.normal(size=(5, 7))

    def loss():
        y, _ = nm.relu_forward(x)
        return float((y * r).sum())

    _, tr = nm.relu_forward(x)
    g = nm.relu_backward(tr, r)
    assert rel_err(g, fd_grad(loss, x)) < 1e-6


def test_tanh_backward_finite_differences():
    x = RNG.normal(size=(5, 7))
    r = RNG.normal(size=(5, 7))

    def loss():
        y, _ = nm.tanh_forward(x)
        return float((y * r).sum())

    _, tr = nm.tanh_forward(x)
    g = nm.tanh_backward(tr, r)
    assert rel_err(g, fd_grad(loss, x)) < 1e-6


def test_layer_norm_forward_rows_standardized():
    x = RNG.normal(size=(4, 33)) * 3.0 + 1.5
    gain = np.ones((1, 33))
    offset = np.zeros((1, 33))
    y, _ = nm.layer_norm_forward(x, gain, offset)
    assert np.abs(y.mean(axis=1)).max() < 1e-12
    assert np.abs(y.std(axis=1) - 1.0).max() < 1e-4  # eps shifts variance slightly


def test_layer_norm_backward_finite_differences():
    x = RNG.normal(size=(4, 9))
    gain = RNG.normal(size=(1, 9)) + 1.0
    offset = RNG.normal(size=(1, 9))
    r = RNG.normal(size=(4, 9))

    def loss():
        y, _ = nm.layer_norm_forward(x, gain, offset)
        return float((y * r).sum())

    _, tr = nm.layer_norm_forward(x, gain, offset)
    gx, gg, go = nm.layer_norm_backward(tr, r)
    assert rel_err(gx, fd_grad(loss, x)) < 1e-6
    assert rel_err(gg, fd_grad(loss, gain)) < 1e-6
    assert rel_err(go, fd_grad(loss, offset)) < 1e-6


def test_softmax_rows_matches_brute_force():
    x = RNG.normal(size=(5, 6)) * 4.0
    y = nm.softmax_rows(x)
    for i in range(5):
        es = [math.exp(v) for v in x[i]]
        s = sum(es)
        for j in range(6):
            assert abs(y[i, j] - es[j] / s) < 1e-12
    assert np.allclose(y.sum(axis=1), 1.0, atol=1e-12)


def test_softmax_rows_backward_finite_differences():
    x = RNG.normal(size=(4, 5))
    r = RNG.normal(size=(4, 5))

    def loss():
        return float((nm.softmax_rows(x) * r).sum())

    y = nm.softmax_rows(x)
    g = nm.softmax_rows_backward(y, r)
    assert rel_err(g, fd_grad(loss, x)) < 1e-6


def test_attention_forward_matches_brute_force():
    Q = RNG.normal(size=(5, 4))
    K = RNG.normal(size=(3, 4))
    V = RNG.normal(size=(3, 6))
    G, _ = nm.attention_forward(Q, K, V)
    scale = 1.0 / math.sqrt(4.0)
    ref = np.zeros((5, 6))
    for i in range(5):
        scores = [scale * sum(Q[i, t] * K[j, t] for t in range(4)) for j in range(3)]
        mx = max(scores)
        es = [math.exp(s - mx) for s in scores]
        z = sum(es)
        for c in range(6):
            ref[i, c] = sum(es[j] / z * V[j, c] for j in range(3))
    assert np.abs(G - ref).max() < 1e-12


def test_attention_rejects_empty_keys():
    with pytest.raises(ValueError):
        nm.attention_forward(np.zeros((2, 4)), np.zeros((0, 4)), np.zeros((0, 4)))


def test_attention_backward_finite_differences():
    Q = RNG.normal(size=(4, 3))
    K = RNG.normal(size=(2, 3))
    V = RNG.normal(size=(2, 5))
    r = RNG.normal(size=(4, 5))

    def loss():
        G, _ = nm.attention_forward(Q, K, V)
        return float((G * r).sum())

    _, tr = nm.attention_forward(Q, K, V)
    gQ, gK, gV = nm.attention_backward(tr, r)
    assert rel_err(gQ, fd_grad(loss, Q)) < 1e-6
    assert rel_err(gK, fd_grad(loss, K)) < 1e-6
    assert rel_err(gV, fd_grad(loss, V)) < 1e-6


def test_squared_error_constant_offset_closed_form():
    # Shifting every channel by delta adds channels * delta^2 to the loss.
    pred = RNG.normal(size=(7, 5))
    delta = 0.37
    loss, _ = nm.squared_error_loss(pred + delta, pred)
    assert abs(loss - 5 * delta * delta) < 1e-12


def test_squared_error_grad_finite_differences():
    pred = RNG.normal(size=(6, 4))
    target = RNG.normal(size=(6, 4))

    def loss():
        return nm.squared_error_loss(pred, target)[0]

    _, g = nm.squared_error_loss(pred, target)
    assert rel_err(g, fd_grad(loss, pred)) < 1e-6


def test_binary_cross_entropy_matches_brute_force():
    prob = RNG.uniform(0.1, 0.9, size=(4, 3))
    target = (RNG.uniform(size=(4, 3)) > 0.5).astype(np.float64)
    loss, _ = nm.binary_cross_entropy(prob, target)
    ref = 0.0
    for i in range(4):
        for j in range(3):
            p, t = prob[i, j], target[i, j]
            ref += -(t * math.log(p) + (1 - t) * math.log(1 - p))
    assert abs(loss - ref / 12.0) < 1e-12


def test_binary_cross_entropy_grad_finite_differences():
    prob = RNG.uniform(0.1, 0.9, size=(5, 4))
    target = RNG.uniform(size=(5, 4))

    def loss():
        return nm.binary_cross_entropy(prob, target)[0]

    _, g = nm.binary_cross_entropy(prob, target)
    assert rel_err(g, fd_grad(loss, prob)) < 1e-6


def test_binary_cross_entropy_clamp_zeroes_gradient():
    prob = np.array([[0.0, 1.0, 0.5]])
    target = np.array([[1.0, 0.0, 1.0]])
    loss, g = nm.binary_cross_entropy(prob, target)
    assert np.isfinite(loss)
    assert g[0, 0] == 0.0 and g[0, 1] == 0.0 and g[0, 2] != 0.0


def test_adam_step_matches_reference_update():
    store = nm.ParamStore()
    w = store.add("w", np.array([[1.0, -2.0]]))
    grads = [np.array([[0.3, -0.1]]), np.array([[-0.2, 0.4]])]
    # Independent reference implementation of bias-corrected Adam.
    m = np.zeros((1, 2))
    v = np.zeros((1, 2))
    ref = np.array([[1.0, -2.0]])
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        ref = ref - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    for t, g in enumerate(grads, start=1):
        store.accumulate("w", g)
        nm.adam_step(store, lr, t=t)
    assert np.abs(store["w"] - ref).max() < 1e-14


def test_adam_step_aborts_on_nonfinite_without_touching_values():
    store = nm.ParamStore()
    store.add("a", np.array([1.0, 2.0]))
    store.add("b", np.array([3.0]))
    store.accumulate("a", np.array([0.1, 0.2]))
    store.accumulate("b", np.array([np.nan]))
    with pytest.raises(nm.NumericError):
        nm.adam_step(store, 0.1, t=1)
    assert np.array_equal(store["a"], [1.0, 2.0])
    assert np.array_equal(store["b"], [3.0])


def test_param_store_contracts():
    store = nm.ParamStore()
    store.add("x", np.ones((2, 2)))
    with pytest.raises(KeyError):
        store.add("x", np.zeros(1))
    with pytest.raises(ValueError):
        store.accumulate("x", np.zeros(3))
    h0 = store.state_hash()
    snap = store.copy_values()
    store["x"][0, 0] = 5.0
    assert store.state_hash() != h0
    store.load_values(snap)
    assert store.state_hash() == h0
    with pytest.raises(KeyError):
        store.load_values({"y": np.zeros(1)})
    f32 = store.astype(np.float32)
    assert f32["x"].dtype == np.float32
    assert store["x"].dtype == np.float64  # astype copies, never mutates


def test_kaiming_uniform_bound_and_determinism():
    a = nm.kaiming_uniform(np.random.default_rng(7), 64, 32)
    b = nm.kaiming_uniform(np.random.default_rng(7), 64, 32)
    assert np.array_equal(a, b)
    bound = np.sqrt(6.0 / 64)
    assert np.abs(a).max() <= bound
    assert a.shape == (64, 32)
