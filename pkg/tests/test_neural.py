import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clusterlens.neural import (FcnArchitecture, FcnModel, _forward, class_input_gradient,
                                fcn_backward, fcn_forward, fit_fcn, init_model,
                                last_conv_gradients, loss)
from clusterlens.synthgen import SyntheticSpec, gen_spikes

H = 1e-4


def rel_err(a, b):
    """Elementwise relative error with a floor on the denominator (tiny entries compare absolutely)."""
    a, b = np.asarray(a), np.asarray(b)
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-3))


def relu_pattern(m, X):
    _, _, cache = _forward(m, np.atleast_2d(X))
    return np.concatenate([(layer["pre"] > 0).ravel() for layer in cache["layers"]])


def numeric_param_grads(m, X, y):
    """Central differences per parameter; NaN where a step flips a ReLU (no derivative there)."""
    out = {}
    for name, p in m.params().items():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + H
            up, pat_up = loss(m, X, y), relu_pattern(m, X)
            p[idx] = old - H
            dn, pat_dn = loss(m, X, y), relu_pattern(m, X)
            p[idx] = old
            g[idx] = (up - dn) / (2 * H) if np.array_equal(pat_up, pat_dn) else np.nan
        out[name] = g
    return out


def numeric_input_grad(f, x, m=None):
    g = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += H
        xm[i] -= H
        kink = m is not None and not np.array_equal(relu_pattern(m, xp), relu_pattern(m, xm))
        g[i] = np.nan if kink else (f(xp) - f(xm)) / (2 * H)
    return g


def check(analytic, numeric):
    """Compare where the difference quotient exists; returns (checked, total) entry counts."""
    ok = ~np.isnan(numeric)
    if ok.any():
        assert rel_err(analytic[ok], numeric[ok]) <= 1e-4
    return int(ok.sum()), ok.size


def check_all(grads, num):
    counts = np.array([check(grads[k], num[k]) for k in num])
    assert counts[:, 0].sum() >= 0.9 * counts[:, 1].sum()


def tiny_model(seed, n_layers=2, filters=3, K=3, L=12, shift=True):
    m = init_model(FcnArchitecture(n_layers, filters, K), L, seed=seed)
    rng = np.random.default_rng(seed + 1000)
    if shift:
        m.input_shift = rng.normal(size=L) * 0.3
        m.input_scale = rng.uniform(0.5, 2.0, size=L)
    return m


# ---- architecture

def test_architecture_filters_double():
    a = FcnArchitecture(4, 16, 3)
    assert a.filters == [16, 32, 64, 128]
    assert a.kernel_sizes == [8, 5, 3, 3]
    assert FcnArchitecture(2, 4, 2).kernel_sizes == [8, 5]


@pytest.mark.parametrize("args", [(0, 4, 2), (5, 4, 2), (1, 0, 2), (1, 4, 1)])
def test_architecture_rejects(args):
    with pytest.raises(ValueError):
        FcnArchitecture(*args)


# ---- forward

def test_zero_weights_uniform():
    m = init_model(FcnArchitecture(2, 4, 5), 16, seed=0)
    for p in m.params().values():
        p[...] = 0.0
    probs, acts = fcn_forward(m, np.random.default_rng(0).normal(size=16))
    np.testing.assert_allclose(probs, np.full(5, 0.2), atol=1e-15)


def test_identity_network_by_hand():
    # one filter with kernel [0,0,0,1,0,0,0,0] is the identity under the 3/4 same-padding split
    m = init_model(FcnArchitecture(1, 1, 2), 8, seed=0)
    m.conv_w[0][...] = 0.0
    m.conv_w[0][0, 0, 3] = 1.0
    m.conv_b[0][...] = 0.0
    m.dense_w[...] = np.array([[1.0], [-1.0]])
    m.dense_b[...] = 0.0
    x = np.ones(8)
    probs, acts = fcn_forward(m, x)
    np.testing.assert_allclose(acts[0], x[None, :])
    e = np.exp([1.0, -1.0])
    np.testing.assert_allclose(probs, e / e.sum(), rtol=1e-14)


def test_same_padding_preserves_length():
    m = init_model(FcnArchitecture(4, 2, 3), 11, seed=3)
    _, acts = fcn_forward(m, np.arange(11.0))
    assert [a.shape for a in acts] == [(2, 11), (4, 11), (8, 11), (16, 11)]


def test_too_short_input():
    m = init_model(FcnArchitecture(1, 2, 2), 7, seed=0)
    with pytest.raises(ValueError):
        fcn_forward(m, np.zeros(7))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(0.01, 100.0))
def test_softmax_rows_sum_to_one(seed, scale):
    rng = np.random.default_rng(seed)
    m = init_model(FcnArchitecture(int(rng.integers(1, 4)), 3, 4), 10, seed=seed)
    P = m.predict_proba(rng.normal(size=(6, 10)) * scale)
    assert np.all(np.abs(P.sum(axis=1) - 1.0) <= 1e-9)
    assert np.all(P >= 0)


# ---- backward

def test_gradients_tiny_net():
    m = tiny_model(7)
    rng = np.random.default_rng(7)
    X = rng.normal(size=(3, 12))
    y = np.array([0, 2, 1])
    grads, dx = fcn_backward(m, X, y)
    num = numeric_param_grads(m, X, y)
    check_all(grads, num)
    for r in range(3):
        check(dx[r], numeric_input_grad(lambda z: loss(m, z, y[r:r + 1]), X[r], m))


@pytest.mark.parametrize("seed", range(20))
def test_gradient_check_random_models(seed):
    rng = np.random.default_rng(seed)
    m = tiny_model(seed, n_layers=int(rng.integers(1, 4)), filters=int(rng.integers(1, 4)),
                   K=int(rng.integers(2, 5)), L=int(rng.integers(8, 14)))
    L = m.input_shift.size
    X = rng.normal(size=(2, L))
    y = rng.integers(m.arch.n_classes, size=2)
    grads, dx = fcn_backward(m, X, y)
    num = numeric_param_grads(m, X, y)
    check_all(grads, num)
    check(dx[0], numeric_input_grad(lambda z: loss(m, z, y[:1]), X[0], m))


def test_duplicate_sample_doubles_gradient():
    m = tiny_model(2)
    x = np.random.default_rng(2).normal(size=12)
    g1, d1 = fcn_backward(m, x[None], [1])
    g2, d2 = fcn_backward(m, np.stack([x, x]), [1, 1])
    for k in g1:
        np.testing.assert_allclose(g2[k], 2 * g1[k], rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(d2.sum(axis=0), 2 * d1[0], rtol=1e-12)


def test_zero_input_zero_bias_gradient():
    m = tiny_model(4, shift=False)
    for b in m.conv_b:
        b[...] = 0.0
    x = np.zeros(12)
    _, dx = fcn_backward(m, x, 0)
    # every pre-activation sits on the ReLU kink, where the derivative is taken as 0
    np.testing.assert_array_equal(dx, 0.0)
    # the difference quotient does not exist there; the oracle flags every position
    assert np.isnan(numeric_input_grad(lambda z: loss(m, z, [0]), x, m)).all()


def test_class_input_gradient_matches_logit_differences():
    m = tiny_model(11)
    x = np.random.default_rng(11).normal(size=12)
    for c in range(3):
        g = class_input_gradient(m, x, c)
        check(g, numeric_input_grad(lambda z: m.logits(z)[0, c], x, m))


def test_class_input_gradient_zero_model():
    m = tiny_model(1)
    for p in m.params().values():
        p[...] = 0.0
    np.testing.assert_array_equal(class_input_gradient(m, np.ones(12), 1), 0.0)


def test_class_input_gradient_bad_class():
    m = tiny_model(1)
    with pytest.raises(ValueError):
        class_input_gradient(m, np.ones(12), 3)


def test_summed_logits_constant_rows():
    # when dense rows sum to zero, the summed logit is constant and its gradient vanishes
    m = tiny_model(5, shift=False)
    m.dense_w -= m.dense_w.mean(axis=0, keepdims=True)
    x = np.random.default_rng(5).normal(size=12)
    total = sum(class_input_gradient(m, x, c) for c in range(3))
    np.testing.assert_allclose(total, 0.0, atol=1e-12)


def test_last_conv_gradients_shapes():
    m = tiny_model(3)
    A, dA = last_conv_gradients(m, np.ones(12), 0)
    assert A.shape == dA.shape == (6, 12)


# ---- training

def spikes(seed=0):
    ds = gen_spikes(SyntheticSpec(kind="spikes", n_per_class=30, T=32, noise_sigma=0.1,
                                  spike_positions=(8, 24), seed=seed))
    return ds.values, ds.labels


def test_spike_training_accuracy():
    X, y = spikes()
    m = fit_fcn(X, y, FcnArchitecture(1, 4, 2), optimizer="adam", lr=0.01, epochs=200, seed=0)
    assert np.mean(m.predict(X) == y) >= 0.95
    assert m.training_log[-1] < m.training_log[0]


def test_lr_zero_leaves_weights():
    X, y = spikes()
    ref = fit_fcn(X, y, FcnArchitecture(1, 4, 2), optimizer="sgd", lr=0.0, epochs=0, seed=3)
    m = fit_fcn(X, y, FcnArchitecture(1, 4, 2), optimizer="sgd", lr=0.0, epochs=5, seed=3)
    for k, v in ref.params().items():
        np.testing.assert_array_equal(m.params()[k], v)
    np.testing.assert_allclose(m.training_log, m.training_log[0], rtol=1e-14)


def test_training_deterministic():
    X, y = spikes()
    a = fit_fcn(X, y, FcnArchitecture(2, 4, 2), lr=0.01, epochs=10, seed=5)
    b = fit_fcn(X, y, FcnArchitecture(2, 4, 2), lr=0.01, epochs=10, seed=5)
    assert a.training_log == b.training_log
    c = fit_fcn(X, y, FcnArchitecture(2, 4, 2), lr=0.01, epochs=10, seed=6)
    assert a.training_log != c.training_log


def test_fit_errors():
    X, y = spikes()
    with pytest.raises(ValueError):
        fit_fcn(X, np.zeros_like(y), FcnArchitecture(1, 4, 2), epochs=1)
    with pytest.raises(ValueError):
        fit_fcn(X, y, FcnArchitecture(1, 4, 2), optimizer="rmsprop", epochs=1)


def test_pooled_standardization():
    X, y = spikes()
    X = X * 3 + 2
    m = fit_fcn(X, y, FcnArchitecture(1, 4, 2), epochs=0, n_time=30)
    np.testing.assert_allclose(m.input_shift[:30], X[:, :30].mean())
    np.testing.assert_allclose(m.input_scale[:30], X[:, :30].std())
    np.testing.assert_allclose(m.input_shift[30:], X[:, 30:].mean(axis=0))
    np.testing.assert_allclose(m.input_scale[30:], X[:, 30:].std(axis=0))


def test_json_round_trip(tmp_path):
    X, y = spikes()
    m = fit_fcn(X, y, FcnArchitecture(2, 4, 2), lr=0.01, epochs=3, seed=1)
    m.to_json(tmp_path / "m.json")
    back = FcnModel.from_json(tmp_path / "m.json")
    np.testing.assert_array_equal(back.logits(X), m.logits(X))
    assert back.training_log == m.training_log
