import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clusterlens.trees import (Tree, TreeEnsemble, cross_entropy, fit_gbt, gain_importance,
                               predict_proba, softmax, softmax_grad_hess, split_gain)


def walk(tree, x):
    """Independent recursive router, returns the leaf value."""
    def go(i):
        if tree.left[i] < 0:
            return tree.value[i]
        return go(tree.left[i] if x[tree.feature[i]] < tree.threshold[i] else tree.right[i])
    return go(0)


def stump(feature, threshold, lv, rv, gain=0.0):
    return Tree(feature=np.array([feature, -1, -1]), threshold=np.array([threshold, 0.0, 0.0]),
                left=np.array([1, -1, -1]), right=np.array([2, -1, -1]),
                value=np.array([0.0, lv, rv]), cover=np.array([2.0, 1.0, 1.0]),
                gain=np.array([gain, 0.0, 0.0]))


# ---- objective

def test_grad_hess_uniform():
    g, h = softmax_grad_hess(np.array([0.0, 0.0]), 0)
    np.testing.assert_allclose(g, [-0.5, 0.5])
    np.testing.assert_allclose(h, [0.25, 0.25])


def test_grad_hess_saturated():
    g, h = softmax_grad_hess(np.array([50.0, 0.0]), 0)
    np.testing.assert_allclose(g, [0, 0], atol=1e-20)
    np.testing.assert_allclose(h, [0, 0], atol=1e-20)


def test_grad_hess_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(200):
        K = int(rng.integers(2, 6))
        z = rng.normal(scale=2, size=K)
        y = int(rng.integers(K))
        g, h = softmax_grad_hess(z, y)
        f = lambda v: cross_entropy(v, [y])
        for k in range(K):
            e = np.eye(K)[k]
            fd_g = (f(z + 1e-6 * e) - f(z - 1e-6 * e)) / 2e-6
            # a wider step for the second difference keeps cancellation error small
            fd_h = (f(z + 1e-3 * e) - 2 * f(z) + f(z - 1e-3 * e)) / 1e-6
            assert abs(g[k] - fd_g) <= 1e-4 * max(abs(fd_g), 1e-3)
            assert abs(h[k] - fd_h) <= 1e-4 * max(abs(fd_h), 1e-2)


# ---- split gain

def test_split_gain_examples():
    assert split_gain(-0.5, 0.25, 0.5, 0.25, 1.0, 0.0) == pytest.approx(0.2)
    assert split_gain(0.0, 1.0, 0.0, 2.0, 1.0, 1.5) == -1.5
    assert split_gain(-0.5, 0.25, 0.5, 0.25, 1.0, 2.0) == pytest.approx(-1.8)


@given(st.floats(-10, 10), st.floats(0, 10), st.floats(-10, 10), st.floats(0, 10),
       st.floats(0.01, 5), st.floats(0, 5))
@settings(max_examples=300, deadline=None)
def test_split_gain_symmetric_and_lambda_monotone(gl, hl, gr, hr, lam, extra):
    a = split_gain(gl, hl, gr, hr, lam)
    assert a == pytest.approx(split_gain(gr, hr, gl, hl, lam), rel=1e-12, abs=1e-12)
    # only for improving splits: with G_L = G_R = 1, H = 0 the (negative) gain
    # rises from -1 at lambda=1 to -0.5 at lambda=2
    if a > 0:
        assert split_gain(gl, hl, gr, hr, lam + extra) <= a + 1e-12


def test_lambda_can_raise_a_negative_gain():
    assert split_gain(1.0, 0.0, 1.0, 0.0, 2.0) > split_gain(1.0, 0.0, 1.0, 0.0, 1.0)


# ---- fitting

def test_separable_1d():
    X = np.array([[0.0], [1.0], [2.0], [3.0], [10.0], [11.0], [12.0], [13.0]])
    y = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    e = fit_gbt(X, y, rounds=30)
    loss = np.array(e.train_loss)
    assert np.all(np.diff(loss[:11]) < 0)
    assert (e.predict(X) == y).all()


def test_depth_zero_gives_priors():
    X = np.arange(10.0)[:, None]
    y = np.array([0] * 7 + [1] * 3)
    e = fit_gbt(X, y, max_depth=0, rounds=200)
    assert all(t.n_nodes == 1 for rnd in e.trees for t in rnd)
    np.testing.assert_allclose(e.predict_proba(X[:1])[0], [0.7, 0.3], atol=1e-6)
    big_gamma = fit_gbt(X, y, gamma=1e6, rounds=200)
    np.testing.assert_allclose(big_gamma.margins(X), e.margins(X))


def test_fit_errors():
    with pytest.raises(ValueError):
        fit_gbt(np.zeros((4, 2)), [1, 1, 1, 1])
    with pytest.raises(ValueError):
        fit_gbt(np.array([[np.nan], [1.0]]), [0, 1])


def test_loss_non_increasing_on_random_data():
    rng = np.random.default_rng(1)
    for _ in range(20):
        n, p, K = int(rng.integers(10, 60)), int(rng.integers(1, 6)), int(rng.integers(2, 5))
        X = rng.normal(size=(n, p))
        y = rng.integers(K, size=n)
        y[:K] = np.arange(K)
        e = fit_gbt(X, y, rounds=15, max_depth=int(rng.integers(1, 5)),
                    gamma=float(rng.choice([0.0, 1.0])))
        assert np.all(np.diff(e.train_loss) <= 1e-12)


def test_perfect_training_accuracy_when_separable():
    rng = np.random.default_rng(2)
    for _ in range(5):
        X = rng.normal(size=(40, 3))
        y = rng.integers(3, size=40)
        e = fit_gbt(X, y, gamma=0.0, max_depth=None, rounds=200)
        assert (e.predict(X) == y).all()


def test_tree_structure_invariants():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(50, 4))
    y = (X[:, 0] + X[:, 1] > 0).astype(int) + (X[:, 2] > 1)
    e = fit_gbt(X, y, rounds=10, max_depth=4)
    for rnd in e.trees:
        for t in rnd:
            assert t.max_depth() <= 4
            internal = np.flatnonzero(t.left >= 0)
            assert np.all(t.gain[internal] > 0)
            assert np.all(t.cover > 0)
            np.testing.assert_allclose(t.cover[internal],
                                       t.cover[t.left[internal]] + t.cover[t.right[internal]],
                                       rtol=1e-10)


def test_margins_match_independent_walker():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(30, 3))
    y = rng.integers(3, size=30)
    e = fit_gbt(X, y, rounds=8, max_depth=3)
    for x in X[:10]:
        ref = [e.base_score + sum(e.eta * walk(rnd[k], x) for rnd in e.trees) for k in range(3)]
        np.testing.assert_allclose(e.margins(x)[0], ref, rtol=1e-12, atol=1e-12)


# ---- prediction

def test_empty_ensemble_is_uniform():
    e = TreeEnsemble(n_classes=4, n_features=2)
    np.testing.assert_allclose(predict_proba(e, np.zeros(2)), 0.25)


def test_hand_routed_probabilities():
    e = TreeEnsemble(n_classes=2, n_features=2, eta=1.0,
                     trees=[[stump(1, 0.5, 1.0, -1.0), stump(0, 0.0, 0.0, 2.0)]])
    x = np.array([3.0, 0.2])  # class 0 goes left (1.0), class 1 goes right (2.0)
    np.testing.assert_allclose(predict_proba(e, x), softmax(np.array([1.0, 2.0])))
    with pytest.raises(ValueError):
        predict_proba(e, np.zeros(3))


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
@settings(max_examples=50, deadline=None)
def test_probabilities_sum_to_one(x):
    rng = np.random.default_rng(5)
    X = rng.normal(size=(20, 3))
    e = fit_gbt(X, rng.integers(3, size=20), rounds=3)
    assert predict_proba(e, np.array(x)).sum() == pytest.approx(1.0, abs=1e-12)


# ---- importance and serialization

def test_gain_importance_examples():
    e = TreeEnsemble(n_classes=2, n_features=5, trees=[[Tree.leaf(0.0, 1.0)] * 2])
    np.testing.assert_array_equal(gain_importance(e), np.zeros(5))
    e.trees = [[stump(3, 0.0, 1, -1, gain=0.2), Tree.leaf(0.0, 1.0)]]
    np.testing.assert_allclose(gain_importance(e), [0, 0, 0, 0.2, 0])
    e.trees.append([stump(3, 1.0, 1, -1, gain=0.4), Tree.leaf(0.0, 1.0)])
    np.testing.assert_allclose(gain_importance(e), [0, 0, 0, 0.3, 0])


def test_json_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    X = rng.normal(size=(25, 4))
    e = fit_gbt(X, rng.integers(3, size=25), rounds=5)
    e.to_json(tmp_path / "m.json")
    back = TreeEnsemble.from_json(tmp_path / "m.json")
    np.testing.assert_array_equal(back.margins(X), e.margins(X))
    assert back.to_json() == e.to_json()
