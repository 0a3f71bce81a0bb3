"""Multiclass gradient-boosted regression trees.

Newton boosting on the softmax cross-entropy: each round computes per-class
gradients and hessians, grows one regression tree per class with exact
greedy split search, and adds ``eta`` times the tree output to the class
margin.  Trees keep the hessian cover of every node, which path-dependent
TreeSHAP needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

HESS_FLOOR = 1e-16


@dataclass
class Tree:
    """Flat array layout; ``left[i] == -1`` marks a leaf.

    Samples with ``x[feature] < threshold`` go left.  ``value`` holds the leaf
    weight at leaves and the would-be weight at internal nodes.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def is_leaf(self, i: int) -> bool:
        return self.left[i] < 0

    def max_depth(self) -> int:
        def depth(i):
            if self.left[i] < 0:
                return 0
            return 1 + max(depth(self.left[i]), depth(self.right[i]))
        return depth(0)

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        X = np.atleast_2d(X)
        node = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        active = self.left[node] >= 0
        while active.any():
            r = rows[active]
            nd = node[active]
            go_left = X[r, self.feature[nd]] < self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.left[node] >= 0
        return node

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in
                ("feature", "threshold", "left", "right", "value", "cover", "gain")}

    @classmethod
    def from_dict(cls, d) -> "Tree":
        ints = ("feature", "left", "right")
        return cls(**{k: np.asarray(v, dtype=int if k in ints else float) for k, v in d.items()})

    @classmethod
    def leaf(cls, value: float, cover: float) -> "Tree":
        return cls(feature=np.array([-1]), threshold=np.array([0.0]), left=np.array([-1]),
                   right=np.array([-1]), value=np.array([value]), cover=np.array([cover]),
                   gain=np.array([0.0]))


@dataclass
class TreeEnsemble:
    n_classes: int
    n_features: int
    trees: list = field(default_factory=list)  # trees[round][class]
    base_score: float = 0.0
    eta: float = 0.3
    lam: float = 1.0
    gamma: float = 0.0
    max_depth: Optional[int] = 6
    train_loss: list = field(default_factory=list)

    @property
    def rounds(self) -> int:
        return len(self.trees)

    def class_trees(self, k: int):
        return [rnd[k] for rnd in self.trees]

    def margins(self, X) -> np.ndarray:
        X = _check_X(X, self.n_features)
        out = np.full((X.shape[0], self.n_classes), self.base_score)
        for rnd in self.trees:
            for k, tree in enumerate(rnd):
                out[:, k] += self.eta * tree.predict(X)
        return out

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.margins(X))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.margins(X), axis=1)

    def to_json(self, path=None) -> str:
        payload = {
            "n_classes": self.n_classes, "n_features": self.n_features,
            "base_score": self.base_score, "eta": self.eta, "lambda": self.lam,
            "gamma": self.gamma, "max_depth": self.max_depth,
            "train_loss": list(self.train_loss),
            "trees": [[t.to_dict() for t in rnd] for rnd in self.trees],
        }
        text = json.dumps(payload)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, text_or_path) -> "TreeEnsemble":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            text = Path(text_or_path).read_text()
        d = json.loads(text)
        return cls(
            n_classes=d["n_classes"], n_features=d["n_features"], base_score=d["base_score"],
            eta=d["eta"], lam=d["lambda"], gamma=d["gamma"], max_depth=d["max_depth"],
            train_loss=d.get("train_loss", []),
            trees=[[Tree.from_dict(t) for t in rnd] for rnd in d["trees"]],
        )


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(margins, y) -> float:
    """Mean negative log-likelihood of labels ``y`` under softmax(margins)."""
    margins = np.atleast_2d(np.asarray(margins, dtype=float))
    y = np.atleast_1d(y)
    m = margins.max(axis=1, keepdims=True)
    lse = (m + np.log(np.exp(margins - m).sum(axis=1, keepdims=True)))[:, 0]
    return float(np.mean(lse - margins[np.arange(len(y)), y]))


def softmax_grad_hess(margins, y: int):
    """First and diagonal second derivatives of the cross-entropy in the margins."""
    p = softmax(margins)
    g = p.copy()
    g[..., y] -= 1.0
    return g, p * (1.0 - p)


def split_gain(G_L, H_L, G_R, H_R, lam=1.0, gamma=0.0) -> float:
    return 0.5 * (G_L ** 2 / (H_L + lam) + G_R ** 2 / (H_R + lam)
                  - (G_L + G_R) ** 2 / (H_L + H_R + lam)) - gamma


def _check_X(X, p=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if p is not None and X.shape[1] != p:
        raise ValueError(f"expected {p} input columns, got {X.shape[1]}")
    return X


class _TreeBuilder:
    def __init__(self, X, order, lam, gamma, max_depth):
        self.X = X
        self.order = order  # (p, n) row indices sorted by each feature
        self.lam = lam
        self.gamma = gamma
        self.max_depth = max_depth
        self.nodes = []

    def build(self, g, h):
        self.g, self.h = g, h
        self.nodes = []
        self._grow(np.ones(self.X.shape[0], dtype=bool), 0)
        cols = list(zip(*self.nodes))
        return Tree(
            feature=np.array(cols[0], dtype=int), threshold=np.array(cols[1], dtype=float),
            left=np.array(cols[2], dtype=int), right=np.array(cols[3], dtype=int),
            value=np.array(cols[4], dtype=float), cover=np.array(cols[5], dtype=float),
            gain=np.array(cols[6], dtype=float),
        )

    def _best_split(self, in_node, m):
        p = self.order.shape[0]
        sel = in_node[self.order]
        idx = self.order[sel].reshape(p, m)
        xs = self.X[idx, np.arange(p)[:, None]]
        gs = np.cumsum(self.g[idx], axis=1)
        hs = np.cumsum(self.h[idx], axis=1)
        G, H = gs[0, -1], hs[0, -1]
        GL, HL = gs[:, :-1], hs[:, :-1]
        gain = split_gain(GL, HL, G - GL, H - HL, self.lam, self.gamma)
        gain = np.where(xs[:, 1:] > xs[:, :-1], gain, -np.inf)
        flat = int(np.argmax(gain))  # feature-major: lowest feature, then lowest threshold
        f, pos = divmod(flat, m - 1)
        best = gain[f, pos]
        if not best > 0:
            return None
        a, b = xs[f, pos], xs[f, pos + 1]
        thr = 0.5 * (a + b)
        if not a < thr <= b:
            thr = b
        return f, thr, float(best)

    def _grow(self, in_node, depth):
        i = len(self.nodes)
        G = float(self.g[in_node].sum())
        H = float(self.h[in_node].sum())
        weight = -G / (H + self.lam)
        self.nodes.append([-1, 0.0, -1, -1, weight, H, 0.0])
        m = int(in_node.sum())
        if m < 2 or (self.max_depth is not None and depth >= self.max_depth):
            return i
        split = self._best_split(in_node, m)
        if split is None:
            return i
        f, thr, gain = split
        go_left = self.X[:, f] < thr
        left = self._grow(in_node & go_left, depth + 1)
        right = self._grow(in_node & ~go_left, depth + 1)
        self.nodes[i][:4] = [f, thr, left, right]
        self.nodes[i][6] = gain
        return i


def fit_gbt(X, y, eta: float = 0.3, rounds: int = 100, lam: float = 1.0, gamma: float = 0.0,
            max_depth: Optional[int] = 6, seed: int = 0, n_classes: Optional[int] = None
            ) -> TreeEnsemble:
    """Fit a boosted tree ensemble to integer labels ``y``.

    Training is deterministic; ``seed`` is kept for interface symmetry with the
    other model families (no row or column subsampling happens).
    """
    X = _check_X(X)
    y = np.asarray(y, dtype=int)
    if X.shape[0] != y.size:
        raise ValueError("X and y have different numbers of rows")
    if X.shape[1] < 1:
        raise ValueError("need at least one input column")
    if not np.all(np.isfinite(X)):
        raise ValueError("inputs contain NaN or infinite values")
    if np.unique(y).size < 2:
        raise ValueError("boosting needs at least two classes in y")
    K = int(n_classes if n_classes is not None else y.max() + 1)
    if y.min() < 0 or y.max() >= K:
        raise ValueError("labels must lie in [0, n_classes)")

    n, p = X.shape
    order = np.argsort(X, axis=0, kind="stable").T.copy()
    builder = _TreeBuilder(X, order, lam, gamma, max_depth)
    ens = TreeEnsemble(n_classes=K, n_features=p, base_score=0.0, eta=eta, lam=lam,
                       gamma=gamma, max_depth=max_depth)
    margins = np.zeros((n, K))
    onehot = np.eye(K)[y]
    ens.train_loss.append(cross_entropy(margins, y))
    for _ in range(rounds):
        prob = softmax(margins)
        g = prob - onehot
        h = np.maximum(prob * (1.0 - prob), HESS_FLOOR)
        rnd = [builder.build(g[:, k], h[:, k]) for k in range(K)]
        for k, tree in enumerate(rnd):
            margins[:, k] += eta * tree.predict(X)
        ens.trees.append(rnd)
        ens.train_loss.append(cross_entropy(margins, y))
    return ens


def predict_proba(e: TreeEnsemble, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != e.n_features:
        raise ValueError(f"expected an input of length {e.n_features}")
    return e.predict_proba(x[None, :])[0]


def gain_importance(e: TreeEnsemble) -> np.ndarray:
    """Mean split gain per feature over every split node in the ensemble."""
    total = np.zeros(e.n_features)
    count = np.zeros(e.n_features)
    for rnd in e.trees:
        for t in rnd:
            internal = t.left >= 0
            np.add.at(total, t.feature[internal], t.gain[internal])
            np.add.at(count, t.feature[internal], 1)
    return np.divide(total, count, out=np.zeros_like(total), where=count > 0)
