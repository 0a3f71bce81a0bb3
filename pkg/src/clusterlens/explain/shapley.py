"""Exact Shapley values by coalition enumeration (small inputs only)."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import factorial
from typing import Optional

import numpy as np

MAX_ENUM_FEATURES = 12


@dataclass
class Attribution:
    sample_id: str
    class_index: int
    values: np.ndarray
    base_value: float


def shapley_from_value_function(v, p: int) -> tuple:
    """Shapley values of the set function ``v`` (called with a frozenset) over ``p`` players.

    Returns ``(phi, v(empty set))``.
    """
    if p > MAX_ENUM_FEATURES:
        raise ValueError(f"exact enumeration is limited to {MAX_ENUM_FEATURES} features, got {p}")
    cache = {}

    def val(S):
        if S not in cache:
            cache[S] = float(v(S))
        return cache[S]

    weights = [factorial(s) * factorial(p - s - 1) / factorial(p) for s in range(p)]
    phi = np.zeros(p)
    players = range(p)
    for i in players:
        rest = [j for j in players if j != i]
        for size in range(p):
            for S in combinations(rest, size):
                S = frozenset(S)
                phi[i] += weights[size] * (val(S | {i}) - val(S))
    return phi, val(frozenset())


def brute_force_shapley(f, x, background, class_index: Optional[int] = None,
                        sample_id: str = "") -> Attribution:
    """Exact Shapley values of ``f`` at ``x`` with a background-averaged value function.

    A coalition ``S`` is worth the mean of ``f`` over background rows ``b``
    with ``b[S]`` replaced by ``x[S]``.  ``f`` maps an (m, p) array to (m,)
    outputs, or to (m, K) when ``class_index`` selects a column.
    """
    x = np.asarray(x, dtype=float)
    background = np.atleast_2d(np.asarray(background, dtype=float))
    if background.shape[0] == 0:
        raise ValueError("background must contain at least one row")
    p = x.size
    if p > MAX_ENUM_FEATURES:
        raise ValueError(f"exact enumeration is limited to {MAX_ENUM_FEATURES} features, got {p}")

    def evaluate(Z):
        out = np.asarray(f(Z), dtype=float)
        if class_index is not None:
            out = out[:, class_index]
        return out

    def v(S):
        Z = background.copy()
        idx = list(S)
        Z[:, idx] = x[idx]
        return evaluate(Z).mean()

    phi, base = shapley_from_value_function(v, p)
    return Attribution(sample_id=sample_id, class_index=-1 if class_index is None else class_index,
                       values=phi, base_value=base)


def tree_conditional_expectation(tree, x, S) -> float:
    """Expected output of ``tree`` given the features in ``S``, other branches weighted by cover."""
    def walk(i):
        if tree.left[i] < 0:
            return tree.value[i]
        f = tree.feature[i]
        l, r = tree.left[i], tree.right[i]
        if f in S:
            return walk(l if x[f] < tree.threshold[i] else r)
        return (tree.cover[l] * walk(l) + tree.cover[r] * walk(r)) / tree.cover[i]
    return float(walk(0))


def ensemble_conditional_shapley(e, x, class_index: int) -> tuple:
    """Enumerated Shapley values of the class margin under cover-weighted conditioning.

    This is the quantity path-dependent TreeSHAP computes in polynomial time.
    """
    x = np.asarray(x, dtype=float)
    trees = e.class_trees(class_index)

    def v(S):
        return e.base_score + e.eta * sum(tree_conditional_expectation(t, x, S) for t in trees)

    return shapley_from_value_function(v, x.size)
