"""Path-dependent TreeSHAP for the boosted ensembles in :mod:`clusterlens.trees`.

The recursion tracks, along the root-to-leaf path, the fraction of cover that
flows each way when a feature is absent (``zero``) and whether ``x`` follows
the branch when it is present (``one``); leaf values are spread over the path
features with the Shapley weights of the tracked subset sizes.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .shapley import Attribution


@njit(cache=True)
def _extend(feat, zero, one, pw, base, depth, z, o, f):
    feat[base + depth] = f
    zero[base + depth] = z
    one[base + depth] = o
    pw[base + depth] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        pw[base + i + 1] += o * pw[base + i] * (i + 1) / (depth + 1)
        pw[base + i] = z * pw[base + i] * (depth - i) / (depth + 1)


@njit(cache=True)
def _unwind(feat, zero, one, pw, base, depth, idx):
    o = one[base + idx]
    z = zero[base + idx]
    nxt = pw[base + depth]
    for i in range(depth - 1, -1, -1):
        if o != 0.0:
            tmp = pw[base + i]
            pw[base + i] = nxt * (depth + 1) / ((i + 1) * o)
            nxt = tmp - pw[base + i] * z * (depth - i) / (depth + 1)
        else:
            pw[base + i] = pw[base + i] * (depth + 1) / (z * (depth - i))
    for i in range(idx, depth):
        feat[base + i] = feat[base + i + 1]
        zero[base + i] = zero[base + i + 1]
        one[base + i] = one[base + i + 1]


@njit(cache=True)
def _unwound_sum(zero, one, pw, base, depth, idx):
    o = one[base + idx]
    z = zero[base + idx]
    nxt = pw[base + depth]
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if o != 0.0:
            tmp = nxt * (depth + 1) / ((i + 1) * o)
            total += tmp
            nxt = pw[base + i] - tmp * z * (depth - i) / (depth + 1)
        else:
            total += pw[base + i] / (z * (depth - i) / (depth + 1))
    return total


@njit(cache=True)
def _recurse(node, depth, base, x, phi, t_feat, t_thr, t_left, t_right, t_value, t_cover,
             feat, zero, one, pw, pz, po, pf, scale):
    # copy the parent's path into this level's segment of the workspace
    nbase = base + depth
    if depth > 0:
        for i in range(depth):
            feat[nbase + i] = feat[base + i]
            zero[nbase + i] = zero[base + i]
            one[nbase + i] = one[base + i]
            pw[nbase + i] = pw[base + i]
    else:
        nbase = base
    _extend(feat, zero, one, pw, nbase, depth, pz, po, pf)

    if t_left[node] < 0:
        for i in range(1, depth + 1):
            w = _unwound_sum(zero, one, pw, nbase, depth, i)
            phi[feat[nbase + i]] += w * (one[nbase + i] - zero[nbase + i]) * t_value[node] * scale
        return

    f = t_feat[node]
    if x[f] < t_thr[node]:
        hot, cold = t_left[node], t_right[node]
    else:
        hot, cold = t_right[node], t_left[node]
    hz = t_cover[hot] / t_cover[node]
    cz = t_cover[cold] / t_cover[node]
    iz = 1.0
    io = 1.0
    k = 0
    while k <= depth:
        if feat[nbase + k] == f:
            break
        k += 1
    if k != depth + 1:
        iz = zero[nbase + k]
        io = one[nbase + k]
        _unwind(feat, zero, one, pw, nbase, depth, k)
        depth -= 1
    _recurse(hot, depth + 1, nbase, x, phi, t_feat, t_thr, t_left, t_right, t_value, t_cover,
             feat, zero, one, pw, hz * iz, io, f, scale)
    _recurse(cold, depth + 1, nbase, x, phi, t_feat, t_thr, t_left, t_right, t_value, t_cover,
             feat, zero, one, pw, cz * iz, 0.0, f, scale)


def expected_value(tree) -> float:
    """Cover-weighted mean leaf value."""
    leaves = tree.left < 0
    return float((tree.value[leaves] * tree.cover[leaves]).sum() / tree.cover[0])


def tree_shap_values(tree, x, scale: float = 1.0) -> np.ndarray:
    """SHAP values of one tree's output at ``x``, multiplied by ``scale``."""
    if tree.cover is None or np.any(~np.isfinite(tree.cover)) or np.any(tree.cover <= 0):
        raise ValueError("TreeSHAP needs positive node covers on every node")
    x = np.asarray(x, dtype=float)
    phi = np.zeros(x.size)
    if tree.left[0] < 0:
        return phi
    d = tree.max_depth() + 2
    size = d * (d + 1) // 2 + d
    feat = np.full(size, -1, dtype=np.int64)
    zero = np.zeros(size)
    one = np.zeros(size)
    pw = np.zeros(size)
    _recurse(0, 0, 0, x, phi, tree.feature.astype(np.int64), tree.threshold.astype(float),
             tree.left.astype(np.int64), tree.right.astype(np.int64), tree.value.astype(float),
             tree.cover.astype(float), feat, zero, one, pw, 1.0, 1.0, -1, float(scale))
    return phi


def treeshap(e, x, class_index: int, sample_id: str = "") -> Attribution:
    """Path-dependent SHAP values of the pre-softmax margin of ``class_index``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != e.n_features:
        raise ValueError(f"expected an input of length {e.n_features}")
    if not 0 <= class_index < e.n_classes:
        raise ValueError(f"class index {class_index} outside [0, {e.n_classes})")
    phi = np.zeros(x.size)
    base = e.base_score
    for tree in e.class_trees(class_index):
        if tree.cover is None or np.any(tree.cover <= 0):
            raise ValueError("TreeSHAP needs positive node covers on every node")
        phi += tree_shap_values(tree, x, e.eta)
        base += e.eta * expected_value(tree)
    return Attribution(sample_id=sample_id, class_index=class_index, values=phi, base_value=base)
