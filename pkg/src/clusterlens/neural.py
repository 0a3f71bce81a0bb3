"""A small fully convolutional network for 1-D inputs, written in numpy.

Architecture: ``n_layers`` same-padded convolutions with ReLU, global average
pooling over time, one dense layer and a softmax.  Kernel sizes follow the
8/5/3/3 pattern; filters double from layer to layer.

There is no batch normalisation.  Instead inputs are z-scored with
training-set statistics stored on the model: the leading ``n_time`` positions
(the raw series) share one mean and standard deviation, so levels and shapes
keep their relative size, and the trailing positions (extracted features, if
any) are scaled column by column.  The affine map is part of the
differentiated function.

Forward and backward passes are explicit so that parameter gradients, input
gradients and last-layer activation gradients are all available to the
explainers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

KERNEL_SIZES = (8, 5, 3, 3)
FIRST_LAYER_FILTERS = (4, 16, 64, 128)


@dataclass(frozen=True)
class FcnArchitecture:
    n_layers: int
    first_filters: int
    n_classes: int

    def __post_init__(self):
        if not 1 <= self.n_layers <= len(KERNEL_SIZES):
            raise ValueError("n_layers must be between 1 and 4")
        if self.first_filters < 1:
            raise ValueError("first_filters must be positive")
        if self.n_classes < 2:
            raise ValueError("need at least two classes")

    @property
    def filters(self) -> list:
        return [self.first_filters * 2 ** i for i in range(self.n_layers)]

    @property
    def kernel_sizes(self) -> list:
        return list(KERNEL_SIZES[: self.n_layers])

    @property
    def min_length(self) -> int:
        return max(self.kernel_sizes)


@dataclass
class FcnModel:
    arch: FcnArchitecture
    conv_w: list
    conv_b: list
    dense_w: np.ndarray
    dense_b: np.ndarray
    input_shift: np.ndarray
    input_scale: np.ndarray
    n_time: int = 0
    training_log: list = field(default_factory=list)

    def params(self) -> dict:
        out = {}
        for i, (w, b) in enumerate(zip(self.conv_w, self.conv_b)):
            out[f"conv{i}_w"] = w
            out[f"conv{i}_b"] = b
        out["dense_w"] = self.dense_w
        out["dense_b"] = self.dense_b
        return out

    def predict_proba(self, X) -> np.ndarray:
        return _forward(self, _batch(X, self))[0]

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.logits(X), axis=1)

    def logits(self, X) -> np.ndarray:
        return _forward(self, _batch(X, self))[1]

    def input_gradient(self, X, class_index: int) -> np.ndarray:
        return class_input_gradient(self, np.atleast_2d(X), class_index)

    def to_json(self, path=None) -> str:
        payload = {
            "arch": {"n_layers": self.arch.n_layers, "first_filters": self.arch.first_filters,
                     "n_classes": self.arch.n_classes,
                     "kernel_sizes": self.arch.kernel_sizes, "filters": self.arch.filters},
            "params": {k: v.tolist() for k, v in self.params().items()},
            "input_shift": np.asarray(self.input_shift).tolist(),
            "input_scale": np.asarray(self.input_scale).tolist(),
            "n_time": self.n_time,
            "training_log": list(self.training_log),
        }
        text = json.dumps(payload)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, text_or_path) -> "FcnModel":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            text = Path(text_or_path).read_text()
        d = json.loads(text)
        a = d["arch"]
        arch = FcnArchitecture(a["n_layers"], a["first_filters"], a["n_classes"])
        p = {k: np.asarray(v, dtype=float) for k, v in d["params"].items()}
        return cls(
            arch=arch,
            conv_w=[p[f"conv{i}_w"] for i in range(arch.n_layers)],
            conv_b=[p[f"conv{i}_b"] for i in range(arch.n_layers)],
            dense_w=p["dense_w"], dense_b=p["dense_b"],
            input_shift=np.asarray(d["input_shift"], dtype=float),
            input_scale=np.asarray(d["input_scale"], dtype=float),
            n_time=d["n_time"],
            training_log=d["training_log"],
        )


def init_model(arch: FcnArchitecture, length: int, seed: int = 0, n_time: int = 0) -> FcnModel:
    """Uniform(-s, s) initialisation with s = sqrt(1 / fan_in)."""
    rng = np.random.default_rng(seed)
    conv_w, conv_b = [], []
    c_in = 1
    for c_out, k in zip(arch.filters, arch.kernel_sizes):
        s = np.sqrt(1.0 / (c_in * k))
        conv_w.append(rng.uniform(-s, s, size=(c_out, c_in, k)))
        conv_b.append(rng.uniform(-s, s, size=c_out))
        c_in = c_out
    s = np.sqrt(1.0 / c_in)
    return FcnModel(
        arch=arch, conv_w=conv_w, conv_b=conv_b,
        dense_w=rng.uniform(-s, s, size=(arch.n_classes, c_in)),
        dense_b=rng.uniform(-s, s, size=arch.n_classes),
        input_shift=np.zeros(length), input_scale=np.ones(length), n_time=n_time,
    )


def _batch(X, m: FcnModel):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] < m.arch.min_length:
        raise ValueError(
            f"input length {X.shape[1]} is shorter than the largest kernel ({m.arch.min_length})")
    return X


def _same_pad(k):
    left = (k - 1) // 2
    return left, k - 1 - left


def _forward(m: FcnModel, X):
    """Batched forward pass; returns (probs, logits, cache)."""
    B, L = X.shape
    cache = {"layers": [], "L": L}
    h = ((X - m.input_shift) / m.input_scale)[:, None, :]
    for w, b in zip(m.conv_w, m.conv_b):
        c_out, c_in, k = w.shape
        pl, pr = _same_pad(k)
        hp = np.pad(h, ((0, 0), (0, 0), (pl, pr)))
        patches = sliding_window_view(hp, k, axis=2)  # (B, c_in, L, k)
        P = patches.transpose(0, 2, 1, 3).reshape(B, L, c_in * k)
        pre = (P @ w.reshape(c_out, -1).T).transpose(0, 2, 1) + b[None, :, None]
        h = np.maximum(pre, 0.0)
        cache["layers"].append({"P": P, "pre": pre, "act": h, "shape": w.shape})
    pooled = h.mean(axis=2)
    logits = pooled @ m.dense_w.T + m.dense_b
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    probs = e / e.sum(axis=1, keepdims=True)
    cache["pooled"] = pooled
    return probs, logits, cache


def _backward(m: FcnModel, cache, dlogits):
    """Backpropagate ``dlogits`` (B, K); returns (param grads, input grads, activation grads)."""
    L = cache["L"]
    grads = {"dense_w": dlogits.T @ cache["pooled"], "dense_b": dlogits.sum(axis=0)}
    dpooled = dlogits @ m.dense_w
    dh = np.repeat(dpooled[:, :, None] / L, L, axis=2)
    act_grads = [None] * len(cache["layers"])
    for i in reversed(range(len(cache["layers"]))):
        layer = cache["layers"][i]
        act_grads[i] = dh
        c_out, c_in, k = layer["shape"]
        dpre = dh * (layer["pre"] > 0)
        grads[f"conv{i}_b"] = dpre.sum(axis=(0, 2))
        dT = dpre.transpose(0, 2, 1)  # (B, L, c_out)
        P = layer["P"]
        grads[f"conv{i}_w"] = (dT.reshape(-1, c_out).T @ P.reshape(-1, c_in * k)).reshape(c_out, c_in, k)
        dP = (dT @ m.conv_w[i].reshape(c_out, -1)).reshape(dT.shape[0], L, c_in, k)
        pl, _ = _same_pad(k)
        dhp = np.zeros((dT.shape[0], c_in, L + k - 1))
        for j in range(k):
            dhp[:, :, j:j + L] += dP[:, :, :, j].transpose(0, 2, 1)
        dh = dhp[:, :, pl:pl + L]
    dx = dh[:, 0, :] / m.input_scale
    return grads, dx, act_grads


def fcn_forward(m: FcnModel, x):
    """Class probabilities of one input plus the post-ReLU map of every conv layer."""
    X = _batch(x, m)
    probs, _, cache = _forward(m, X)
    return probs[0], [layer["act"][0] for layer in cache["layers"]]


def fcn_backward(m: FcnModel, X, y):
    """Gradients of the summed cross-entropy over the rows of ``X``.

    Returns ``(param_grads, input_grad)``; ``input_grad`` has the shape of ``X``.
    """
    single = np.asarray(X).ndim == 1
    Xb = _batch(X, m)
    y = np.atleast_1d(np.asarray(y, dtype=int))
    probs, _, cache = _forward(m, Xb)
    dlogits = probs.copy()
    dlogits[np.arange(len(y)), y] -= 1.0
    grads, dx, _ = _backward(m, cache, dlogits)
    return grads, (dx[0] if single else dx)


def loss(m: FcnModel, X, y) -> float:
    """Summed cross-entropy over the rows of ``X``."""
    Xb = _batch(X, m)
    y = np.atleast_1d(np.asarray(y, dtype=int))
    _, logits, _ = _forward(m, Xb)
    mx = logits.max(axis=1, keepdims=True)
    lse = mx[:, 0] + np.log(np.exp(logits - mx).sum(axis=1))
    return float((lse - logits[np.arange(len(y)), y]).sum())


def _check_class(m, class_index):
    if not 0 <= class_index < m.arch.n_classes:
        raise ValueError(f"class index {class_index} outside [0, {m.arch.n_classes})")


def class_input_gradient(m: FcnModel, X, class_index: int) -> np.ndarray:
    """Gradient of the pre-softmax logit of ``class_index`` with respect to the input."""
    _check_class(m, class_index)
    single = np.asarray(X).ndim == 1
    Xb = _batch(X, m)
    _, _, cache = _forward(m, Xb)
    dlogits = np.zeros((Xb.shape[0], m.arch.n_classes))
    dlogits[:, class_index] = 1.0
    _, dx, _ = _backward(m, cache, dlogits)
    return dx[0] if single else dx


def last_conv_gradients(m: FcnModel, x, class_index: int):
    """Last conv activations (C, L) and the class-logit gradient with respect to them."""
    _check_class(m, class_index)
    Xb = _batch(x, m)
    _, _, cache = _forward(m, Xb)
    dlogits = np.zeros((1, m.arch.n_classes))
    dlogits[0, class_index] = 1.0
    _, _, act_grads = _backward(m, cache, dlogits)
    return cache["layers"][-1]["act"][0], act_grads[-1][0]


class _Adam:
    def __init__(self, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        self.t += 1
        for k, p in params.items():
            g = grads[k]
            m = self.m.setdefault(k, np.zeros_like(p))
            v = self.v.setdefault(k, np.zeros_like(p))
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            mhat = m / (1 - self.b1 ** self.t)
            vhat = v / (1 - self.b2 ** self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


class _SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for k, p in params.items():
            p -= self.lr * grads[k]


def fit_fcn(X, y, arch: FcnArchitecture, optimizer: str = "adam", lr: float = 0.001,
            epochs: int = 200, batch_size: int = 32, seed: int = 0,
            standardize: bool = True, n_time=None) -> FcnModel:
    """Mini-batch training on the mean cross-entropy of each batch.

    ``n_time`` is the number of leading raw-series positions (default: all of
    them).  With ``standardize`` those are z-scored with one pooled training
    mean and deviation and the rest column by column; without it the inputs
    are used as given.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if np.unique(y).size < 2:
        raise ValueError("training needs at least two classes in y")
    if y.max() >= arch.n_classes:
        raise ValueError("labels exceed the architecture's number of classes")
    n, L = X.shape
    if L < arch.min_length:
        raise ValueError(f"input length {L} is shorter than the largest kernel")
    rng = np.random.default_rng(seed)
    nt = L if n_time is None else int(n_time)
    if not 0 <= nt <= L:
        raise ValueError("n_time must lie in [0, input length]")
    model = init_model(arch, L, seed=int(rng.integers(2 ** 31)), n_time=nt)
    if standardize:
        if nt > 0:
            seg = X[:, :nt]
            sd = seg.std()
            model.input_shift[:nt] = seg.mean()
            model.input_scale[:nt] = sd if sd > 1e-12 else 1.0
        if nt < L:
            tail = X[:, nt:]
            sd = tail.std(axis=0)
            model.input_shift[nt:] = tail.mean(axis=0)
            model.input_scale[nt:] = np.where(sd > 1e-12, sd, 1.0)

    if optimizer == "adam":
        opt = _Adam(lr)
    elif optimizer == "sgd":
        opt = _SGD(lr)
    else:
        raise ValueError(f"unknown optimizer {optimizer!r}")

    params = model.params()
    for _ in range(epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            probs, logits, cache = _forward(model, X[idx])
            mx = logits.max(axis=1, keepdims=True)
            lse = mx[:, 0] + np.log(np.exp(logits - mx).sum(axis=1))
            total += float((lse - logits[np.arange(idx.size), y[idx]]).sum())
            dlogits = probs.copy()
            dlogits[np.arange(idx.size), y[idx]] -= 1.0
            grads, _, _ = _backward(model, cache, dlogits / idx.size)
            opt.step(params, grads)
        model.training_log.append(total / n)
    return model
