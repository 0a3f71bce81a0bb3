"""Gradient-based attributions for differentiable models.

A model here is anything with ``logits(X) -> (n, K)`` and
``input_gradient(X, class_index) -> (n, p)``; :class:`~clusterlens.neural.FcnModel`
qualifies.
"""

from __future__ import annotations

import numpy as np

from .shapley import Attribution


def gradient_shap(m, x, background, class_index: int, n_samples: int = 200, seed: int = 0,
                  sample_id: str = "", batch: int = 500) -> Attribution:
    """Expected-gradients estimate of SHAP values of one class logit.

    Each draw picks a background row ``b`` and ``u ~ U(0, 1)`` and evaluates
    ``(x - b) * grad(b + u (x - b))``; the attribution is the mean over draws.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    x = np.asarray(x, dtype=float)
    background = np.atleast_2d(np.asarray(background, dtype=float))
    if background.shape[0] == 0:
        raise ValueError("background must contain at least one row")
    rng = np.random.default_rng(seed)
    rows = rng.integers(background.shape[0], size=n_samples)
    u = rng.uniform(size=n_samples)
    total = np.zeros(x.size)
    for start in range(0, n_samples, batch):
        b = background[rows[start:start + batch]]
        diff = x[None, :] - b
        z = b + u[start:start + batch, None] * diff
        total += (diff * m.input_gradient(z, class_index)).sum(axis=0)
    base = float(np.mean(m.logits(background)[:, class_index]))
    return Attribution(sample_id=sample_id, class_index=class_index,
                       values=total / n_samples, base_value=base)


def grad_cam_map(activations, gradients) -> np.ndarray:
    """ReLU of the channel maps weighted by their time-averaged gradients.

    ``activations`` and ``gradients`` are (channels, L).
    """
    A = np.atleast_2d(np.asarray(activations, dtype=float))
    dA = np.atleast_2d(np.asarray(gradients, dtype=float))
    alpha = dA.mean(axis=1)
    return np.maximum(alpha @ A, 0.0)


def grad_cam(m, x, class_index: int, sample_id: str = "") -> Attribution:
    """Grad-CAM of the last convolution for one input.

    Same-padded convolutions keep the input length, so the map lines up with
    the input positions (feature positions included) without resampling.
    """
    from ..neural import last_conv_gradients

    if not getattr(m, "conv_w", None):
        raise ValueError("Grad-CAM needs a model with at least one convolutional layer")
    A, dA = last_conv_gradients(m, x, class_index)
    return Attribution(sample_id=sample_id, class_index=class_index,
                       values=grad_cam_map(A, dA), base_value=0.0)
