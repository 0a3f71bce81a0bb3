"""Synthetic collections with known structure, for checking the pipeline end to end."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import TimeSeriesCollection


@dataclass
class SyntheticSpec:
    kind: str = "blobs"
    n_per_class: int = 20
    T: int = 50
    noise_sigma: float = 0.5
    n_classes: int = 3
    spike_positions: tuple = (10, 40)
    spike_signs: Optional[tuple] = None
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.kind not in ("blobs", "spikes"):
            raise ValueError(f"unknown synthetic kind {self.kind!r}")
        if self.kind == "spikes" and any(not 0 <= s < self.T for s in self.spike_positions):
            raise ValueError("spike positions must lie in [0, T)")


def blob_levels(spec: SyntheticSpec) -> np.ndarray:
    spacing = max(10.0 * spec.noise_sigma, 1.0)
    return spacing * np.arange(spec.n_classes)


def gen_blobs(spec: SyntheticSpec) -> TimeSeriesCollection:
    """Class ``c`` is the constant level ``c * spacing`` plus Gaussian noise.

    The spacing is ``max(10 * noise_sigma, 1)``.
    """
    if spec.n_classes < 2:
        raise ValueError("need at least two classes")
    rng = np.random.default_rng(spec.seed)
    levels = blob_levels(spec)
    values = np.concatenate([
        lvl + rng.normal(0.0, spec.noise_sigma, size=(spec.n_per_class, spec.T)) if spec.noise_sigma
        else np.full((spec.n_per_class, spec.T), lvl)
        for lvl in levels
    ])
    labels = np.repeat(np.arange(spec.n_classes), spec.n_per_class)
    ids = [f"c{c}_{i}" for c in range(spec.n_classes) for i in range(spec.n_per_class)]
    return TimeSeriesCollection.from_array(values, ids=ids, labels=labels, granularity="synthetic")


def spike_signs(spec: SyntheticSpec) -> np.ndarray:
    """Spike polarity per class; alternates +1, -1, ... unless given explicitly.

    Same-polarity spikes differing only in position are indistinguishable to a
    convolutional classifier that pools over time, hence the alternation.
    """
    k = len(spec.spike_positions)
    if spec.spike_signs is not None:
        signs = np.asarray(spec.spike_signs, dtype=float)
        if signs.size != k:
            raise ValueError("one spike sign per class is required")
        return signs
    return np.where(np.arange(k) % 2 == 0, 1.0, -1.0)


def gen_spikes(spec: SyntheticSpec) -> TimeSeriesCollection:
    """Class ``c`` is Gaussian baseline noise plus a unit spike at ``spike_positions[c]``."""
    pos = list(spec.spike_positions)
    if len(pos) < 2:
        raise ValueError("need at least two classes")
    if len(set(pos)) != len(pos):
        raise ValueError("spike positions must be distinct across classes")
    rng = np.random.default_rng(spec.seed)
    signs = spike_signs(spec)
    blocks = []
    for c, s in enumerate(pos):
        block = rng.normal(0.0, spec.noise_sigma, size=(spec.n_per_class, spec.T)) \
            if spec.noise_sigma else np.zeros((spec.n_per_class, spec.T))
        block[:, s] += signs[c]
        blocks.append(block)
    labels = np.repeat(np.arange(len(pos)), spec.n_per_class)
    ids = [f"c{c}_{i}" for c in range(len(pos)) for i in range(spec.n_per_class)]
    return TimeSeriesCollection.from_array(np.concatenate(blocks), ids=ids, labels=labels,
                                           granularity="synthetic")
