"""Random convolutional kernel transform for multivariate series.

Kernel sampling follows the usual recipe (length from {7, 9, 11}, centred
Gaussian weights, uniform bias, exponential dilation, padding on a coin
flip); each kernel additionally draws one input channel uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, DataError, ShapeMismatchError
from .ingest import _stream

_LENGTHS = np.array([7, 9, 11], dtype=np.int64)


@dataclass(frozen=True)
class RocketTransform:
    weights: np.ndarray  # all kernels' weights, concatenated
    lengths: np.ndarray
    biases: np.ndarray
    dilations: np.ndarray
    paddings: np.ndarray
    channels: np.ndarray
    n_timepoints: int
    n_channels: int
    seed: int

    @property
    def n_kernels(self) -> int:
        return int(self.lengths.size)

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_json(cls, doc) -> "RocketTransform":
        floats = lambda k: np.array(doc[k], dtype=np.float64)  # noqa: E731
        ints = lambda k: np.array(doc[k], dtype=np.int64)  # noqa: E731
        return cls(
            floats("weights"), ints("lengths"), floats("biases"), ints("dilations"), ints("paddings"),
            ints("channels"), int(doc["n_timepoints"]), int(doc["n_channels"]), int(doc["seed"]),
        )


def generate_kernels(n_timepoints: int, n_channels: int, n_kernels: int = 1000, seed: int = 42) -> RocketTransform:
    if n_kernels < 1:
        raise ConfigError("n_kernels must be >= 1")
    if n_timepoints < 1 or n_channels < 1:
        raise ConfigError("series shape must be positive")
    rng = _stream(seed, 0)
    lengths = rng.choice(_LENGTHS, n_kernels)
    weights = np.zeros(int(lengths.sum()))
    biases = np.zeros(n_kernels)
    dilations = np.zeros(n_kernels, dtype=np.int64)
    paddings = np.zeros(n_kernels, dtype=np.int64)
    channels = np.zeros(n_kernels, dtype=np.int64)
    a = 0
    for i in range(n_kernels):
        length = int(lengths[i])
        w = rng.normal(0, 1, length)
        weights[a : a + length] = w - w.mean()
        a += length
        biases[i] = rng.uniform(-1, 1)
        span = max(n_timepoints - 1, 1) / (length - 1)
        dilations[i] = int(2 ** rng.uniform(0, math.log2(span))) if span > 1 else 1
        paddings[i] = ((length - 1) * dilations[i]) // 2 if rng.integers(2) == 1 else 0
        channels[i] = rng.integers(n_channels)
    return RocketTransform(weights, lengths, biases, dilations, paddings, channels, n_timepoints, n_channels, seed)


def rocket_transform(t: RocketTransform, X) -> tuple[np.ndarray, int]:
    """PPV/max features, kernel-major, for ``(tau, N)`` or ``(M, tau, N)`` input.

    Returns ``(features, skipped)`` where ``skipped`` counts kernels whose
    span exceeds the (padded) series; their features are ``(0, 0)``.
    """
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 2
    Xb = X[None] if single else X
    if Xb.ndim != 3:
        raise ShapeMismatchError(f"expected (tau, N) or (M, tau, N) input, got {X.shape}")
    if Xb.shape[2] != t.n_channels:
        raise ShapeMismatchError(f"input has {Xb.shape[2]} channels, transform expects {t.n_channels}")
    if not np.all(np.isfinite(Xb)):
        raise DataError("input contains non-finite values")
    tau = Xb.shape[1]
    out_len = tau + 2 * t.paddings - (t.lengths - 1) * t.dilations
    skipped = int(np.sum(out_len <= 0))
    feats = kernels.rocket_apply(Xb, t.weights, t.lengths, t.biases, t.dilations, t.paddings, t.channels)
    return (feats[0] if single else feats), skipped
