"""Per-channel feature banks and the channel-major multi-channel vector.

A bank maps a univariate series to exactly 22 finite floats. Instance vectors
concatenate channel blocks so feature ``j`` of channel ``n`` sits at
``22 * n + j``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import catch22
from .data import FeatureVector, LabeledDataset, MvtsInstance
from .errors import ConfigError, DataError, InvalidInputError

N_FEATURES = 22


@dataclass(frozen=True)
class FeatureBank:
    name: str
    feature_names: tuple[str, ...]
    evaluators: tuple[Callable[[np.ndarray], float], ...]
    version: int = 1

    def __post_init__(self):
        if len(self.feature_names) != N_FEATURES or len(self.evaluators) != N_FEATURES:
            raise ConfigError(f"bank {self.name!r} must define exactly {N_FEATURES} features")


class SeriesTooShortError(DataError):
    pass


CATCH22 = FeatureBank("c22", catch22.FEATURE_NAMES, catch22.EVALUATORS)


def _acf(y, lag):
    x = y - y.mean()
    den = np.dot(x, x)
    if lag >= y.size or den == 0:
        return 0.0
    return float(np.dot(x[:-lag], x[lag:]) / den)


def _moment(y, k):
    sd = y.std()
    return float(np.mean(((y - y.mean()) / sd) ** k)) if sd > 0 else 0.0


# Plain summary statistics; each is a one-liner that can be checked by hand.
_BASIC = (
    ("mean", lambda y: float(y.mean())),
    ("std", lambda y: float(y.std())),
    ("min", lambda y: float(y.min())),
    ("max", lambda y: float(y.max())),
    ("median", lambda y: float(np.median(y))),
    ("q10", lambda y: float(np.quantile(y, 0.1))),
    ("q25", lambda y: float(np.quantile(y, 0.25))),
    ("q75", lambda y: float(np.quantile(y, 0.75))),
    ("q90", lambda y: float(np.quantile(y, 0.9))),
    ("skew", lambda y: _moment(y, 3)),
    ("kurtosis", lambda y: _moment(y, 4)),
    ("mean_abs_diff", lambda y: float(np.mean(np.abs(np.diff(y))))),
    ("first", lambda y: float(y[0])),
    ("last", lambda y: float(y[-1])),
    *((f"acf_{k}", (lambda k: lambda y: _acf(y, k))(k)) for k in range(1, 9)),
)

BASIC = FeatureBank("basic", tuple(n for n, _ in _BASIC), tuple(f for _, f in _BASIC))

_BANKS = {CATCH22.name: CATCH22, BASIC.name: BASIC}


def get_bank(name: str) -> FeatureBank:
    try:
        return _BANKS[name]
    except KeyError:
        raise ConfigError(f"unknown feature bank {name!r}; available: {sorted(_BANKS)}") from None


def _sanitize(v: float) -> float:
    return v if math.isfinite(v) else 0.0


def extract_channel_features(series, bank: FeatureBank = CATCH22) -> np.ndarray:
    y = np.asarray(series, dtype=np.float64)
    if y.ndim != 1:
        raise InvalidInputError(f"expected a 1-D series, got shape {y.shape}")
    if y.size < 2:
        raise SeriesTooShortError(f"series length {y.size} is below the minimum of 2")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("series contains non-finite values")
    if np.all(y == y[0]):
        # constant channel: a neutral all-zero block
        return np.zeros(N_FEATURES)
    out = np.empty(N_FEATURES)
    with np.errstate(all="ignore"):
        for j, ev in enumerate(bank.evaluators):
            try:
                out[j] = _sanitize(float(ev(y)))
            except (ArithmeticError, ValueError, IndexError):
                out[j] = 0.0
    return out


def extract_instance_features(instance: MvtsInstance, bank: FeatureBank = CATCH22) -> FeatureVector:
    values = instance.values
    blocks = []
    for n in range(values.shape[1]):
        try:
            blocks.append(extract_channel_features(values[:, n], bank))
        except DataError as exc:
            raise type(exc)(f"instance {instance.id!r}, channel {n}: {exc}") from exc
    return FeatureVector(instance.id, instance.label, np.concatenate(blocks))


def thread_count() -> int:
    """Worker count from ``EXCON_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("EXCON_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"EXCON_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError("EXCON_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def extract_dataset_features(
    data: LabeledDataset | Sequence[MvtsInstance], bank: FeatureBank = CATCH22, threads: int | None = None
) -> list[FeatureVector]:
    instances = list(data.instances if isinstance(data, LabeledDataset) else data)
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(instances) < 2:
        return [extract_instance_features(inst, bank) for inst in instances]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # map preserves input order regardless of completion order
        return list(pool.map(lambda inst: extract_instance_features(inst, bank), instances))


def feature_matrix(features: Sequence[FeatureVector]) -> np.ndarray:
    if not features:
        return np.zeros((0, 0))
    return np.stack([np.asarray(f.values, dtype=np.float64) for f in features])
