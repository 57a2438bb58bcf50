"""Dataset model and per-instance preprocessing.

An instance is a ``(timestamps, channels)`` matrix with an id, a class label
and an optional fine-grained category (``FQ``, ``B``, ``C``, ``M``, ``X`` for
flare data). All preprocessing is instance-wise and pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import EmptyDatasetError, InvalidInputError, LabelingError, ShapeMismatchError, UnimputableError

# Minimum co-observed timestamps for a donor channel in imputation.
MIN_CO_OBSERVED = 3


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim == 1:
        arr = arr[:, None]
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MvtsInstance:
    """One multivariate series; ``values`` has shape ``(tau, n_channels)``."""

    id: str
    values: np.ndarray
    label: str
    category: str | None = None

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeMismatchError(f"instance {self.id!r}: expected a non-empty 2-D matrix, got shape {arr.shape}")
        object.__setattr__(self, "values", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def replace_values(self, values) -> "MvtsInstance":
        return MvtsInstance(self.id, values, self.label, self.category)

    def __eq__(self, other):
        if not isinstance(other, MvtsInstance):
            return NotImplemented
        return (
            self.id == other.id
            and self.label == other.label
            and self.category == other.category
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    __hash__ = None


@dataclass(frozen=True)
class LabeledDataset:
    instances: tuple[MvtsInstance, ...]
    classes: tuple[str, ...] = ()
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        instances = tuple(self.instances)
        object.__setattr__(self, "instances", instances)
        present = sorted({inst.label for inst in instances})
        classes = tuple(self.classes) if self.classes else tuple(present)
        missing = set(present) - set(classes)
        if missing:
            raise LabelingError(f"labels {sorted(missing)} are not in the class list {list(classes)}")
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "meta", dict(self.meta))
        seen = set()
        for inst in instances:
            if inst.id in seen:
                raise InvalidInputError(f"duplicate instance id {inst.id!r}")
            seen.add(inst.id)
        if instances:
            shape = instances[0].shape
            for inst in instances:
                if inst.shape != shape:
                    raise ShapeMismatchError(
                        f"instance {inst.id!r} has shape {inst.shape}, expected {shape}"
                    )

    def __len__(self):
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def __getitem__(self, i):
        return self.instances[i]

    @property
    def shape(self) -> tuple[int, int]:
        if not self.instances:
            raise EmptyDatasetError("dataset is empty")
        return self.instances[0].shape

    @property
    def labels(self) -> list[str]:
        return [inst.label for inst in self.instances]

    @property
    def ids(self) -> list[str]:
        return [inst.id for inst in self.instances]

    def values_array(self) -> np.ndarray:
        """Stack instance matrices into ``(M, tau, N)``."""
        if not self.instances:
            return np.zeros((0, 0, 0))
        return np.stack([inst.values for inst in self.instances])

    def class_counts(self) -> dict[str, int]:
        counts = {c: 0 for c in self.classes}
        for inst in self.instances:
            counts[inst.label] += 1
        return counts

    def with_instances(self, instances: Iterable[MvtsInstance], recompute_classes: bool = False) -> "LabeledDataset":
        instances = tuple(instances)
        classes = () if recompute_classes else self.classes
        return LabeledDataset(instances, classes, self.meta)


@dataclass(frozen=True)
class LabelScheme:
    mapping: Mapping[str, str]
    positive_class: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "mapping", dict(self.mapping))
        if self.positive_class is not None and self.positive_class not in set(self.mapping.values()):
            raise LabelingError(f"positive class {self.positive_class!r} is not produced by the mapping")

    def label_for(self, category: str) -> str:
        try:
            return self.mapping[category]
        except KeyError:
            raise LabelingError(f"unknown category {category!r}; known: {sorted(self.mapping)}") from None

    @property
    def labels(self) -> list[str]:
        return sorted(set(self.mapping.values()))


FLARE_SCHEME = LabelScheme({"FQ": "NF", "B": "NF", "C": "NF", "M": "F", "X": "F"}, positive_class="F")


def _check_finite(instance: MvtsInstance) -> None:
    bad = np.argwhere(~np.isfinite(instance.values))
    if bad.size:
        t, n = (int(v) for v in bad[0])
        raise InvalidInputError(
            f"instance {instance.id!r}: non-finite value {instance.values[t, n]!r} at channel {n}, timestamp {t}"
        )


def znormalize_columns(values: np.ndarray) -> np.ndarray:
    """Per-column z-score with population std; constant columns become zeros."""
    values = np.asarray(values, dtype=np.float64)
    out = np.zeros_like(values)
    for n in range(values.shape[1]):
        col = values[:, n]
        if np.all(col == col[0]):
            continue
        mu = col.mean()
        sigma = np.sqrt(np.mean((col - mu) ** 2))
        if sigma > 0:
            out[:, n] = (col - mu) / sigma
    return out


def znormalize_instance(instance: MvtsInstance) -> MvtsInstance:
    _check_finite(instance)
    return instance.replace_values(znormalize_columns(instance.values))


def _interpolate_channel(col: np.ndarray, observed: np.ndarray) -> np.ndarray:
    t_obs = np.flatnonzero(observed)
    t_all = np.arange(col.size)
    # np.interp holds the end values constant outside the observed range.
    return np.interp(t_all, t_obs, col[t_obs])


def _donor_stats(x: np.ndarray, y: np.ndarray):
    """Pearson r plus (mean, std) of donor x and target y over common points."""
    mx, my = x.mean(), y.mean()
    dx, dy = x - mx, y - my
    sx = np.sqrt(np.mean(dx * dx))
    sy = np.sqrt(np.mean(dy * dy))
    if sx == 0 or sy == 0:
        return None
    r = float(np.mean(dx * dy) / (sx * sy))
    return r, mx, sx, my, sy


def impute_missing(instance: MvtsInstance, k: int = 3) -> MvtsInstance:
    """Fill NaN entries using correlated donor channels.

    For each channel with gaps, donors are ranked by absolute Pearson
    correlation over co-observed timestamps (at least three). A missing entry
    at ``t`` takes the ``|r|``-weighted mean of the ``k`` best donors observed
    at ``t``, each donor's value z-scored over the co-observed points and
    mapped back through the target's co-observed mean and std (sign-adjusted
    for negative correlation). Entries with no usable donor fall back to
    linear interpolation, with boundary gaps held at the nearest observation.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    values = np.array(instance.values, dtype=np.float64)
    if np.any(np.isinf(values)):
        t, n = (int(v) for v in np.argwhere(np.isinf(values))[0])
        raise InvalidInputError(f"instance {instance.id!r}: infinite value at channel {n}, timestamp {t}")
    missing = np.isnan(values)
    if not missing.any():
        return instance
    observed = ~missing
    n_channels = values.shape[1]
    if not observed.any():
        raise UnimputableError(f"instance {instance.id!r}: every channel is fully missing")

    out = values.copy()
    for target in range(n_channels):
        gaps = np.flatnonzero(missing[:, target])
        if gaps.size == 0:
            continue
        if not observed[:, target].any():
            raise UnimputableError(f"instance {instance.id!r}: channel {target} has no observed values")

        donors = []
        for donor in range(n_channels):
            if donor == target:
                continue
            common = observed[:, target] & observed[:, donor]
            if common.sum() < MIN_CO_OBSERVED:
                continue
            stats = _donor_stats(values[common, donor], values[common, target])
            if stats is None:
                continue
            donors.append((abs(stats[0]), donor, stats))
        # Highest |r| first; ties go to the lower channel index.
        donors.sort(key=lambda item: (-item[0], item[1]))

        fallback = None
        for t in gaps:
            usable = [d for d in donors if observed[t, d[1]]][:k]
            weight_sum = sum(d[0] for d in usable)
            if not usable or weight_sum == 0:
                if fallback is None:
                    fallback = _interpolate_channel(values[:, target], observed[:, target])
                out[t, target] = fallback[t]
                continue
            acc = 0.0
            for abs_r, donor, (r, mx, sx, my, sy) in usable:
                z = (values[t, donor] - mx) / sx
                acc += abs_r * (my + np.sign(r) * z * sy)
            out[t, target] = acc / weight_sum
    return instance.replace_values(out)


def filter_label_categories(data: LabeledDataset, keep: Iterable[str]) -> LabeledDataset:
    keep = set(keep)
    kept = [inst for inst in data.instances if inst.category in keep]
    if not kept:
        raise EmptyDatasetError(f"no instances with category in {sorted(keep)}")
    return data.with_instances(kept, recompute_classes=True)


def preprocess_dataset(data: LabeledDataset, k: int = 3) -> LabeledDataset:
    """Impute then z-normalize every instance."""
    return data.with_instances(znormalize_instance(impute_missing(inst, k)) for inst in data.instances)


def instances_by_label(data: LabeledDataset) -> dict[str, list[int]]:
    groups: dict[str, list[int]] = {c: [] for c in data.classes}
    for i, inst in enumerate(data.instances):
        groups[inst.label].append(i)
    return groups


def as_instances(matrices: Sequence[np.ndarray], labels: Sequence[str], prefix: str = "m") -> list[MvtsInstance]:
    return [MvtsInstance(f"{prefix}{i}", m, lab) for i, (m, lab) in enumerate(zip(matrices, labels))]


class FeatureVector(NamedTuple):
    """Fixed-length descriptor of one instance (``22 * n_channels`` for the default bank)."""

    id: str
    label: str
    values: np.ndarray
