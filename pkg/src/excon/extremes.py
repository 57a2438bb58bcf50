"""One extreme vector per class under complete linkage against all other classes.

For class ``c`` the extreme is the member whose farthest non-member is
farthest away; the attained distance is that max-max value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .data import FeatureVector
from .errors import DataError, ShapeMismatchError
from .serialize import read_json, write_json


@dataclass(frozen=True)
class Extreme:
    id: str
    distance: float
    vector: np.ndarray


class ExtremeSet(Mapping[str, Extreme]):
    """Read-only mapping ``label -> Extreme`` in sorted label order."""

    def __init__(self, entries: Mapping[str, Extreme]):
        self._entries = {k: entries[k] for k in sorted(entries)}
        for e in self._entries.values():
            e.vector.setflags(write=False)
        dims = {e.vector.size for e in self._entries.values()}
        if len(dims) > 1:
            raise ShapeMismatchError(f"extreme vectors have mixed lengths {sorted(dims)}")

    def __getitem__(self, label):
        return self._entries[label]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    @property
    def dim(self) -> int:
        return next(iter(self._entries.values())).vector.size

    def matrix(self, labels: Sequence[str]) -> np.ndarray:
        """Extreme vector for each label in ``labels``, stacked row-wise."""
        missing = sorted(set(labels) - set(self._entries))
        if missing:
            raise DataError(f"no extreme for labels {missing}")
        return np.stack([self._entries[lab].vector for lab in labels])

    def to_json(self) -> dict:
        return {
            label: {"id": e.id, "distance": e.distance, "vector": e.vector}
            for label, e in self._entries.items()
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "ExtremeSet":
        return cls(
            {
                str(label): Extreme(str(v["id"]), float(v["distance"]), np.array(v["vector"], dtype=np.float64))
                for label, v in doc.items()
            }
        )

    def save(self, path) -> None:
        write_json(self.to_json(), path)

    @classmethod
    def load(cls, path) -> "ExtremeSet":
        return cls.from_json(read_json(path))


def euclidean_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ShapeMismatchError(f"length mismatch: {a.size} vs {b.size}")
    acc = 0.0
    for x, y in zip(a.tolist(), b.tolist()):
        acc += (x - y) * (x - y)
    return math.sqrt(acc)


def derive_extremes(features: Sequence[FeatureVector]) -> ExtremeSet:
    if not features:
        raise DataError("no feature vectors")
    X = np.stack([np.asarray(f.values, dtype=np.float64) for f in features])
    labels = [f.label for f in features]
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DataError(f"need at least two classes to derive extremes, got {classes}")
    lab = np.array(labels, dtype=object)
    out = {}
    for c in classes:
        members = np.flatnonzero(lab == c)
        others = np.flatnonzero(lab != c)
        far = kernels.max_cross_distance(X[members], X[others])
        # argmax returns the first maximum, i.e. the smallest dataset index
        best = int(np.argmax(far))
        i = int(members[best])
        out[c] = Extreme(features[i].id, float(far[best]), X[i].copy())
    return ExtremeSet(out)
