"""File formats, window slicing and synthetic imbalanced data.

Formats (all UTF-8, LF line endings):

* manifest JSON: ``{"schema_version": 1, "shape": [tau, N], "channel_names": [...],
  "entries": [{"id", "path", "category", "label"}, ...]}`` with paths relative
  to the manifest's directory;
* per-instance CSV: one row per timestamp, ``N`` columns, no header; an empty
  field or ``NaN`` marks a missing value;
* feature CSV: header ``id,label,f0..f{d-1}``, floats at 17 significant digits.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import FLARE_SCHEME, FeatureVector, LabeledDataset, LabelScheme, MvtsInstance
from .errors import ConfigError, DataError, EmptyDatasetError, LabelingError, ParseError, ShapeMismatchError
from .serialize import fmt_float, read_json, write_json

MANIFEST_SCHEMA_VERSION = 1


def _parse_value(field: str, path, line: int, col: int) -> float:
    field = field.strip()
    if field == "" or field.lower() == "nan":
        return math.nan
    try:
        value = float(field)
    except ValueError:
        raise ParseError(f"column {col}: cannot parse {field!r} as a number", path, line) from None
    if math.isnan(value):
        return math.nan
    return value


def read_instance_csv(path, n_channels: int | None = None) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and row[0].strip() == ""):
                raise ParseError("blank line", path, line_no)
            if n_channels is not None and len(row) != n_channels:
                raise ParseError(f"expected {n_channels} columns, found {len(row)}", path, line_no)
            if rows and len(row) != len(rows[0]):
                raise ParseError(f"expected {len(rows[0])} columns, found {len(row)}", path, line_no)
            rows.append([_parse_value(v, path, line_no, j) for j, v in enumerate(row)])
    if not rows:
        raise ParseError("file has no rows", path)
    return np.array(rows, dtype=np.float64)


def write_instance_csv(values: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in np.asarray(values, dtype=np.float64):
            fh.write(",".join("NaN" if math.isnan(v) else fmt_float(v) for v in row) + "\n")


def load_manifest_dataset(manifest_path, scheme: LabelScheme | None = FLARE_SCHEME) -> LabeledDataset:
    manifest_path = Path(manifest_path)
    try:
        doc = read_json(manifest_path)
    except ValueError as exc:
        raise ParseError(f"invalid JSON: {exc}", manifest_path) from None
    version = doc.get("schema_version")
    if version != MANIFEST_SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version!r}", manifest_path)
    entries = doc.get("entries") or []
    if not entries:
        raise EmptyDatasetError(f"{manifest_path}: manifest has no entries")
    shape = doc.get("shape")
    if shape is not None:
        shape = (int(shape[0]), int(shape[1]))
    base = manifest_path.parent
    instances = []
    seen = set()
    for entry in entries:
        inst_id = str(entry["id"])
        if inst_id in seen:
            raise DataError(f"{manifest_path}: duplicate id {inst_id!r}")
        seen.add(inst_id)
        category = entry.get("category")
        label = entry.get("label")
        if category is not None and scheme is not None:
            mapped = scheme.label_for(category)
            if label is not None and label != mapped:
                raise LabelingError(f"entry {inst_id!r}: label {label!r} contradicts category {category!r} -> {mapped!r}")
            label = mapped
        if label is None:
            raise LabelingError(f"entry {inst_id!r} has neither a label nor a mappable category")
        path = base / entry["path"]
        if not path.exists():
            raise DataError(f"entry {inst_id!r}: file {path} does not exist")
        values = read_instance_csv(path, shape[1] if shape else None)
        if shape is None:
            shape = values.shape
        if values.shape != shape:
            raise ShapeMismatchError(f"entry {inst_id!r}: shape {values.shape} does not match manifest shape {shape}")
        instances.append(MvtsInstance(inst_id, values, str(label), category))
    meta = {"source": str(manifest_path)}
    if doc.get("channel_names"):
        meta["channel_names"] = ",".join(doc["channel_names"])
    return LabeledDataset(tuple(instances), meta=meta)


def save_manifest_dataset(data: LabeledDataset, directory, channel_names: Sequence[str] | None = None) -> Path:
    """Write one CSV per instance plus ``manifest.json``; returns the manifest path."""
    directory = Path(directory)
    (directory / "series").mkdir(parents=True, exist_ok=True)
    tau, n = data.shape
    if channel_names is None:
        channel_names = [f"p{j}" for j in range(n)]
    entries = []
    for inst in data.instances:
        rel = f"series/{inst.id}.csv"
        write_instance_csv(inst.values, directory / rel)
        entries.append({"id": inst.id, "path": rel, "category": inst.category, "label": inst.label})
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "shape": [tau, n],
        "channel_names": list(channel_names),
        "entries": entries,
    }
    path = directory / "manifest.json"
    write_json(manifest, path)
    return path


def slice_windows(long_series, obs_len: int, step: int, prefix: str = "w") -> list[MvtsInstance]:
    """Cut fixed-length windows starting at 0, step, 2*step, ...

    Windows are unlabeled (label ``""``); labels come from a manifest.
    """
    arr = np.asarray(long_series, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    total = arr.shape[0]
    if step < 1:
        raise ConfigError("step must be >= 1")
    if obs_len < 1 or obs_len > total:
        raise ConfigError(f"window length {obs_len} exceeds series length {total}")
    count = (total - obs_len) // step + 1
    return [MvtsInstance(f"{prefix}{i}", arr[i * step : i * step + obs_len].copy(), "") for i in range(count)]


@dataclass(frozen=True)
class SynthConfig:
    n_instances: int = 400
    imbalance: float = 0.05
    tau: int = 64
    n_channels: int = 4
    ar_neg: float = 0.2
    ar_pos: float = 0.9
    sin_amp_pos: float = 1.0
    sin_period_pos: float = 20.0
    noise_std: float = 1.0
    seed: int = 7
    positive_label: str = "F"
    negative_label: str = "NF"
    positive_category: str = "M"
    negative_category: str = "FQ"

    def validate(self) -> None:
        if self.n_instances < 2:
            raise ConfigError("n_instances must be >= 2")
        if not 0 < self.imbalance < 1:
            raise ConfigError("imbalance must lie in (0, 1)")
        if self.tau < 1 or self.n_channels < 1:
            raise ConfigError("tau and n_channels must be >= 1")
        if abs(self.ar_neg) >= 1 or abs(self.ar_pos) >= 1:
            raise ConfigError("AR coefficients must satisfy |ar| < 1")
        if self.sin_period_pos < 2:
            raise ConfigError("sin_period_pos must be >= 2")
        if not self.noise_std > 0:
            raise ConfigError("noise_std must be > 0")
        n_pos = self.n_positive
        if n_pos == 0 or n_pos == self.n_instances:
            raise ConfigError(f"degenerate config: {n_pos} positives out of {self.n_instances}")

    @property
    def n_positive(self) -> int:
        # round-half-even would make 0.5-boundaries seed-dependent to reason about
        return int(math.floor(self.n_instances * self.imbalance + 0.5))


def _stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for an independent (seed, key...) stream."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *key])))


def _ar1(rng: np.random.Generator, n: int, ar: float, noise_std: float) -> np.ndarray:
    eps = rng.standard_normal(n) * noise_std
    x = np.empty(n)
    x[0] = eps[0] / math.sqrt(1.0 - ar * ar)
    for t in range(1, n):
        x[t] = ar * x[t - 1] + eps[t]
    return x


_LABEL_STREAM = 0xFFFFFFFF


def generate_synthetic(cfg: SynthConfig) -> LabeledDataset:
    cfg.validate()
    n_pos = cfg.n_positive
    positives = set(int(i) for i in _stream(cfg.seed, _LABEL_STREAM).choice(cfg.n_instances, n_pos, replace=False))
    t = np.arange(cfg.tau, dtype=np.float64)
    wave = cfg.sin_amp_pos * np.sin(2.0 * math.pi * t / cfg.sin_period_pos)
    instances = []
    for i in range(cfg.n_instances):
        pos = i in positives
        ar = cfg.ar_pos if pos else cfg.ar_neg
        values = np.empty((cfg.tau, cfg.n_channels))
        for c in range(cfg.n_channels):
            values[:, c] = _ar1(_stream(cfg.seed, i, c), cfg.tau, ar, cfg.noise_std)
            if pos:
                values[:, c] += wave
        instances.append(
            MvtsInstance(
                f"s{cfg.seed}_{i:05d}",
                values,
                cfg.positive_label if pos else cfg.negative_label,
                cfg.positive_category if pos else cfg.negative_category,
            )
        )
    meta = {"source": "synthetic", **{k: str(v) for k, v in asdict(cfg).items()}}
    return LabeledDataset(tuple(instances), meta=meta)


def write_features_csv(features: Iterable[FeatureVector | tuple], path) -> None:
    rows = [tuple(f) for f in features]
    lengths = {np.asarray(r[2]).size for r in rows}
    if len(lengths) > 1:
        raise ShapeMismatchError(f"feature vectors have mixed lengths {sorted(lengths)}")
    d = lengths.pop() if lengths else 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "label", *[f"f{j}" for j in range(d)]])
        for inst_id, label, values in rows:
            writer.writerow([inst_id, label, *[fmt_float(v) for v in np.asarray(values, dtype=np.float64)]])


def read_features_csv(path) -> list[FeatureVector]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("missing header", path, 1) from None
        if header[:2] != ["id", "label"]:
            raise ParseError("header must start with id,label", path, 1)
        d = len(header) - 2
        for line_no, row in enumerate(reader, start=2):
            if len(row) != d + 2:
                raise ParseError(f"expected {d + 2} fields, found {len(row)}", path, line_no)
            try:
                values = np.array([float(v) for v in row[2:]], dtype=np.float64)
            except ValueError as exc:
                raise ParseError(str(exc), path, line_no) from None
            out.append(FeatureVector(row[0], row[1], values))
    return out
