"""Recurrent embedder trained to pull each instance toward its class extreme.

Architecture: recurrent cell over the ``tau`` rows, inverted dropout on the
final hidden state, then a dense projection to ``d`` outputs. The loss is the
class-size-weighted squared distance between each embedding and its class's
extreme vector:

    L = sum_c (1/|C_c|) sum_{m in C_c} ||e_m - E_c||^2

Minibatches use the same per-sample weights, so one epoch's batch losses sum
to ``L``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import recurrent
from .data import LabeledDataset
from .errors import ConfigError, DataError, NumericError, ShapeMismatchError, TrainingError
from .extremes import ExtremeSet
from .ingest import _stream
from .serialize import read_json, write_json

CHECKPOINT_SCHEMA_VERSION = 1
CLIP_NORM = 5.0

# stream keys for the counter-based generator
_INIT, _SHUFFLE, _DROPOUT = 0, 1, 2


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    learning_rate: float = 1e-2
    batch_size: int = 64
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    dropout: float = 0.5
    hidden_dim: int = 128
    cell_kind: str = "lstm"
    seed: int = 42
    shuffle: bool = True
    clip_norm: float = CLIP_NORM
    bias_init: str = "extreme_mean"

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if not 0 <= self.dropout < 1:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.hidden_dim < 1:
            raise ConfigError("hidden_dim must be >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ConfigError("invalid Adam hyperparameters")
        if not self.clip_norm > 0:
            raise ConfigError("clip_norm must be > 0")
        recurrent._check_kind(self.cell_kind)
        if self.bias_init not in ("zero", "extreme_mean"):
            raise ConfigError(f"bias_init must be 'zero' or 'extreme_mean', got {self.bias_init!r}")


@dataclass
class EmbedderModel:
    cell_kind: str
    params: dict
    dropout: float
    seed: int = 0
    training_log: list = field(default_factory=list)
    clip_events: list = field(default_factory=list)

    @property
    def input_dim(self) -> int:
        return self.params["W"].shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.params["U"].shape[1]

    @property
    def output_dim(self) -> int:
        return self.params["P"].shape[0]

    def cell_params(self) -> dict:
        return {k: self.params[k] for k in ("W", "U", "b")}


def init_model(cell_kind: str, input_dim: int, hidden_dim: int, output_dim: int, dropout: float, seed: int) -> EmbedderModel:
    rng = _stream(seed, _INIT)
    params = recurrent.init_cell(cell_kind, input_dim, hidden_dim, rng)
    bound = 1.0 / math.sqrt(hidden_dim)
    params["P"] = rng.uniform(-bound, bound, size=(output_dim, hidden_dim))
    params["c"] = np.zeros(output_dim)
    return EmbedderModel(cell_kind, params, dropout, seed)


def dropout_mask(p: float, shape, rng: np.random.Generator | None) -> np.ndarray:
    if p == 0 or rng is None:
        return np.ones(shape)
    keep = rng.random(shape) >= p
    return keep / (1.0 - p)


@dataclass
class ForwardCache:
    cell: recurrent.CellCache
    h: np.ndarray
    mask: np.ndarray


def model_forward(model: EmbedderModel, X: np.ndarray, mode: str = "eval", rng: np.random.Generator | None = None,
                  where: str = ""):
    """Embeddings for ``X`` (``(tau, N)`` or ``(B, tau, N)``); returns ``(e, cache)``.

    In ``train`` mode the dropout mask is drawn from ``rng`` (no dropout if
    ``rng`` is None or ``p == 0``).
    """
    if mode not in ("train", "eval"):
        raise ConfigError(f"mode must be 'train' or 'eval', got {mode!r}")
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 2
    Xb = X[None] if single else X
    if Xb.ndim != 3 or Xb.shape[2] != model.input_dim:
        raise ShapeMismatchError(f"expected (..., tau, {model.input_dim}) input, got {X.shape}")
    h, cell_cache = recurrent.cell_forward(model.cell_kind, model.params, Xb, where)
    mask = dropout_mask(model.dropout, h.shape, rng) if mode == "train" else np.ones(h.shape)
    e = (h * mask) @ model.params["P"].T + model.params["c"]
    cache = ForwardCache(cell_cache, h, mask)
    return (e[0] if single else e), cache


def class_weights(labels: Sequence[str]) -> dict:
    counts: dict = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    return {lab: 1.0 / n for lab, n in counts.items()}


def extreme_reconstruction_loss(embeddings, labels: Sequence[str], extremes: ExtremeSet, weights: dict | None = None) -> float:
    """Class-size-weighted squared distance of each embedding to its class extreme.

    ``weights`` defaults to ``1/|C_c|`` computed from ``labels``.
    """
    E = np.asarray(embeddings, dtype=np.float64)
    if E.ndim == 1:
        E = E[None]
    if E.shape[0] != len(labels):
        raise ShapeMismatchError(f"{E.shape[0]} embeddings for {len(labels)} labels")
    targets = extremes.matrix(labels)
    if targets.shape[1] != E.shape[1]:
        raise ShapeMismatchError(f"embedding dim {E.shape[1]} does not match extreme dim {targets.shape[1]}")
    w = class_weights(labels) if weights is None else weights
    diff = E - targets
    per = np.sum(diff * diff, axis=1)
    total = 0.0
    for lab, v in zip(labels, per):
        total += w[lab] * float(v)
    return total


def model_backward(model: EmbedderModel, batch_labels: Sequence[str], extremes: ExtremeSet, embeddings: np.ndarray,
                   cache: ForwardCache, weights: dict):
    """Loss and gradients of the weighted batch loss for every parameter tensor."""
    E = np.atleast_2d(embeddings)
    if E.shape[0] != len(batch_labels) or cache.h.shape[0] != E.shape[0]:
        raise ShapeMismatchError("cache, embeddings and labels disagree on batch size")
    targets = extremes.matrix(batch_labels)
    w = np.array([weights[lab] for lab in batch_labels])
    diff = E - targets
    loss = float(np.dot(w, np.sum(diff * diff, axis=1)))
    de = 2.0 * w[:, None] * diff
    h_tilde = cache.h * cache.mask
    grads = {"P": de.T @ h_tilde, "c": de.sum(axis=0)}
    dh = (de @ model.params["P"]) * cache.mask
    grads.update(recurrent.cell_backward(model.params, cache.cell, dh))
    return loss, grads


def _batches(n: int, batch_size: int, order: np.ndarray):
    for lo in range(0, n, batch_size):
        yield order[lo : lo + batch_size]


def eval_loss(model: EmbedderModel, X: np.ndarray, labels: Sequence[str], extremes: ExtremeSet, weights: dict,
              batch_size: int = 256) -> float:
    total = 0.0
    for lo in range(0, X.shape[0], batch_size):
        e, _ = model_forward(model, X[lo : lo + batch_size], "eval")
        total += extreme_reconstruction_loss(e, labels[lo : lo + batch_size], extremes, weights)
    return total


def train_embedder(data: LabeledDataset, extremes: ExtremeSet, cfg: TrainConfig, log=None) -> EmbedderModel:
    """Adam on shuffled minibatches; ``training_log[0]`` is the loss before any update."""
    cfg.validate()
    if len(data) == 0:
        raise DataError("training set is empty")
    labels = data.labels
    missing = sorted(set(labels) - set(extremes))
    if missing:
        raise DataError(f"no extreme for training labels {missing}")
    X = data.values_array()
    M, _, N = X.shape
    model = init_model(cfg.cell_kind, N, cfg.hidden_dim, extremes.dim, cfg.dropout, cfg.seed)
    if cfg.bias_init == "extreme_mean":
        # Start at the best constant output (the unweighted mean of the class
        # extremes). Adam moves a bias by about lr per step, far too slowly to
        # reach extreme components of order 10 within a few hundred steps.
        model.params["c"] = extremes.matrix(sorted(extremes)).mean(axis=0)
    weights = class_weights(labels)
    state = recurrent.AdamState.zeros_like(model.params)
    model.training_log.append(eval_loss(model, X, labels, extremes, weights))
    for epoch in range(1, cfg.epochs + 1):
        order = _stream(cfg.seed, _SHUFFLE, epoch).permutation(M) if cfg.shuffle else np.arange(M)
        for bi, idx in enumerate(_batches(M, cfg.batch_size, order)):
            where = f"epoch {epoch}, batch {bi}"
            try:
                e, cache = model_forward(model, X[idx], "train", _stream(cfg.seed, _DROPOUT, epoch, bi), where)
            except NumericError as exc:
                raise TrainingError(str(exc)) from exc
            batch_labels = [labels[i] for i in idx]
            loss, grads = model_backward(model, batch_labels, extremes, e, cache, weights)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at {where}")
            grads, norm = recurrent.clip_by_global_norm(grads, cfg.clip_norm)
            if norm > cfg.clip_norm:
                model.clip_events.append({"epoch": epoch, "batch": bi, "norm": norm})
            model.params, state = recurrent.adam_step(model.params, grads, state, cfg.learning_rate, cfg.beta1,
                                                      cfg.beta2, cfg.eps)
        epoch_loss = eval_loss(model, X, labels, extremes, weights)
        if not math.isfinite(epoch_loss):
            raise TrainingError(f"non-finite loss after epoch {epoch}")
        model.training_log.append(epoch_loss)
        if log is not None:
            log(f"epoch {epoch}/{cfg.epochs} loss {epoch_loss:.6g}")
    return model


def embed_dataset(model: EmbedderModel, data: LabeledDataset, batch_size: int = 256) -> list[tuple[str, str, np.ndarray]]:
    X = data.values_array()
    if len(data) and X.shape[2] != model.input_dim:
        raise ShapeMismatchError(f"data has {X.shape[2]} channels, model expects {model.input_dim}")
    out = []
    for lo in range(0, len(data), batch_size):
        e, _ = model_forward(model, X[lo : lo + batch_size], "eval")
        for inst, row in zip(data.instances[lo : lo + batch_size], e):
            out.append((inst.id, inst.label, row.copy()))
    return out


def save_model(model: EmbedderModel, path, extremes: ExtremeSet | None = None, cfg: TrainConfig | None = None) -> None:
    doc = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "cell_kind": model.cell_kind,
        "input_dim": model.input_dim,
        "hidden_dim": model.hidden_dim,
        "output_dim": model.output_dim,
        "dropout": model.dropout,
        "seed": model.seed,
        "params": {k: model.params[k] for k in ("W", "U", "b", "P", "c")},
        "training_log": list(model.training_log),
        "clip_events": list(model.clip_events),
        "extremes": extremes.to_json() if extremes is not None else None,
        "train_config": asdict(cfg) if cfg is not None else None,
    }
    write_json(doc, path)


def load_model(path) -> tuple[EmbedderModel, ExtremeSet | None]:
    doc = read_json(path)
    if doc.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise DataError(f"{path}: unsupported checkpoint schema_version {doc.get('schema_version')!r}")
    params = {k: np.array(v, dtype=np.float64) for k, v in doc["params"].items()}
    h, n = int(doc["hidden_dim"]), int(doc["input_dim"])
    g = recurrent._check_kind(doc["cell_kind"])
    if params["W"].shape != (g * h, n) or params["P"].shape[1] != h:
        raise DataError(f"{path}: parameter shapes do not match declared dims")
    model = EmbedderModel(doc["cell_kind"], params, float(doc["dropout"]), int(doc["seed"]),
                          list(doc["training_log"]), list(doc.get("clip_events") or []))
    extremes = ExtremeSet.from_json(doc["extremes"]) if doc.get("extremes") else None
    return model, extremes
