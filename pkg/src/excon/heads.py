"""Downstream classifiers and baseline representations.

All heads standardize inputs with training-set statistics; dimensions that are
constant in training map to 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import recurrent
from .data import LabeledDataset, MvtsInstance
from .embedder import TrainConfig, class_weights, dropout_mask
from .errors import ConfigError, DataError, NumericError, ShapeMismatchError, TrainingError
from .ingest import _stream
from .serialize import read_json, write_json

HEAD_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray  # 1/std, or 0 where the training std is 0

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        scale = np.zeros_like(std)
        nz = std > 0
        scale[nz] = 1.0 / std[nz]
        return cls(mean, scale)

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.mean.size:
            raise ShapeMismatchError(f"expected (n, {self.mean.size}) input, got {X.shape}")
        return (X - self.mean) * self.scale


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if X.shape[0] != len(y):
        raise ShapeMismatchError(f"{X.shape[0]} rows for {len(y)} labels")
    if not np.all(np.isfinite(X)):
        raise DataError("feature matrix contains non-finite values")
    return X, list(y)


# ---------------------------------------------------------------- logistic


@dataclass
class LogisticModel:
    classes: tuple[str, ...]
    W: np.ndarray  # (1, d) in binary mode, (K, d) otherwise
    b: np.ndarray
    standardizer: Standardizer
    lam: float
    n_iter: int = 0
    loss_trace: list = field(default_factory=list)

    @property
    def binary(self) -> bool:
        return len(self.classes) == 2


def _logits_to_proba(Z: np.ndarray, binary: bool) -> np.ndarray:
    if binary:
        p1 = recurrent.sigmoid(Z[:, 0])
        return np.column_stack([1.0 - p1, p1])
    Z = Z - Z.max(axis=1, keepdims=True)
    P = np.exp(Z)
    return P / P.sum(axis=1, keepdims=True)


def _logistic_objective(W, b, Xs, T, lam, binary):
    """Mean cross-entropy plus ``lam/2 * ||W||^2`` and its gradient."""
    n = Xs.shape[0]
    Z = Xs @ W.T + b
    if binary:
        z = Z[:, 0]
        t = T[:, 1]
        # log(1 + exp(-|z|)) form avoids overflow
        ce = np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))
        loss = float(ce.mean())
        R = (recurrent.sigmoid(z) - t)[:, None]
    else:
        Zs = Z - Z.max(axis=1, keepdims=True)
        logp = Zs - np.log(np.exp(Zs).sum(axis=1, keepdims=True))
        loss = float(-(T * logp).sum() / n)
        R = np.exp(logp) - T
    loss += 0.5 * lam * float(np.sum(W * W))
    gW = R.T @ Xs / n + lam * W
    gb = R.sum(axis=0) / n
    return loss, gW, gb


def fit_logistic(X, y, lam: float = 1e-3, max_iter: int = 500, tol: float = 1e-6) -> LogisticModel:
    """Preconditioned full-batch gradient descent with Armijo backtracking from a zero start."""
    X, y = _check_xy(X, y)
    if lam < 0 or max_iter < 0 or tol <= 0:
        raise ConfigError("need lam >= 0, max_iter >= 0, tol > 0")
    classes = tuple(sorted(set(y)))
    if len(classes) < 2:
        raise DataError(f"logistic regression needs at least two classes, got {list(classes)}")
    binary = len(classes) == 2
    std = Standardizer.fit(X)
    Xs = std.apply(X)
    idx = {c: i for i, c in enumerate(classes)}
    T = np.zeros((len(y), len(classes)))
    T[np.arange(len(y)), [idx[v] for v in y]] = 1.0
    k = 1 if binary else len(classes)
    W = np.zeros((k, X.shape[1]))
    b = np.zeros(k)
    # Diagonal preconditioner from per-coordinate curvature bounds. Without it
    # a large lam forces a tiny common step and the intercepts barely move.
    DW = 1.0 / (0.25 * np.mean(Xs * Xs, axis=0) + lam + 1e-12)
    Db = 0.25
    loss, gW, gb = _logistic_objective(W, b, Xs, T, lam, binary)
    trace = [loss]
    step = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        if math.sqrt(float(np.sum(gW * gW) + np.sum(gb * gb))) < tol:
            it -= 1
            break
        dW, db = DW * gW, Db * gb
        decrease = float(np.sum(gW * dW) + np.sum(gb * db))
        step = min(step * 2.0, 1e6)
        while True:
            W_new, b_new = W - step * dW, b - step * db
            new_loss, ngW, ngb = _logistic_objective(W_new, b_new, Xs, T, lam, binary)
            if new_loss <= loss - 0.5 * step * decrease:
                break
            step *= 0.5
            if step < 1e-20:
                break
        if not new_loss <= loss:
            break
        W, b, loss, gW, gb = W_new, b_new, new_loss, ngW, ngb
        trace.append(loss)
    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
        raise NumericError("logistic regression diverged")
    return LogisticModel(classes, W, b, std, lam, it, trace)


def predict_logistic(model: LogisticModel, X) -> np.ndarray:
    """Class-probability rows ordered as ``model.classes``."""
    Xs = model.standardizer.apply(X)
    return _logits_to_proba(Xs @ model.W.T + model.b, model.binary)


def argmax_labels(P: np.ndarray, classes: Sequence[str]) -> list[str]:
    # classes are sorted, and argmax keeps the first maximum, so ties go to
    # the lexicographically smallest label
    return [classes[i] for i in np.argmax(P, axis=1)]


# ---------------------------------------------------------------- k-NN


@dataclass
class KnnModel:
    X: np.ndarray  # standardized training vectors
    labels: tuple[str, ...]
    classes: tuple[str, ...]
    k: int
    standardizer: Standardizer


def fit_knn(X, y, k: int = 5) -> KnnModel:
    X, y = _check_xy(X, y)
    if len(y) == 0:
        raise DataError("k-NN needs a non-empty training set")
    if k < 1 or k > len(y):
        raise ConfigError(f"k must lie in [1, {len(y)}], got {k}")
    std = Standardizer.fit(X)
    return KnnModel(std.apply(X), tuple(y), tuple(sorted(set(y))), k, std)


def knn_predict(model: KnnModel, X):
    """Majority vote of the ``k`` nearest; returns ``(labels, vote fractions per class)``."""
    Q = model.standardizer.apply(X)
    cls_idx = {c: i for i, c in enumerate(model.classes)}
    train_lab = np.array([cls_idx[v] for v in model.labels])
    fractions = np.zeros((Q.shape[0], len(model.classes)))
    for r, q in enumerate(Q):
        diff = model.X - q
        d2 = np.einsum("ij,ij->i", diff, diff)
        # stable sort: equal distances keep training order
        nearest = np.argsort(d2, kind="stable")[: model.k]
        votes = np.bincount(train_lab[nearest], minlength=len(model.classes))
        fractions[r] = votes / model.k
    return argmax_labels(fractions, model.classes), fractions


# ---------------------------------------------------------------- baselines


def flatten_mvts(instance) -> np.ndarray:
    """Row-major (time-major) flattening to length ``tau * N``."""
    values = instance.values if isinstance(instance, MvtsInstance) else np.asarray(instance, dtype=np.float64)
    return np.ascontiguousarray(values).reshape(-1).copy()


def last_timestamp(instance) -> np.ndarray:
    values = instance.values if isinstance(instance, MvtsInstance) else np.asarray(instance, dtype=np.float64)
    return values[-1].copy()


@dataclass
class SeqClassifier:
    cell_kind: str
    params: dict
    classes: tuple[str, ...]
    dropout: float
    seed: int
    training_log: list = field(default_factory=list)
    clip_events: list = field(default_factory=list)


def _seq_forward(model: SeqClassifier, X, mode, rng=None):
    h, cache = recurrent.cell_forward(model.cell_kind, model.params, X)
    mask = dropout_mask(model.dropout, h.shape, rng) if mode == "train" else np.ones(h.shape)
    Z = (h * mask) @ model.params["P"].T + model.params["c"]
    return _logits_to_proba(Z, False), (cache, h, mask)


def _seq_loss(P, targets, w):
    return float(-np.sum(w * np.log(np.maximum(P[np.arange(len(targets)), targets], 1e-300))))


def train_seq_classifier(data: LabeledDataset, cfg: TrainConfig) -> SeqClassifier:
    """Recurrent cell plus softmax head trained end to end by class-weighted cross-entropy."""
    cfg.validate()
    if len(data) == 0:
        raise DataError("training set is empty")
    classes = tuple(sorted(set(data.labels)))
    if len(classes) < 2:
        raise DataError("sequence classifier needs at least two classes")
    X = data.values_array()
    M, _, N = X.shape
    rng = _stream(cfg.seed, 0)
    params = recurrent.init_cell(cfg.cell_kind, N, cfg.hidden_dim, rng)
    bound = 1.0 / math.sqrt(cfg.hidden_dim)
    params["P"] = rng.uniform(-bound, bound, size=(len(classes), cfg.hidden_dim))
    params["c"] = np.zeros(len(classes))
    model = SeqClassifier(cfg.cell_kind, params, classes, cfg.dropout, cfg.seed)
    cw = class_weights(data.labels)
    idx = {c: i for i, c in enumerate(classes)}
    targets = np.array([idx[v] for v in data.labels])
    weights = np.array([cw[v] for v in data.labels])
    state = recurrent.AdamState.zeros_like(params)

    def full_loss():
        P, _ = _seq_forward(model, X, "eval")
        return _seq_loss(P, targets, weights)

    model.training_log.append(full_loss())
    for epoch in range(1, cfg.epochs + 1):
        order = _stream(cfg.seed, 1, epoch).permutation(M) if cfg.shuffle else np.arange(M)
        for bi, lo in enumerate(range(0, M, cfg.batch_size)):
            bidx = order[lo : lo + cfg.batch_size]
            try:
                P, (cache, h, mask) = _seq_forward(model, X[bidx], "train", _stream(cfg.seed, 2, epoch, bi))
            except NumericError as exc:
                raise TrainingError(f"epoch {epoch}, batch {bi}: {exc}") from exc
            t, w = targets[bidx], weights[bidx]
            if not math.isfinite(_seq_loss(P, t, w)):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi}")
            dZ = P.copy()
            dZ[np.arange(len(t)), t] -= 1.0
            dZ *= w[:, None]
            grads = {"P": dZ.T @ (h * mask), "c": dZ.sum(axis=0)}
            grads.update(recurrent.cell_backward(model.params, cache, (dZ @ model.params["P"]) * mask))
            grads, norm = recurrent.clip_by_global_norm(grads, cfg.clip_norm)
            if norm > cfg.clip_norm:
                model.clip_events.append({"epoch": epoch, "batch": bi, "norm": norm})
            model.params, state = recurrent.adam_step(model.params, grads, state, cfg.learning_rate, cfg.beta1,
                                                      cfg.beta2, cfg.eps)
        loss = full_loss()
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite loss after epoch {epoch}")
        model.training_log.append(loss)
    return model


def predict_seq(model: SeqClassifier, data_or_X) -> np.ndarray:
    X = data_or_X.values_array() if isinstance(data_or_X, LabeledDataset) else np.asarray(data_or_X, dtype=np.float64)
    P, _ = _seq_forward(model, X, "eval")
    return P


# ---------------------------------------------------------------- persistence


def head_to_json(model) -> dict:
    if isinstance(model, LogisticModel):
        return {
            "schema_version": HEAD_SCHEMA_VERSION,
            "kind": "lr",
            "classes": list(model.classes),
            "mode": "binary" if model.binary else "multinomial",
            "lam": model.lam,
            "n_iter": model.n_iter,
            "W": model.W,
            "b": model.b,
            "standardization": {"mean": model.standardizer.mean, "scale": model.standardizer.scale},
        }
    if isinstance(model, KnnModel):
        return {
            "schema_version": HEAD_SCHEMA_VERSION,
            "kind": "knn",
            "classes": list(model.classes),
            "k": model.k,
            "labels": list(model.labels),
            "X": model.X,
            "standardization": {"mean": model.standardizer.mean, "scale": model.standardizer.scale},
        }
    if isinstance(model, SeqClassifier):
        return {
            "schema_version": HEAD_SCHEMA_VERSION,
            "kind": "seq",
            "classes": list(model.classes),
            "cell_kind": model.cell_kind,
            "dropout": model.dropout,
            "seed": model.seed,
            "params": model.params,
            "training_log": model.training_log,
            "clip_events": model.clip_events,
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def head_from_json(doc: dict):
    if doc.get("schema_version") != HEAD_SCHEMA_VERSION:
        raise DataError(f"unsupported head schema_version {doc.get('schema_version')!r}")
    kind = doc.get("kind")
    arr = lambda v: np.array(v, dtype=np.float64)  # noqa: E731
    if kind in ("lr", "knn"):
        st = doc["standardization"]
        std = Standardizer(arr(st["mean"]), arr(st["scale"]))
    if kind == "lr":
        W = arr(doc["W"]).reshape(-1, std.mean.size)
        return LogisticModel(tuple(doc["classes"]), W, arr(doc["b"]), std, float(doc["lam"]), int(doc["n_iter"]))
    if kind == "knn":
        X = arr(doc["X"]).reshape(-1, std.mean.size)
        return KnnModel(X, tuple(doc["labels"]), tuple(doc["classes"]), int(doc["k"]), std)
    if kind == "seq":
        return SeqClassifier(doc["cell_kind"], {k: arr(v) for k, v in doc["params"].items()}, tuple(doc["classes"]),
                             float(doc["dropout"]), int(doc["seed"]), list(doc["training_log"]),
                             list(doc.get("clip_events") or []))
    raise DataError(f"unknown head kind {kind!r}")


def save_head(model, path) -> None:
    write_json(head_to_json(model), path)


def load_head(path):
    return head_from_json(read_json(path))


def predict_head(model, X) -> tuple[list[str], np.ndarray]:
    """Predicted labels and per-class score rows for an ``lr`` or ``knn`` head."""
    if isinstance(model, LogisticModel):
        P = predict_logistic(model, X)
        return argmax_labels(P, model.classes), P
    if isinstance(model, KnnModel):
        return knn_predict(model, X)
    raise TypeError(f"unsupported head {type(model).__name__}")


def fit_head(kind: str, X, y, k: int = 5, lam: float = 1e-3):
    if kind == "lr":
        return fit_logistic(X, y, lam=lam)
    if kind == "knn":
        return fit_knn(X, y, k=k)
    raise ConfigError(f"unknown head kind {kind!r}; expected 'lr' or 'knn'")

