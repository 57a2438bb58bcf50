"""End-to-end run: preprocess, features, extremes, embedder, head, evaluation.

Every artifact is written with fixed float formatting and no timestamps, so a
rerun with the same inputs and seed reproduces each file byte for byte.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import embedder as emb
from . import heads, metrics
from .data import FLARE_SCHEME, FeatureVector, LabeledDataset, LabelScheme, filter_label_categories, preprocess_dataset
from .errors import ConfigError, ExconError, ShapeMismatchError
from .extremes import derive_extremes
from .features import extract_dataset_features, get_bank
from .ingest import SynthConfig, generate_synthetic, load_manifest_dataset, write_features_csv
from .serialize import fmt_float, write_json

RUN_MANIFEST = "run_manifest.json"


@dataclass(frozen=True)
class PipelineConfig:
    out_dir: str
    train_manifest: str | None = None
    test_manifest: str | None = None
    train_synth: SynthConfig = field(default_factory=lambda: SynthConfig(n_instances=400, seed=7))
    test_synth: SynthConfig = field(default_factory=lambda: SynthConfig(n_instances=400, seed=8))
    scheme: LabelScheme = FLARE_SCHEME
    bank: str = "c22"
    train: emb.TrainConfig = field(default_factory=emb.TrainConfig)
    head: str = "lr"
    k: int = 5
    lam: float = 1e-3
    positive_class: str = "F"
    keep_categories: tuple[str, ...] | None = None
    impute_k: int = 3
    seed: int = 42

    def validate(self) -> None:
        if self.head not in ("lr", "knn"):
            raise ConfigError(f"unknown head {self.head!r}")
        get_bank(self.bank)
        self.train.validate()
        for path in (self.train_manifest, self.test_manifest):
            if path is not None and not Path(path).exists():
                raise ConfigError(f"manifest {path} does not exist")


class StageError(ExconError):
    def __init__(self, stage: str, cause: ExconError):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = cause.exit_code


def load_inputs(cfg: PipelineConfig) -> tuple[LabeledDataset, LabeledDataset]:
    if cfg.train_manifest:
        train = load_manifest_dataset(cfg.train_manifest, cfg.scheme)
    else:
        train = generate_synthetic(cfg.train_synth)
    if cfg.test_manifest:
        test = load_manifest_dataset(cfg.test_manifest, cfg.scheme)
    else:
        test = generate_synthetic(cfg.test_synth)
    if train.shape != test.shape:
        raise ShapeMismatchError(f"train instances are {train.shape} (tau, N) but test instances are {test.shape}")
    return train, test


def write_predictions(path, ids, truths, preds, scores: np.ndarray, classes) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["id", "true_label", "pred_label", *[f"score_{c}" for c in classes]]) + "\n")
        for i, t, p, row in zip(ids, truths, preds, scores):
            fh.write(",".join([i, t, p, *[fmt_float(v) for v in row]]) + "\n")


def evaluate(truths, preds, scores: np.ndarray, classes, positive_class: str) -> dict:
    """Binary report for ``positive_class`` plus macro one-vs-rest over ``classes``."""
    classes = list(classes)
    if positive_class in classes:
        pos_scores = scores[:, classes.index(positive_class)]
    else:
        pos_scores = np.zeros(len(truths))
    report = metrics.evaluate_binary(truths, preds, pos_scores, positive_class)
    doc = report.to_json()
    if len(classes) > 2:
        doc["macro_one_vs_rest"] = metrics.macro_one_vs_rest(truths, preds, scores, classes).to_json()
    return doc


class _Run:
    """Stage bookkeeping for the run manifest."""

    def __init__(self, out: Path, cfg_doc: dict):
        self.out = out
        self.doc = {"config": cfg_doc, "stages": [], "status": "running"}

    def flush(self):
        write_json(self.doc, self.out / RUN_MANIFEST)

    def stage(self, name, fn, *args):
        self.doc["stages"].append({"name": name, "status": "running"})
        self.flush()
        try:
            result = fn(*args)
        except ExconError as exc:
            self.doc["stages"][-1]["status"] = "failed"
            self.doc["stages"][-1]["error"] = str(exc)
            self.doc["status"] = "failed; artifacts partial"
            self.flush()
            raise StageError(name, exc) from exc
        self.doc["stages"][-1]["status"] = "done"
        return result


def _cfg_doc(cfg: PipelineConfig) -> dict:
    d = asdict(cfg)
    d["scheme"] = {"mapping": dict(cfg.scheme.mapping), "positive_class": cfg.scheme.positive_class}
    d["keep_categories"] = list(cfg.keep_categories) if cfg.keep_categories is not None else None
    d.pop("out_dir")
    return d


def run_pipeline(cfg: PipelineConfig, log: Callable[[str], None] | None = None) -> dict:
    """Run every stage and write artifacts under ``cfg.out_dir``; returns the report document."""
    cfg.validate()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run = _Run(out, _cfg_doc(cfg))
    bank = get_bank(cfg.bank)
    say = log or (lambda msg: None)

    train, test = run.stage("load", load_inputs, cfg)

    def preprocess():
        tr = train
        if cfg.keep_categories is not None:
            tr = filter_label_categories(tr, cfg.keep_categories)
        return preprocess_dataset(tr, cfg.impute_k), preprocess_dataset(test, cfg.impute_k)

    train_p, test_p = run.stage("preprocess", preprocess)
    say(f"train {len(train_p)} instances {train_p.class_counts()}, test {len(test_p)}")

    def features():
        f = extract_dataset_features(train_p, bank)
        write_features_csv(f, out / "features_train.csv")
        return f

    feats = run.stage("extract", features)

    def extremes():
        ex = derive_extremes(feats)
        ex.save(out / "extremes.json")
        return ex

    ex = run.stage("extremes", extremes)

    def train_model():
        model = emb.train_embedder(train_p, ex, cfg.train, log=say)
        emb.save_model(model, out / "model.json", ex, cfg.train)
        return model

    model = run.stage("train", train_model)

    def embed():
        e_tr = emb.embed_dataset(model, train_p)
        e_te = emb.embed_dataset(model, test_p)
        write_features_csv([FeatureVector(*t) for t in e_tr], out / "embeddings_train.csv")
        write_features_csv([FeatureVector(*t) for t in e_te], out / "embeddings_test.csv")
        return e_tr, e_te

    e_tr, e_te = run.stage("embed", embed)

    def fit():
        X = np.stack([v for _, _, v in e_tr])
        head = heads.fit_head(cfg.head, X, [lab for _, lab, _ in e_tr], k=cfg.k, lam=cfg.lam)
        heads.save_head(head, out / "head.json")
        return head

    head = run.stage("fit-head", fit)

    def predict():
        X = np.stack([v for _, _, v in e_te])
        preds, scores = heads.predict_head(head, X)
        write_predictions(out / "predictions.csv", [i for i, _, _ in e_te], [lab for _, lab, _ in e_te], preds, scores,
                          head.classes)
        return preds, scores

    preds, scores = run.stage("predict", predict)

    def report():
        doc = evaluate(test_p.labels, preds, scores, head.classes, cfg.positive_class)
        doc["features_from_normalized_channels"] = True
        doc["training_log"] = list(model.training_log)
        write_json(doc, out / "report.json")
        rep = metrics.MetricReport(metrics.ConfusionCounts(**doc["counts"], positive_class=cfg.positive_class),
                                   *(doc[c] for c in metrics.COLUMNS))
        (out / "report.txt").write_text(metrics.format_table({"excon": rep}), encoding="utf-8")
        return doc

    doc = run.stage("eval", report)
    run.doc["status"] = "complete"
    run.flush()
    return doc



BASELINES = ("mvts2v", "lpvv", "seq", "rocket")


def run_baseline(kind: str, cfg: PipelineConfig, n_kernels: int = 1000) -> dict:
    """Evaluate one comparison representation under the same preprocessing and metrics.

    ``mvts2v`` and ``lpvv`` feed flattened / last-row vectors to the logistic
    head, ``rocket`` feeds random-kernel features to it, and ``seq`` is the
    end-to-end recurrent classifier.
    """
    from . import rocket

    if kind not in BASELINES:
        raise ConfigError(f"unknown baseline {kind!r}; expected one of {list(BASELINES)}")
    cfg.validate()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train, test = load_inputs(cfg)
    if cfg.keep_categories is not None:
        train = filter_label_categories(train, cfg.keep_categories)
    train, test = preprocess_dataset(train, cfg.impute_k), preprocess_dataset(test, cfg.impute_k)
    extra = {}
    if kind == "seq":
        model = heads.train_seq_classifier(train, cfg.train)
        heads.save_head(model, out / "head.json")
        scores = heads.predict_seq(model, test)
        classes = model.classes
        preds = heads.argmax_labels(scores, classes)
    else:
        if kind == "mvts2v":
            rep = lambda d: np.stack([heads.flatten_mvts(i) for i in d.instances])  # noqa: E731
        elif kind == "lpvv":
            rep = lambda d: np.stack([heads.last_timestamp(i) for i in d.instances])  # noqa: E731
        else:
            tau, n = train.shape
            transform = rocket.generate_kernels(tau, n, n_kernels, cfg.seed)
            write_json(transform.to_json(), out / "rocket_kernels.json")

            def rep(d):
                feats, skipped = rocket.rocket_transform(transform, d.values_array())
                extra["skipped_kernels"] = skipped
                return feats

        head = heads.fit_head(cfg.head, rep(train), train.labels, k=cfg.k, lam=cfg.lam)
        heads.save_head(head, out / "head.json")
        preds, scores = heads.predict_head(head, rep(test))
        classes = head.classes
    write_predictions(out / "predictions.csv", test.ids, test.labels, preds, scores, classes)
    doc = evaluate(test.labels, preds, scores, classes, cfg.positive_class)
    doc["baseline"] = kind
    doc.update(extra)
    write_json(doc, out / "report.json")
    return doc
