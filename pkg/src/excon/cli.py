"""Command-line entry point: ``excon <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric or
training failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import embedder as emb
from . import heads, metrics
from .data import FeatureVector, LabelScheme, FLARE_SCHEME, filter_label_categories, preprocess_dataset
from .errors import ConfigError, DataError, ExconError, ParseError
from .extremes import ExtremeSet, derive_extremes
from .features import extract_dataset_features, feature_matrix, get_bank
from .ingest import SynthConfig, generate_synthetic, load_manifest_dataset, read_features_csv, save_manifest_dataset, write_features_csv
from .pipeline import BASELINES, PipelineConfig, evaluate, run_baseline, run_pipeline, write_predictions
from .projection import project_pca
from .serialize import fmt_float, read_json, write_json


def _categories(text: str | None):
    if text is None:
        return None
    return tuple(c.strip() for c in text.split(",") if c.strip())


def _scheme(args) -> LabelScheme:
    if getattr(args, "scheme", None):
        doc = read_json(args.scheme)
        return LabelScheme(doc["mapping"], doc.get("positive_class"))
    return FLARE_SCHEME


def _load(path, args, train_side: bool):
    data = load_manifest_dataset(path, _scheme(args))
    keep = _categories(getattr(args, "keep_categories", None))
    if train_side and keep is not None:
        data = filter_label_categories(data, keep)
    return preprocess_dataset(data, args.impute_k)


def _train_config(args) -> emb.TrainConfig:
    return emb.TrainConfig(
        epochs=args.epochs, learning_rate=args.lr, batch_size=args.batch_size, dropout=args.dropout,
        hidden_dim=args.hidden, cell_kind=args.cell, seed=args.seed,
    )


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------- commands


def cmd_synth(args):
    cfg = SynthConfig(
        n_instances=args.n, imbalance=args.imbalance, tau=args.tau, n_channels=args.channels, ar_neg=args.ar_neg,
        ar_pos=args.ar_pos, sin_amp_pos=args.sin_amp, sin_period_pos=args.sin_period, noise_std=args.noise_std,
        seed=args.seed,
    )
    path = save_manifest_dataset(generate_synthetic(cfg), args.out)
    print(path)


def cmd_extract(args):
    data = _load(args.data, args, train_side=args.train_side)
    write_features_csv(extract_dataset_features(data, get_bank(args.bank)), args.out)


def cmd_extremes(args):
    derive_extremes(read_features_csv(args.features)).save(args.out)


def cmd_train(args):
    data = _load(args.data, args, train_side=True)
    extremes = ExtremeSet.load(args.extremes)
    cfg = _train_config(args)
    model = emb.train_embedder(data, extremes, cfg, log=_say)
    emb.save_model(model, args.out, extremes, cfg)


def cmd_embed(args):
    model, _ = emb.load_model(args.model)
    data = _load(args.data, args, train_side=False)
    if args.id:
        keep = [inst for inst in data.instances if inst.id in set(args.id)]
        if not keep:
            raise DataError(f"no instance with id in {args.id}")
        data = data.with_instances(keep)
    rows = emb.embed_dataset(model, data)
    write_features_csv([FeatureVector(*r) for r in rows], args.out)


def cmd_fit_head(args):
    feats = read_features_csv(args.embeddings)
    if not feats:
        raise DataError(f"{args.embeddings}: no rows")
    head = heads.fit_head(args.head, feature_matrix(feats), [f.label for f in feats], k=args.k, lam=args.lam)
    heads.save_head(head, args.out)


def cmd_predict(args):
    head = heads.load_head(args.head)
    feats = read_features_csv(args.embeddings)
    if not feats:
        raise DataError(f"{args.embeddings}: no rows")
    preds, scores = heads.predict_head(head, feature_matrix(feats))
    write_predictions(args.out, [f.id for f in feats], [f.label for f in feats], preds, scores, head.classes)


def read_predictions(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:3] != ["id", "true_label", "pred_label"]:
            raise ParseError("header must start with id,true_label,pred_label", path, 1)
        classes = [h[len("score_"):] for h in header[3:]]
        truths, preds, scores = [], [], []
        for line, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(row)}", path, line)
            truths.append(row[1])
            preds.append(row[2])
            try:
                scores.append([float(v) for v in row[3:]])
            except ValueError as exc:
                raise ParseError(str(exc), path, line) from None
    return truths, preds, np.array(scores, dtype=np.float64).reshape(len(truths), len(classes)), classes


def cmd_eval(args):
    truths, preds, scores, classes = read_predictions(args.predictions)
    doc = evaluate(truths, preds, scores, classes, args.positive_class)
    if args.out:
        write_json(doc, args.out)
    rep = metrics.MetricReport(metrics.ConfusionCounts(**doc["counts"], positive_class=args.positive_class),
                               *(doc[c] for c in metrics.COLUMNS))
    sys.stdout.write(metrics.format_table({Path(args.predictions).stem: rep}))


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        out_dir=args.out, train_manifest=args.train, test_manifest=args.test, scheme=_scheme(args), bank=args.bank,
        train=_train_config(args), head=args.head, k=args.k, lam=args.lam, positive_class=args.positive_class,
        keep_categories=_categories(args.keep_categories), impute_k=args.impute_k, seed=args.seed,
    )


def _print_report(name, doc):
    rep = metrics.MetricReport(metrics.ConfusionCounts(**doc["counts"], positive_class=doc["positive_class"]),
                               *(doc[c] for c in metrics.COLUMNS))
    sys.stdout.write(metrics.format_table({name: rep}))


def cmd_pipeline(args):
    _print_report("excon", run_pipeline(_pipeline_config(args), log=_say))


def cmd_baseline(args):
    _print_report(args.kind, run_baseline(args.kind, _pipeline_config(args), n_kernels=args.kernels))


def cmd_project(args):
    feats = read_features_csv(args.features)
    pts = project_pca(feature_matrix(feats), args.dim)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["id", "label", *[f"pc{j + 1}" for j in range(args.dim)]]) + "\n")
        for f, row in zip(feats, pts):
            fh.write(",".join([f.id, f.label, *[fmt_float(v) for v in row]]) + "\n")


# ---------------------------------------------------------------- parser


def _add_common(p, *, train=False, head=False, data=True):
    p.add_argument("--seed", type=int, default=42)
    if data:
        p.add_argument("--impute-k", type=int, default=3, help="donor channels used for imputation")
        p.add_argument("--scheme", help="JSON label scheme {mapping, positive_class}; default flare classes")
        p.add_argument("--keep-categories", help="comma-separated categories kept on the training side")
        p.add_argument("--bank", default="c22")
    if train:
        p.add_argument("--cell", choices=("lstm", "gru", "rnn"), default="lstm")
        p.add_argument("--hidden", type=int, default=128)
        p.add_argument("--epochs", type=int, default=30)
        p.add_argument("--lr", type=float, default=1e-2)
        p.add_argument("--dropout", type=float, default=0.5)
        p.add_argument("--batch-size", type=int, default=64)
    if head:
        p.add_argument("--head", choices=("lr", "knn"), default="lr")
        p.add_argument("--k", type=int, default=5)
        p.add_argument("--lam", type=float, default=1e-3, help="L2 strength for the logistic head")
        p.add_argument("--positive-class", default="F")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="excon", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic imbalanced dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--imbalance", type=float, default=0.05)
    p.add_argument("--tau", type=int, default=64)
    p.add_argument("--channels", type=int, default=4)
    p.add_argument("--ar-neg", type=float, default=0.2)
    p.add_argument("--ar-pos", type=float, default=0.9)
    p.add_argument("--sin-amp", type=float, default=1.0)
    p.add_argument("--sin-period", type=float, default=20.0)
    p.add_argument("--noise-std", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="per-channel feature vectors for a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--train-side", action="store_true", help="apply --keep-categories")
    _add_common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("extremes", help="derive one extreme vector per class")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extremes)

    p = sub.add_parser("train", help="train the recurrent embedder")
    p.add_argument("--data", required=True)
    p.add_argument("--extremes", required=True)
    p.add_argument("--out", required=True)
    _add_common(p, train=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="embed instances with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--id", action="append", help="embed only this instance id (repeatable)")
    _add_common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("fit-head", help="fit a classifier on embeddings")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    _add_common(p, head=True, data=False)
    p.set_defaults(func=cmd_fit_head)

    p = sub.add_parser("predict", help="predict with a fitted head")
    p.add_argument("--head", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score a predictions file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--positive-class", default="F")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    p.add_argument("--train", help="training manifest (default: synthetic, seed 7)")
    p.add_argument("--test", help="test manifest (default: synthetic, seed 8)")
    p.add_argument("--out", required=True)
    _add_common(p, train=True, head=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("baseline", help="run a comparison baseline")
    p.add_argument("kind", choices=BASELINES)
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--out", required=True)
    p.add_argument("--kernels", type=int, default=1000, help="random kernels for rocket")
    _add_common(p, train=True, head=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("project", help="2-D PCA projection of a feature or embedding file")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=2)
    p.set_defaults(func=cmd_project)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ExconError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
