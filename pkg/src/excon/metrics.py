"""Confusion-based skill scores and rank-based ROC AUC.

Undefined values (zero denominators, a missing class for AUC) are ``None``,
never NaN, and render as ``null`` in JSON.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, ShapeMismatchError
from .serialize import write_json

COLUMNS = ("accuracy", "tss", "hss2", "f1", "gs", "roc_auc")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int
    positive_class: str | None = None

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricReport:
    counts: ConfusionCounts
    accuracy: float | None
    tss: float | None
    hss2: float | None
    f1: float | None
    gs: float | None
    roc_auc: float | None = None

    @property
    def n(self) -> int:
        return self.counts.total

    def with_auc(self, auc: float | None) -> "MetricReport":
        return MetricReport(self.counts, self.accuracy, self.tss, self.hss2, self.f1, self.gs, auc)

    def to_json(self) -> dict:
        c = self.counts
        return {
            "counts": {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn},
            **{k: getattr(self, k) for k in COLUMNS},
            "n": self.n,
            "positive_class": c.positive_class,
        }


def confusion(true_labels: Sequence[str], pred_labels: Sequence[str], positive_class: str) -> ConfusionCounts:
    if len(true_labels) != len(pred_labels):
        raise ShapeMismatchError(f"{len(true_labels)} truths vs {len(pred_labels)} predictions")
    if not true_labels:
        raise DataError("cannot score an empty evaluation set")
    tp = fp = fn = tn = 0
    for t, p in zip(true_labels, pred_labels):
        if t == positive_class:
            if p == positive_class:
                tp += 1
            else:
                fn += 1
        elif p == positive_class:
            fp += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn, positive_class)


def _ratio(num, den):
    return None if den == 0 else num / den


def skill_scores(c: ConfusionCounts) -> MetricReport:
    tp, fp, fn, tn, n = c.tp, c.fp, c.fn, c.tn, c.total
    if n < 1:
        raise DataError("confusion counts are empty")
    tpr = _ratio(tp, tp + fn)
    fpr = _ratio(fp, fp + tn)
    tss = None if tpr is None or fpr is None else tpr - fpr
    hss2 = _ratio(2.0 * (tp * tn - fp * fn), (tp + fn) * (fn + tn) + (tp + fp) * (fp + tn))
    f1 = _ratio(2.0 * tp, 2 * tp + fp + fn)
    ch = (tp + fp) * (tp + fn) / n
    gs = _ratio(tp - ch, tp + fp + fn - ch)
    return MetricReport(c, (tp + tn) / n, tss, hss2, f1, gs)


def roc_auc(scores: Sequence[float], truths: Sequence[bool]) -> float | None:
    """Mann-Whitney AUC with average ranks for ties; ``None`` if a class is absent."""
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(truths, dtype=bool)
    if s.shape != t.shape:
        raise ShapeMismatchError(f"{s.size} scores vs {t.size} truths")
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(s, kind="stable")
    ranks = np.empty(s.size)
    sorted_s = s[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return float((ranks[t].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def evaluate_binary(true_labels, pred_labels, pos_scores, positive_class: str) -> MetricReport:
    rep = skill_scores(confusion(true_labels, pred_labels, positive_class))
    return rep.with_auc(roc_auc(pos_scores, [t == positive_class for t in true_labels]))


@dataclass(frozen=True)
class MacroReport:
    per_class: Mapping[str, MetricReport]
    macro: Mapping[str, float | None]
    skipped: Mapping[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "per_class": {c: r.to_json() for c, r in self.per_class.items()},
            "macro": dict(self.macro),
            "skipped_undefined": dict(self.skipped),
        }


def macro_one_vs_rest(true_labels: Sequence[str], pred_labels: Sequence[str], scores: np.ndarray,
                      classes: Sequence[str]) -> MacroReport:
    """Each class in turn is positive; macro values average the defined entries.

    ``scores`` has one column per entry of ``classes``.
    """
    classes = list(classes)
    if len(classes) < 2:
        raise DataError("one-vs-rest evaluation needs at least two classes")
    S = np.asarray(scores, dtype=np.float64)
    if S.shape != (len(true_labels), len(classes)):
        raise ShapeMismatchError(f"scores shape {S.shape} does not match ({len(true_labels)}, {len(classes)})")
    per = {c: evaluate_binary(true_labels, pred_labels, S[:, j], c) for j, c in enumerate(classes)}
    macro, skipped = {}, {}
    for col in COLUMNS:
        vals = [getattr(r, col) for r in per.values()]
        defined = [v for v in vals if v is not None]
        macro[col] = sum(defined) / len(defined) if defined else None
        skipped[col] = len(vals) - len(defined)
    return MacroReport(per, macro, skipped)


def aggregate(reports: Sequence[MetricReport]) -> dict:
    """Mean, population std and sample std per column over several runs."""
    out = {}
    for col in COLUMNS:
        vals = [getattr(r, col) for r in reports if getattr(r, col) is not None]
        if not vals:
            out[col] = {"mean": None, "std_population": None, "std_sample": None, "n": 0}
            continue
        mean = sum(vals) / len(vals)
        ss = sum((v - mean) ** 2 for v in vals)
        out[col] = {
            "mean": mean,
            "std_population": math.sqrt(ss / len(vals)),
            "std_sample": math.sqrt(ss / (len(vals) - 1)) if len(vals) > 1 else None,
            "n": len(vals),
        }
    return out


def _cell(v) -> str:
    return "undef" if v is None else f"{v:.4f}"


def format_table(rows: Mapping[str, MetricReport]) -> str:
    """Aligned plain-text table, one row per named run."""
    header = ["run", "Accuracy", "TSS", "HSS2", "F1", "GS", "ROC AUC"]
    body = [[name] + [_cell(getattr(r, c)) for c in COLUMNS] for name, r in rows.items()]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(row, widths)))
             for row in [header] + body]
    return "\n".join(lines) + "\n"


def summary_csv_row(name: str, r: MetricReport) -> str:
    return ",".join([name] + ["" if getattr(r, c) is None else format(getattr(r, c), ".17g") for c in COLUMNS]) + "\n"


def save_report(report: MetricReport, path) -> None:
    write_json(report.to_json(), path)
