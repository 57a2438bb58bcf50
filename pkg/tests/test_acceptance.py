"""Acceptance criteria A1 to A9 at their stated tolerances.

Run ``pytest tests/test_acceptance.py`` (or this file directly); one PASS or
FAIL line per criterion is printed at the end of the session.
"""

import math
import sys
import time

import numpy as np
import pytest

from excon.cli import read_predictions
from excon.data import FeatureVector, MvtsInstance
from excon.embedder import (
    class_weights,
    extreme_reconstruction_loss,
    init_model,
    load_model,
    model_backward,
    model_forward,
)
from excon.errors import ShapeMismatchError
from excon.extremes import Extreme, ExtremeSet, derive_extremes
from excon.features import CATCH22, extract_channel_features, extract_instance_features
from excon.heads import flatten_mvts, last_timestamp
from excon.ingest import read_features_csv
from excon.metrics import ConfusionCounts, confusion, roc_auc, skill_scores
from excon.pipeline import PipelineConfig, run_baseline, run_pipeline
from excon.rocket import RocketTransform, rocket_transform

ARTIFACTS = ("features_train.csv", "extremes.json", "model.json", "embeddings_train.csv", "embeddings_test.csv",
             "head.json", "predictions.csv", "report.json", "report.txt")


@pytest.fixture(scope="module")
def default_runs(tmp_path_factory):
    """The default synthetic pipeline, run twice into separate directories."""
    runs = []
    for name in ("first", "second"):
        out = tmp_path_factory.mktemp(name)
        t0 = time.perf_counter()
        report = run_pipeline(PipelineConfig(out_dir=str(out)))
        runs.append((out, report, time.perf_counter() - t0))
    return runs


def _sq(a, b):
    d = np.asarray(a) - np.asarray(b)
    return float(d @ d)


# ---------------------------------------------------------------- A1


@pytest.mark.slow
@pytest.mark.criterion("A1")
def test_a1_end_to_end_separation(default_runs, note):
    out, report, seconds = default_runs[0]
    truths, _, _, _ = read_predictions(out / "predictions.csv")
    majority = skill_scores(confusion(truths, ["NF"] * len(truths), "F"))
    note(f"TSS {report['tss']:.4f} (>= 0.9)")
    note(f"AUC {report['roc_auc']:.4f} (>= 0.95)")
    note(f"majority TSS {majority.tss}")
    note(f"{seconds:.1f} s")
    assert report["n"] == 400
    assert majority.tss == 0.0
    assert report["tss"] >= 0.9
    assert report["roc_auc"] >= 0.95
    assert seconds <= 300


# ---------------------------------------------------------------- A2


def _numeric_grad(f, arr, h=1e-5):
    g = np.zeros_like(arr)
    for i in np.ndindex(arr.shape):
        old = arr[i]
        arr[i] = old + h
        up = f()
        arr[i] = old - h
        down = f()
        arr[i] = old
        g[i] = (up - down) / (2 * h)
    return g


@pytest.mark.criterion("A2")
@pytest.mark.parametrize("kind", ["lstm", "gru", "rnn"])
def test_a2_gradients_match_finite_differences(kind, note):
    rng = np.random.default_rng({"lstm": 0, "gru": 1, "rnn": 2}[kind])
    worst = 0.0
    for _ in range(20):
        n, hdim, tau, d = (int(rng.integers(1, 5)), int(rng.integers(1, 7)), int(rng.integers(1, 7)),
                           int(rng.integers(1, 9)))
        batch = int(rng.integers(2, 5))
        model = init_model(kind, n, hdim, d, 0.0, 0)
        for k in model.params:
            model.params[k] = rng.standard_normal(model.params[k].shape)
        X = rng.normal(size=(batch, tau, n))
        labels = ["A"] + ["B"] + [str(rng.choice(["A", "B"])) for _ in range(batch - 2)]
        ex = ExtremeSet({c: Extreme(c, 1.0, rng.normal(size=d)) for c in "AB"})
        w = class_weights(labels)

        def loss():
            return extreme_reconstruction_loss(model_forward(model, X)[0], labels, ex, w)

        e, cache = model_forward(model, X)
        _, grads = model_backward(model, labels, ex, e, cache, w)
        for key, g in grads.items():
            num = _numeric_grad(loss, model.params[key])
            rel = np.abs(g - num) / np.maximum(np.maximum(np.abs(g), np.abs(num)), 1e-8)
            worst = max(worst, float(rel.max()))
    note(f"{kind} worst rel err {worst:.1e}")
    assert worst < 1e-4


# ---------------------------------------------------------------- A3


def _brute_extremes(feats):
    out = {}
    for c in sorted({f.label for f in feats}):
        best = None
        for v in feats:
            if v.label != c:
                continue
            far = max(math.sqrt(sum((a - b) ** 2 for a, b in zip(v.values, w.values))) for w in feats if w.label != c)
            if best is None or far > best[1]:
                best = (v.id, far)
        out[c] = best
    return out


@pytest.mark.criterion("A3")
def test_a3_extremes_equal_brute_force(note):
    rng = np.random.default_rng(2024)
    for trial in range(100):
        m, k, d = int(rng.integers(2, 201)), int(rng.integers(2, 6)), int(rng.integers(1, 17))
        labels = [f"c{v}" for v in rng.integers(0, k, size=m)]
        labels[:2] = ["c0", "c1"]
        X = rng.normal(size=(m, d)) if trial % 2 else rng.integers(-2, 3, size=(m, d)).astype(float)
        feats = [FeatureVector(f"v{i}", lab, X[i]) for i, lab in enumerate(labels)]
        got = {c: (e.id, e.distance) for c, e in derive_extremes(feats).items()}
        assert got == _brute_extremes(feats), trial
    note("100/100 datasets exact")


# ---------------------------------------------------------------- A4


@pytest.mark.criterion("A4")
def test_a4_loss_identity(note):
    ex = ExtremeSet({"1": Extreme("a", 1.0, np.array([0.0, 0.0])), "2": Extreme("b", 1.0, np.array([2.0, 2.0]))})
    E = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]])
    labels = ["1", "1", "2"]
    value = extreme_reconstruction_loss(E, labels, ex)
    note(f"two-class fixture {value!r}")
    assert value == 1.0
    assert extreme_reconstruction_loss(ex.matrix(labels), labels, ex) == 0.0
    moved = E.copy()
    moved[2, 0] += 1e-3
    assert extreme_reconstruction_loss(moved, labels, ex) > 0.0
    # duplicating one class leaves its term unchanged
    dup = np.vstack([E, E[:2]])
    assert extreme_reconstruction_loss(dup, labels + ["1", "1"], ex) == value
    with pytest.raises(ShapeMismatchError):
        extreme_reconstruction_loss(E[:2], labels, ex)


# ---------------------------------------------------------------- A5


@pytest.mark.criterion("A5")
def test_a5_metric_fixtures(note):
    r = skill_scores(ConfusionCounts(tp=3, fp=10, fn=2, tn=85))
    note(f"TSS {r.tss:.6f} HSS2 {r.hss2:.6f} F1 {r.f1:.6f} GS {r.gs:.6f}")
    assert abs(r.tss - 0.494737) < 1e-6
    assert abs(r.hss2 - 0.281437) < 1e-6
    assert abs(r.f1 - 0.333333) < 1e-6
    assert abs(r.gs - 0.163763) < 1e-6
    assert roc_auc([0.9, 0.4, 0.5, 0.1, 0.2], [True, True, False, False, False]) == 5 / 6
    rng = np.random.default_rng(5)
    for _ in range(1000):
        n = int(rng.integers(2, 60))
        truths = rng.random(n) < 0.4
        truths[0], truths[1] = True, False
        scores = np.round(rng.random(n), int(rng.integers(1, 4)))
        auc = roc_auc(scores, truths)
        assert abs(auc + roc_auc(scores, ~truths) - 1.0) < 1e-12
        assert abs(roc_auc(np.exp(3 * scores) - 7, truths) - auc) < 1e-12
    note("1000 random score sets")


# ---------------------------------------------------------------- A6


@pytest.mark.slow
@pytest.mark.criterion("A6")
def test_a6_training_behaviour(default_runs, note):
    out = default_runs[0][0]
    model, extremes = load_model(out / "model.json")
    log = model.training_log
    note(f"loss {log[0]:.1f} -> {log[30]:.1f}")
    assert len(log) == 31 and log[30] < log[0]
    rows = read_features_csv(out / "embeddings_train.csv")
    for c in extremes:
        members = [r.values for r in rows if r.label == c]
        own = np.mean([math.sqrt(_sq(v, extremes[c].vector)) for v in members])
        other = np.mean([math.sqrt(_sq(v, extremes[o].vector)) for v in members for o in extremes if o != c])
        note(f"{c} own {own:.2f} < other {other:.2f}")
        assert own < other


# ---------------------------------------------------------------- A7


@pytest.mark.slow
@pytest.mark.criterion("A7")
def test_a7_rerun_is_byte_identical(default_runs, note):
    (a, _, _), (b, _, _) = default_runs
    for name in ARTIFACTS:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    note(f"{len(ARTIFACTS)} artifacts identical")


# ---------------------------------------------------------------- A8


def _ar1(n, phi, rng):
    y = np.zeros(n)
    e = rng.standard_normal(n)
    y[0] = e[0]
    for t in range(1, n):
        y[t] = phi * y[t - 1] + e[t]
    return y


def _first_efold_crossing(y):
    n = len(y)
    x = [v - sum(y) / n for v in y]
    den = sum(v * v for v in x)
    ac = [sum(x[t] * x[t + k] for t in range(n - k)) / den for k in range(n)]
    th = 1 / math.e
    for i in range(n - 2):
        if ac[i + 1] < th:
            return i + (th - ac[i]) / (ac[i + 1] - ac[i])
    return float(n)


@pytest.mark.criterion("A8")
def test_a8_feature_bank_sanity(note):
    assert np.array_equal(extract_channel_features(np.full(64, -2.5)), np.zeros(22))
    rng = np.random.default_rng(8)
    X = rng.normal(size=(64, 4)).cumsum(axis=0)
    vec = extract_instance_features(MvtsInstance("x", X, "NF")).values
    for n in range(4):
        per = extract_channel_features(X[:, n])
        for j in range(22):
            assert vec[22 * n + j] == per[j]
    j = CATCH22.feature_names.index("CO_f1ecac")
    worst = 0.0
    for _ in range(50):
        y = _ar1(100, 0.7, rng)
        z = (y - y.mean()) / y.std(ddof=1)
        worst = max(worst, abs(extract_channel_features(y)[j] - _first_efold_crossing(list(z))))
    note(f"ACF timescale worst diff {worst:.1e}")
    assert worst < 1e-9


# ---------------------------------------------------------------- A9


@pytest.mark.criterion("A9")
def test_a9_plumbing_fixtures(note):
    inst = MvtsInstance("x", np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]), "F")
    assert flatten_mvts(inst).tolist() == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    assert last_timestamp(inst).tolist() == [4.0, 5.0, 6.0]
    assert np.array_equal(flatten_mvts(inst).reshape(2, 3), inst.values)

    def one_kernel(w, bias, tau):
        return RocketTransform(np.array(w, dtype=float), np.array([len(w)]), np.array([bias]), np.array([1]),
                               np.array([0]), np.array([0]), tau, 1, 0)

    feats, _ = rocket_transform(one_kernel([1.0], 0.0, 3), np.array([[-1.0], [2.0], [0.5]]))
    assert feats.tolist() == [2 / 3, 2.0]
    feats, _ = rocket_transform(one_kernel([0.0] * 9, -1.0, 20), np.random.default_rng(0).normal(size=(20, 1)))
    assert feats.tolist() == [0.0, -1.0]
    note("flatten/last/ROCKET fixtures exact")


@pytest.mark.slow
@pytest.mark.criterion("A9")
def test_a9_sequence_baseline_beats_majority(tmp_path, note):
    doc = run_baseline("seq", PipelineConfig(out_dir=str(tmp_path)))
    truths, _, _, _ = read_predictions(tmp_path / "predictions.csv")
    majority = max(truths.count(c) for c in set(truths)) / len(truths)
    note(f"SEQ accuracy {doc['accuracy']:.4f} > majority {majority:.4f}")
    assert doc["accuracy"] > majority


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
