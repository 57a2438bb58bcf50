import json

import numpy as np
import pytest

from excon.cli import main, read_predictions

SMALL = ["--epochs", "2", "--hidden", "6", "--batch-size", "16", "--seed", "3"]


@pytest.fixture(scope="module")
def synth(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    for name, seed in (("train", 1), ("test", 2)):
        assert main(["synth", "--out", str(root / name), "--n", "40", "--imbalance", "0.25", "--tau", "24",
                     "--channels", "2", "--seed", str(seed)]) == 0
    return root


@pytest.fixture(scope="module")
def pipeline_run(synth, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["pipeline", "--train", str(synth / "train" / "manifest.json"), "--test",
                 str(synth / "test" / "manifest.json"), "--out", str(out), *SMALL])
    assert code == 0
    return out


def test_pipeline_writes_every_artifact(pipeline_run):
    for name in ("features_train.csv", "extremes.json", "model.json", "embeddings_train.csv", "embeddings_test.csv",
                 "head.json", "predictions.csv", "report.json", "report.txt", "run_manifest.json"):
        assert (pipeline_run / name).exists(), name
    manifest = json.loads((pipeline_run / "run_manifest.json").read_text())
    assert manifest["status"] == "complete"
    report = json.loads((pipeline_run / "report.json").read_text())
    assert report["n"] == 40 and set(report["counts"]) == {"tp", "fp", "fn", "tn"}


def test_staged_commands_reproduce_the_pipeline(synth, pipeline_run, tmp_path):
    train = str(synth / "train" / "manifest.json")
    test = str(synth / "test" / "manifest.json")
    t = tmp_path
    steps = [
        ["extract", "--data", train, "--out", str(t / "f.csv"), "--train-side"],
        ["extremes", "--features", str(t / "f.csv"), "--out", str(t / "e.json")],
        ["train", "--data", train, "--extremes", str(t / "e.json"), "--out", str(t / "m.json"), *SMALL],
        ["embed", "--model", str(t / "m.json"), "--data", train, "--out", str(t / "etr.csv")],
        ["embed", "--model", str(t / "m.json"), "--data", test, "--out", str(t / "ete.csv")],
        ["fit-head", "--embeddings", str(t / "etr.csv"), "--out", str(t / "h.json")],
        ["predict", "--head", str(t / "h.json"), "--embeddings", str(t / "ete.csv"), "--out", str(t / "p.csv")],
        ["eval", "--predictions", str(t / "p.csv"), "--out", str(t / "r.json")],
    ]
    for argv in steps:
        assert main(argv) == 0, argv
    assert (t / "f.csv").read_bytes() == (pipeline_run / "features_train.csv").read_bytes()
    assert (t / "e.json").read_bytes() == (pipeline_run / "extremes.json").read_bytes()
    assert (t / "m.json").read_bytes() == (pipeline_run / "model.json").read_bytes()
    assert (t / "p.csv").read_bytes() == (pipeline_run / "predictions.csv").read_bytes()
    staged = json.loads((t / "r.json").read_text())
    full = json.loads((pipeline_run / "report.json").read_text())
    assert staged == {k: full[k] for k in staged}


def test_embed_single_instance(synth, pipeline_run, tmp_path):
    test = str(synth / "test" / "manifest.json")
    first = json.loads((synth / "test" / "manifest.json").read_text())["entries"][0]["id"]
    assert main(["embed", "--model", str(pipeline_run / "model.json"), "--data", test, "--id", first,
                 "--out", str(tmp_path / "one.csv")]) == 0
    rows = (tmp_path / "one.csv").read_text().splitlines()
    assert len(rows) == 2 and rows[1].startswith(first + ",")
    full = {r.split(",")[0]: r for r in (pipeline_run / "embeddings_test.csv").read_text().splitlines()}
    single = np.array(rows[1].split(",")[2:], dtype=float)
    batched = np.array(full[first].split(",")[2:], dtype=float)
    # a batch of one takes a different BLAS path, so allow last-place rounding
    np.testing.assert_allclose(single, batched, rtol=1e-12, atol=1e-14)


def test_predictions_file_reads_back(pipeline_run):
    truths, preds, scores, classes = read_predictions(pipeline_run / "predictions.csv")
    assert len(truths) == len(preds) == scores.shape[0] == 40
    assert classes == ["F", "NF"]


def test_project(pipeline_run, tmp_path):
    assert main(["project", "--features", str(pipeline_run / "embeddings_test.csv"), "--out",
                 str(tmp_path / "p.csv")]) == 0
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "id,label,pc1,pc2" and len(lines) == 41


@pytest.mark.parametrize("kind", ["mvts2v", "lpvv", "rocket"])
def test_baselines_run(synth, tmp_path, kind):
    code = main(["baseline", kind, "--train", str(synth / "train" / "manifest.json"), "--test",
                 str(synth / "test" / "manifest.json"), "--out", str(tmp_path), "--kernels", "20"])
    assert code == 0
    assert json.loads((tmp_path / "report.json").read_text())["n"] == 40


def test_exit_codes(synth, tmp_path, capsys):
    train = str(synth / "train" / "manifest.json")
    assert main(["pipeline", "--train", train, "--test", train, "--out", str(tmp_path), "--epochs", "0"]) == 2
    assert main(["extremes", "--features", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "e.json")]) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("id,label,f0\na,F,xyz\n")
    assert main(["extremes", "--features", str(bad), "--out", str(tmp_path / "e.json")]) == 3
    with pytest.raises(SystemExit) as exc:
        main(["train", "--cell", "cnn"])
    assert exc.value.code == 2
    assert "error:" in capsys.readouterr().err


def test_failed_stage_is_flagged_in_run_manifest(synth, tmp_path):
    assert main(["synth", "--out", str(tmp_path / "short"), "--n", "40", "--imbalance", "0.25", "--tau", "12",
                 "--channels", "2", "--seed", "4"]) == 0
    out = tmp_path / "run"
    code = main(["pipeline", "--train", str(synth / "train" / "manifest.json"), "--test",
                 str(tmp_path / "short" / "manifest.json"), "--out", str(out), *SMALL])
    assert code == 3
    doc = json.loads((out / "run_manifest.json").read_text())
    assert doc["status"].startswith("failed")
    assert doc["stages"][-1]["status"] == "failed" and doc["stages"][-1]["error"]
