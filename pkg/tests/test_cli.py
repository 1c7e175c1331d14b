import csv
import json

import numpy as np
import pytest

from csure import cli


def run(tmp_path, *argv):
    return cli.main(["--outdir", str(tmp_path), *argv])


@pytest.fixture(scope="module")
def data_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert cli.main(["--outdir", str(d), "gen-data", "--classes", "3", "--per-class", "12",
                     "--snr", "6,12", "--length", "40", "--seed", "2"]) == 0
    return d / "data.csv"


def test_gen_data_minimal(tmp_path):
    assert run(tmp_path, "gen-data", "--classes", "2", "--per-class", "1", "--snr", "10") == 0
    lines = (tmp_path / "data.csv").read_text().splitlines()
    assert len(lines) == 3
    doc = json.loads((tmp_path / "run.json").read_text())
    assert doc["command"] == "gen-data" and doc["settings"]["per_class"] == 1


def test_gen_data_deterministic_and_counts(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(d, "gen-data", "--classes", "4", "--per-class", "5", "--seed", "9") == 0
    assert (a / "data.csv").read_bytes() == (b / "data.csv").read_bytes()
    with open(a / "data.csv") as fh:
        labels = [int(r["label"]) for r in csv.DictReader(fh)]
    assert np.bincount(labels).tolist() == [5, 5, 5, 5]


def test_gen_data_usage_errors(tmp_path):
    assert run(tmp_path, "gen-data", "--classes", "1") == 2
    with pytest.raises(SystemExit) as info:
        run(tmp_path, "gen-data", "--bogus-flag")
    assert info.value.code == 2


def test_unwritable_path_is_data_error(tmp_path):
    assert run(tmp_path, "gen-data", "--out", str(tmp_path / "nope" / "x.csv")) == 3


def test_simulate_with_config_and_override(tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("# small run\ntrials = 2\np_grid = 4, 8\ninner = 2\ntheorem2_trials = 2\ntheorem2_p_grid = 8\n")
    assert run(tmp_path, "simulate", "--config", str(cfg), "--p-grid", "6,12") == 0
    for name in ("theorem1.csv", "theorem2.csv"):
        assert (tmp_path / name).exists()
    with open(tmp_path / "theorem1.csv") as fh:
        ps = sorted({int(r["p"]) for r in csv.DictReader(fh)})
    assert ps == [6, 12]
    doc = json.loads((tmp_path / "run.json").read_text())
    assert doc["settings"]["p_grid"] == [6, 12] and doc["settings"]["trials"] == 2


def test_simulate_unknown_key(tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("tirals = 3\n")
    assert run(tmp_path, "simulate", "--config", str(cfg)) == 2


def test_fit(tmp_path, data_file):
    assert run(tmp_path, "fit", "--data", str(data_file), "--v", "0.5") == 0
    doc = json.loads((tmp_path / "fit.json").read_text())
    assert doc["dim"] == 40 and len(doc["estimate"]["log_r"]) == 40


def test_train_eval_cycle(tmp_path, data_file):
    out = tmp_path / "run"
    args = ["train", "--data", str(data_file), "--epochs", "2", "--channels", "3", "--v", "0"]
    assert run(out, *args) == 0
    rows = list(csv.DictReader(open(out / "metrics.csv")))
    assert len(rows) == 2 and list(rows[0]) == ["epoch", "train_acc", "test_acc", "loss"]
    ckpt = json.loads((out / "model.json").read_text())
    assert ckpt["mode"] == "MLE" and "fits" in ckpt["prototypes"]
    ev = tmp_path / "eval"
    assert run(ev, "eval", "--model", str(out / "model.json"), "--data", str(data_file), "--split", "train") == 0
    rep = json.loads((ev / "eval.json").read_text())
    assert rep["accuracy"] == pytest.approx(float(rows[-1]["train_acc"]), abs=1e-9)
    # a second run reproduces every artifact byte-for-byte
    again = tmp_path / "again"
    assert run(again, *args) == 0
    for name in ("metrics.csv", "model.json", "run.json"):
        assert (out / name).read_bytes() == (again / name).read_bytes()


def test_epochs_one_gives_one_row(tmp_path, data_file):
    assert run(tmp_path, "train", "--data", str(data_file), "--epochs", "1", "--channels", "2") == 0
    assert len((tmp_path / "metrics.csv").read_text().splitlines()) == 2


def test_train_missing_file(tmp_path):
    assert run(tmp_path, "train", "--data", str(tmp_path / "missing.csv")) == 3


def test_train_malformed_csv(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,label,snr_db,re_0,im_0\n0,0,1,0.3\n")
    assert run(tmp_path, "train", "--data", str(bad)) == 3


def test_train_bad_config_is_usage(tmp_path, data_file):
    assert run(tmp_path, "train", "--data", str(data_file), "--v", "-1") == 2


def test_numerical_failure_exit_code(tmp_path, data_file, monkeypatch):
    from csure.classifier import model as M

    def boom(*a, **k):
        raise M.TrainingDivergedError(3)

    monkeypatch.setattr(cli, "train", boom)
    assert run(tmp_path, "train", "--data", str(data_file), "--epochs", "1") == 4
    assert json.loads((tmp_path / "run.json").read_text())["results"]["diverged_epoch"] == 3
