import json
from dataclasses import replace

import pytest

from gfst.pipeline.cli import main
from gfst.pipeline.config import save_config
from test_pipeline import small_run


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "cfg.json"
    save_config(small_run(), path)
    return path


def test_synth_writes_dataset(tmp_path, cfg_path):
    out = tmp_path / "s"
    assert main(["synth", "--config", str(cfg_path), "--seed", "3", "--layout", "planted", "--out", str(out)]) == 0
    assert (out / "data.csv").exists() and (out / "stations.csv").exists()
    assert json.loads((out / "truth.json").read_text())["seed"] == 3


def test_build_graph_writes_csv_and_sidecar(tmp_path, cfg_path):
    out = tmp_path / "g"
    assert main(["build-graph", "--config", str(cfg_path), "--out", str(out)]) == 0
    rows = (out / "adjacency.csv").read_text().splitlines()
    assert rows[0] == "i,j,a,b" and len(rows) == 1 + 9
    side = json.loads((out / "adjacency.json").read_text())
    assert side["graph"]["window_len"] == 64 and "config_hash" in side


def test_train_evaluate_forecast_round(tmp_path, cfg_path):
    tr = tmp_path / "t"
    assert main(["train", "--config", str(cfg_path), "--seed", "1", "--out", str(tr)]) == 0
    curve = json.loads((tr / "loss_curve.json").read_text())
    assert curve["seed"] == 1 and len(curve["epochs"]) >= 1
    ev = tmp_path / "e"
    assert main(["evaluate", "--checkpoint", str(tr / "model.ckpt"), "--out", str(ev), "--no-timing"]) == 0
    rep = json.loads((ev / "report.json").read_text())
    assert {r["model"] for r in rep["rows"]} == {"GFST-WSF", "Persistence"}
    assert rep["meta"]["seed"] == 1
    assert (ev / "report.txt").read_text().startswith("Model")
    fc = tmp_path / "f"
    assert main(["forecast", "--checkpoint", str(tr / "model.ckpt"), "--out", str(fc)]) == 0
    doc = json.loads((fc / "forecast.json").read_text())
    assert len(doc["wind_speed_mps"]) == 4


def test_horizon_and_ablation_flags(tmp_path, cfg_path):
    tr = tmp_path / "t"
    assert main(["train", "--config", str(cfg_path), "--horizon", "2", "--ablation", "no-gat", "--out", str(tr)]) == 0
    run = json.loads((tr / "config.json").read_text())
    assert run["model"]["horizon"] == 2 and run["model"]["use_gat"] is False


def test_bad_config_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"model": {"d_model": 8, "heads": 3}}))
    assert main(["train", "--config", str(bad)]) == 1
    assert "error" in capsys.readouterr().err
    bad.write_text(json.dumps({"mystery": {}}))
    assert main(["synth", "--config", str(bad)]) == 1


def test_forecast_insufficient_history_exits_one(tmp_path, cfg_path):
    tr = tmp_path / "t"
    assert main(["train", "--config", str(cfg_path), "--out", str(tr)]) == 0
    assert main(["forecast", "--checkpoint", str(tr / "model.ckpt"), "--at", "5", "--out", str(tmp_path)]) == 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_diverging_training_exits_two(tmp_path):
    cfg = small_run()
    cfg = replace(cfg, train=replace(cfg.train, lr=1e12))
    path = tmp_path / "c.json"
    save_config(cfg, path)
    assert main(["train", "--config", str(path), "--out", str(tmp_path / "t")]) == 2
