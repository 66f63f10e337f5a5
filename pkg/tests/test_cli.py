import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from wealthmap.cli import main
from wealthmap.config import load_config
from wealthmap.pipeline import _model_inputs

CONFIG = {
    "synth": {"n_clusters": 150, "extent_deg": 1.5, "households_per_cluster": 10},
    "model": {"family": "random_forest", "params": {"n_trees": 25, "max_depth": 6}},
    "benchmark": {"params": {"random_forest": {"n_trees": 20}, "gbdt": {"n_stages": 20}}},
    "search": {"n_iter": 3},
    "cv": {"k": 5},
}


def write_config(tmp_path, **updates):
    doc = {**CONFIG, **updates}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    cfg = write_config(tmp)
    out = str(tmp / "run")
    for cmd in ("synth", "features", "targets"):
        assert main([cmd, "--config", cfg, "--seed", "7", "--out", out]) == 0
    return tmp, cfg, out


def run(workspace, *args, out=None):
    tmp, cfg, default_out = workspace
    return main([*args, "--config", cfg, "--seed", "7", "--out", out or default_out])


def test_stage_outputs_exist(workspace):
    _, _, out = workspace
    for name in ("scene/clusters.csv", "scene/rasters/ntl.asc", "features.csv", "targets.csv"):
        assert (Path(out) / name).exists()


def test_features_idempotent(workspace, tmp_path):
    _, _, out = workspace
    before = (Path(out) / "features.csv").read_bytes()
    assert run(workspace, "features") == 0
    assert (Path(out) / "features.csv").read_bytes() == before


def test_benchmark_deterministic(workspace, capsys):
    _, _, out = workspace
    assert run(workspace, "benchmark") == 0
    first = (Path(out) / "metrics.json").read_bytes()
    assert run(workspace, "benchmark") == 0
    assert (Path(out) / "metrics.json").read_bytes() == first
    metrics = json.loads(first)
    assert set(metrics["grid"]) == {"ols", "lasso", "ridge", "gbdt", "random_forest"}
    assert all(set(row) == {"SM", "RS", "POI", "All"} for row in metrics["grid"].values())
    rows = list(csv.reader(open(Path(out) / "benchmark.csv")))
    assert rows[0] == ["model", "SM", "RS", "POI", "All"] and len(rows) == 6


def test_train_explain_predict(workspace):
    _, _, out = workspace
    assert run(workspace, "train") == 0
    assert run(workspace, "explain", "--rows", "C0003") == 0
    force = Path(out) / "explain" / "force"
    assert [p.name for p in force.iterdir()] == ["C0003.csv"]
    rows = list(csv.reader(open(force / "C0003.csv")))
    total = float(rows[1][2]) + sum(float(r[2]) for r in rows[2:-1])
    assert abs(total - float(rows[-1][2])) <= 1e-9 * max(1.0, abs(float(rows[-1][2])))

    assert run(workspace, "explain") == 0
    gi = list(csv.reader(open(Path(out) / "explain" / "global_importance.csv")))[1:]
    vals = [float(r[2]) for r in gi]
    assert vals == sorted(vals, reverse=True)
    assert [int(r[0]) for r in gi] == list(range(1, len(gi) + 1))

    assert run(workspace, "predict") == 0
    model, matrix, X = _model_inputs(load_config(workspace[1], 7, out), None)
    preds = list(csv.reader(open(Path(out) / "predictions.csv")))[1:]
    assert [r[0] for r in preds] == matrix.row_ids
    assert np.array_equal([float(r[1]) for r in preds], model.predict(X))


def test_explain_linear_model_rejected(workspace, tmp_path, capsys):
    _, _, out = workspace
    lin = tmp_path / "lin"
    lin.mkdir()
    for name in ("features.csv", "targets.csv"):
        shutil.copy(Path(out) / name, lin / name)
    assert run(workspace, "train", "--family", "ridge", out=str(lin)) == 0
    assert run(workspace, "explain", out=str(lin)) == 2
    assert "tree ensemble" in capsys.readouterr().err


def test_missing_seed_is_input_error(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "x")]) == 2
    assert "seed" in capsys.readouterr().err


def test_malformed_features_exit_2(workspace, tmp_path):
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "features.csv").write_text("nonsense\n")
    (bad / "targets.csv").write_text("cluster_id,wealth_index\n")
    assert run(workspace, "train", out=str(bad)) == 2


def test_degenerate_assets_exit_3(tmp_path):
    (tmp_path / "scene").mkdir()
    (tmp_path / "scene" / "households.csv").write_text(
        "cluster_id,toilet_outside,improved_water,head_higher_edu,asset_1\nA,0,1,0,1\nA,1,1,0,1\n")
    cfg = write_config(tmp_path)
    assert main(["targets", "--config", cfg, "--seed", "1", "--out", str(tmp_path)]) == 3


def test_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "wealthmap.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("synth", "features", "targets", "train", "benchmark", "explain", "predict"):
        assert cmd in res.stdout
