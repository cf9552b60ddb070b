import json
import shutil

import numpy as np
import pytest

from metacal.kriging import KrigingConfig, fit_all
from metacal.workbench import Project, load_models, main, save_models, stage_seed
from metacal.workbench.project import MANIFEST_NAME


def run(project, *args):
    return main([*args, "--project", str(project)])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("proj")
    for cmd in (["synth-obs"], ["design"], ["evaluate"], ["fit"], ["validate"],
                ["calibrate", "--goal", "mean", "--swarm", "20", "--iters", "80", "--starts", "4"],
                ["check-optimum", "--goal", "mean"], ["report"]):
        assert run(root, *cmd) == 0, cmd
    return root


@pytest.fixture
def copy(pipeline, tmp_path):
    dst = tmp_path / "p"
    shutil.copytree(pipeline, dst)
    return dst


def test_pipeline_outputs(pipeline):
    rep = json.loads((pipeline / "report.json").read_text())
    assert rep["validation"]["r2"] >= 0.99
    assert rep["calibration"]["mean"]["rel_gap"] <= 0.01
    for name in ("observations.csv", "design.csv", "error_table.csv", "validation.csv", "calibrate_mean.csv"):
        assert (pipeline / name).exists()


def test_design_without_scenario(tmp_path):
    assert run(tmp_path, "design") == 3


def test_bad_usage(tmp_path, capsys):
    assert run(tmp_path, "design", "--n", "0") == 1
    assert main(["frobnicate"]) == 1
    assert run(tmp_path, "calibrate", "--algo", "simplex") == 1


def test_bad_goal_is_usage_error(copy):
    assert run(copy, "calibrate", "--goal", "station:99") == 1


def test_calibrate_before_fit(tmp_path):
    assert run(tmp_path, "synth-obs") == 0
    assert run(tmp_path, "calibrate") == 3


def test_truncated_model(copy):
    p = copy / "models" / "rmse_1.json"
    p.write_text(p.read_text()[: len(p.read_text()) // 2])
    assert run(copy, "validate") == 2


def test_missing_artifact(copy):
    (copy / "error_table.csv").unlink()
    assert run(copy, "fit") == 3


def test_corrupt_manifest(copy):
    (copy / MANIFEST_NAME).write_text("{not json")
    assert run(copy, "report") == 2


def test_report_without_calibration(tmp_path):
    root = tmp_path / "v"
    for cmd in (["synth-obs"], ["design", "--n", "40"], ["evaluate"], ["fit", "--restarts", "2"], ["validate"],
                ["report"]):
        assert run(root, *cmd) == 0
    rep = json.loads((root / "report.json").read_text())
    assert "validation" in rep and "calibration" not in rep


def test_report_is_reproducible(copy):
    before = (copy / "report.json").read_bytes()
    assert run(copy, "report") == 0
    assert (copy / "report.json").read_bytes() == before


def test_rerun_design_makes_downstream_stale(copy):
    assert run(copy, "design", "--n", "45", "--seed", "7") == 0
    pr = Project(copy)
    assert not pr.is_current("fit") and not pr.is_current("calibrate")
    assert run(copy, "fit") == 3  # evaluate is stale
    assert run(copy, "report") == 0
    rep = json.loads((copy / "report.json").read_text())
    assert rep["stages"] == ["synth-obs", "design"]


def test_tampered_output(copy):
    with open(copy / "design.csv", "a") as fh:
        fh.write("\n")
    assert run(copy, "evaluate") == 2


def test_stage_seed():
    assert stage_seed(1, "design") == stage_seed(1, "design")
    assert stage_seed(1, "design") != stage_seed(1, "validate")
    assert stage_seed(1, "design") != stage_seed(2, "design")
    assert 0 <= stage_seed(5, "fit") < 2**63


def test_env_project(tmp_path, monkeypatch):
    monkeypatch.setenv("METACAL_PROJECT", str(tmp_path))
    assert main(["synth-obs", "--noise", "0.01"]) == 0
    assert (tmp_path / "observations.csv").exists()
    sc = json.loads((tmp_path / "scenario.json").read_text())
    assert sc["noise_sigma"] == 0.01


def test_models_roundtrip(tmp_path, table, rng):
    models = fit_all(table, KrigingConfig(seed=1, restarts=2))
    pr = Project(tmp_path)
    names = save_models(pr, models)
    for n in names:
        pr.register(n, "fit")
    pr.data["stages"]["fit"] = {"outputs": {}, "inputs": {}, "meta": {"station_ids": [m.station_id for m in models]}}
    back = load_models(pr)
    X = table.design.bounds.from_unit(rng.random((100, 9)))
    for a, b in zip(models, back):
        assert np.array_equal(a.predict_mean(X), b.predict_mean(X))
        assert np.array_equal(a.predict_variance(X), b.predict_variance(X))
