"""End-to-end tests of the command-line interface on a tiny dataset."""
from __future__ import annotations

import json

import pandas as pd
import pytest

from modedg.cli import main

QUIET = ["--log-level", "WARNING"]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "request.yaml").write_text(
        "name: tiny\nclasses: 3\nimages_per_class: 10\nimage_size: 16\nval_fraction: 0.2\nseed: 7\n"
    )
    (root / "train.json").write_text(json.dumps({
        'model': {'channels': [4, 8]},
        'explore': {'K': 1},
        'batch_size': 8,
    }))
    code = main(QUIET + ["generate", "--config", str(root / "request.yaml"), "--out", str(root / "data"),
                         "--export-ppm"])
    assert code == 0
    return root


def test_generate_writes_dataset(workspace) -> None:
    data = workspace / "data"
    assert (data / "manifest.json").is_file()
    assert len(list((data / "ppm").glob("*.ppm"))) == 4 * 3
    assert not (data / "run.log").exists()


def test_train_eval_and_report(workspace, capsys) -> None:
    run = workspace / "run"
    args = ["train", "--config", str(workspace / "train.json"), "--data", str(workspace / "data"),
            "--out", str(run), "--epochs", "1", "--domain", "speckle"]
    assert main(QUIET + args) == 0
    metrics = pd.read_csv(run / "metrics.csv")
    assert metrics[metrics["split"] == "target"]["domain"].tolist() == ["speckle"]
    assert (run / "run.log").is_file()

    assert main(QUIET + ["eval", "--checkpoint", str(run / "checkpoint"), "--data", str(workspace / "data"),
                         "--domain", "3", "--split", "val"]) == 0
    assert "speckle [val]: accuracy" in capsys.readouterr().out

    report = workspace / "report"
    assert main(QUIET + ["report", str(run), "--out", str(report)]) == 0
    assert (report / "runs.csv").is_file() and (report / "loss_curves.csv").is_file()


def test_train_several_seeds(workspace) -> None:
    out = workspace / "seeds"
    args = ["train", "--method", "mode_f", "--config", str(workspace / "train.json"),
            "--data", str(workspace / "data"), "--out", str(out), "--epochs", "1", "--seeds", "0,1"]
    assert main(QUIET + args) == 0
    assert (out / "seed0" / "metrics.csv").is_file()
    assert (out / "seed1" / "checkpoint").is_dir()


def test_sweep_and_lodo(workspace) -> None:
    sweep = workspace / "sweep"
    args = ["sweep", "--method", "mode_f", "--config", str(workspace / "train.json"),
            "--data", str(workspace / "data"), "--out", str(sweep), "--epochs", "1",
            "--axis", "beta", "--values", "0.5", "--domain", "stripes"]
    assert main(QUIET + args) == 0
    frame = pd.read_csv(sweep / "sweep_beta.csv")
    assert frame["domain"].tolist() == ["stripes"]

    lodo = workspace / "lodo"
    args = ["lodo", "--method", "erm,mode_f", "--config", str(workspace / "train.json"),
            "--data", str(workspace / "data"), "--out", str(lodo), "--epochs", "1", "--seeds", "0"]
    assert main(QUIET + args) == 0
    summary = pd.read_csv(lodo / "lodo_summary.csv")
    assert set(summary["method"]) == {"erm", "mode_f"}
    assert len(summary) == 2 * 5


def test_sweep_grid_mode(workspace, capsys) -> None:
    out = workspace / "grid"
    args = ["sweep", "--method", "mode_f", "--config", str(workspace / "train.json"),
            "--data", str(workspace / "data"), "--out", str(out), "--epochs", "1",
            "--axis", "beta", "--values", "0.3,0.6", "--axis2", "gamma", "--values2", "1.0"]
    assert main(QUIET + args) == 0
    frame = pd.read_csv(out / "grid_beta_gamma.csv")
    assert frame["beta"].tolist() == [0.3, 0.6]
    assert frame["gamma"].tolist() == [1.0, 1.0]
    assert (out / "grid_beta_gamma_mean.csv").is_file()
    assert "beta=0.6 gamma=1.0: mean held-out accuracy" in capsys.readouterr().out


def test_explore_writes_step_grid(workspace, capsys) -> None:
    out = workspace / "explore"
    args = ["explore", "--data", str(workspace / "data"), "--out", str(out), "--channels", "4,8",
            "--domain", "speckle", "--samples", "4", "--K", "2", "--seed", "1"]
    assert main(QUIET + args) == 0
    header = (out / "exploration.ppm").read_text().splitlines()[:3]
    # 4 rows of samples; the original plus steps 0..2 as columns, 16px tiles with 1px gutters
    assert header == ["P3", "69 69", "255"]
    losses = pd.read_csv(out / "exploration.csv")
    assert len(losses) == 4 * 3
    assert sorted(set(losses["step"])) == [0, 1, 2]
    assert "exploration written to" in capsys.readouterr().out


def test_failures_exit_with_one(workspace, tmp_path) -> None:
    (tmp_path / "empty").mkdir()
    assert main(QUIET + ["report", str(tmp_path / "empty"), "--out", str(tmp_path / "report")]) == 1
    assert main(QUIET + ["train", "--data", str(workspace / "data"), "--out", str(tmp_path / "run"),
                         "--domain", "nowhere"]) == 1
    assert main(QUIET + ["train", "--data", str(tmp_path / "missing"), "--out", str(tmp_path / "run")]) == 1
    assert main(QUIET + ["sweep", "--data", str(workspace / "data"), "--out", str(tmp_path / "sweep"),
                         "--axis", "K", "--values", "one"]) == 1
    assert main(QUIET + ["sweep", "--data", str(workspace / "data"), "--out", str(tmp_path / "grid"),
                         "--axis", "K", "--values", "1", "--axis2", "K", "--values2", "2"]) == 1
    assert main(QUIET + ["explore", "--data", str(workspace / "data"), "--out", str(tmp_path / "explore"),
                         "--channels", "4,8", "--domain", "solid", "--samples", "1000"]) == 1
