import json
import logging

import numpy as np
import pytest
from click.testing import CliRunner

from main import EXIT_IO, EXIT_OK, cli
from sorosense.neuralnet.mlp import MLP
from sorosense.proprioception.predictor import PosePredictor
from sorosense.sensing.calibration import CalibrationCurve
from sorosense.utils.config import ENV_LOG_LEVEL, ENV_OUT_DIR, ENV_SEED


@pytest.fixture(autouse=True)
def isolated(monkeypatch, tmp_path):
    for name in (ENV_OUT_DIR, ENV_SEED, ENV_LOG_LEVEL):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)
    yield
    root = logging.getLogger()
    for handler in root.handlers[:]:
        root.removeHandler(handler)
        handler.close()


@pytest.fixture
def runner():
    return CliRunner()


def _samples(path, n=20):
    curve = CalibrationCurve.measured()
    inductance = np.linspace(10.0, 150.0, n)
    lines = ["inductance,length_mm"] + [f"{float(i)!r},{float(curve(i))!r}" for i in inductance]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_calibrate(runner, tmp_path):
    output = tmp_path / "curve.json"
    result = runner.invoke(
        cli, ["calibrate", "--input", str(_samples(tmp_path / "s.csv")), "--output", str(output), "--out", "run"]
    )
    assert result.exit_code == EXIT_OK, result.output
    data = json.loads(output.read_text(encoding="utf-8"))
    assert data["residual_rms"] < 1e-6
    assert (tmp_path / "run" / "reports" / "calibration_residuals.csv").exists()


def test_calibrate_too_few_samples(runner, tmp_path):
    result = runner.invoke(cli, ["calibrate", "--input", str(_samples(tmp_path / "s.csv", n=4)), "--out", "run"])
    assert result.exit_code == EXIT_IO


def test_unknown_config_key(runner, tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"control": {"gd": {"tua": 0.3}}}), encoding="utf-8")
    result = runner.invoke(cli, ["gen-data", "--kind", "sim", "--config", str(config)])
    assert result.exit_code == EXIT_IO
    assert "control.gd.tua" in result.output


def test_gen_data_sim(runner, tmp_path):
    result = runner.invoke(
        cli, ["gen-data", "--kind", "sim", "--n", "20", "--levels", "0", "--out", "run", "--seed", "3"]
    )
    assert result.exit_code == EXIT_OK, result.output
    first = (tmp_path / "run" / "data" / "sim.csv").read_text(encoding="utf-8").splitlines()[0]
    assert first.startswith("# config=") and "seed=3" in first
    assert (tmp_path / "run" / "logs").is_dir()


def test_gen_data_sim_appends_grid(runner, tmp_path):
    result = runner.invoke(cli, ["gen-data", "--kind", "sim", "--n", "5", "--levels", "2", "--out", "run"])
    assert result.exit_code == EXIT_OK, result.output
    rows = [line for line in (tmp_path / "run" / "data" / "sim.csv").read_text(encoding="utf-8").splitlines()
            if not line.startswith("#")]
    assert len(rows) == 1 + 5 + 2 ** 6


def test_non_monotone_calibration_is_config_error(runner, tmp_path):
    curve = tmp_path / "curve.json"
    CalibrationCurve.from_coefficients([0.0, 1.0, -0.05, 0.0, 0.0]).save(curve)
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"sensing": {"calibration": str(curve)}}), encoding="utf-8")
    result = runner.invoke(cli, ["gen-data", "--kind", "sim", "--n", "2", "--levels", "0", "--config", str(config)])
    assert result.exit_code == EXIT_IO
    assert "немонотонна" in result.output


def test_train_without_dataset(runner):
    result = runner.invoke(cli, ["train", "--which", "smap", "--out", "run"])
    assert result.exit_code == EXIT_IO


def test_eval_without_models(runner):
    result = runner.invoke(cli, ["eval", "--mode", "standard", "--out", "run"])
    assert result.exit_code == EXIT_IO


def test_eval_standard_without_real_dataset(runner, tmp_path):
    result = runner.invoke(cli, ["gen-data", "--kind", "sim", "--n", "20", "--levels", "0", "--out", "run"])
    assert result.exit_code == EXIT_OK, result.output
    PosePredictor(MLP.create([24, 4, 6], seed=0)).save(tmp_path / "run" / "models")
    result = runner.invoke(cli, ["eval", "--mode", "standard", "--out", "run"])
    assert result.exit_code in (EXIT_OK, 2)
    assert "virtual-real не найден" in result.output
    assert (tmp_path / "run" / "reports" / "eval_standard.svg").exists()


def test_control_needs_exactly_one_goal(runner):
    result = runner.invoke(cli, ["control", "--shape", "circle", "--task", "pick-place"])
    assert result.exit_code == 2
    result = runner.invoke(cli, ["control", "--target", "1,2,3"])
    assert result.exit_code == 2
    result = runner.invoke(cli, ["control", "--target", "1,2,3,4,5,x"])
    assert result.exit_code == 2


@pytest.mark.slow
def test_pipeline(runner, tmp_path):
    """gen-data → train → eval на уменьшенной конфигурации"""
    config = tmp_path / "run.json"
    config.write_text(json.dumps({
        "training": {
            "smap": {"max_epochs": 50, "log_every": 0},
            "s2r": {"max_epochs": 50, "log_every": 0},
            "smap_hidden": [32],
            "s2r_hidden": [8],
        },
        "data": {"real_levels": 2},
    }), encoding="utf-8")
    common = ["--config", str(config), "--out", "run"]
    assert runner.invoke(cli, ["gen-data", "--kind", "sim", "--n", "1200", *common]).exit_code == EXIT_OK
    assert runner.invoke(cli, ["gen-data", "--kind", "real", *common]).exit_code == EXIT_OK
    assert runner.invoke(cli, ["train", "--which", "smap", *common]).exit_code == EXIT_OK
    assert runner.invoke(cli, ["train", "--which", "s2r", *common]).exit_code == EXIT_OK
    assert (tmp_path / "run" / "models" / "s2r_t.json").exists()

    result = runner.invoke(cli, ["eval", "--mode", "standard", *common])
    assert result.exit_code in (0, 2)
    assert (tmp_path / "run" / "reports" / "eval_standard.svg").exists()
