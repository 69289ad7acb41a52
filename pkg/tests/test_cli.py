import json
from pathlib import Path

import pytest

from ptw.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, _model_fields, main
from ptw.errors import ConfigError

SAMPLE_DIR = Path(__file__).parent / "samples"


@pytest.fixture(autouse=True)
def output_root(monkeypatch, tmp_path):
    monkeypatch.setenv("PTW_OUTPUT_ROOT", str(tmp_path))
    return tmp_path


def test_speed(capsys, output_root):
    status = main(["speed", "--model", "scalar_kpp", "--r", "4", "--points", "16",
                   "--output", "kpp"])
    assert status == EXIT_OK
    line = capsys.readouterr().out.strip()
    assert line.startswith("c_star=4.000000 lambda_star=")
    assert float(line.split("lambda_star=")[1]) == pytest.approx(2.0, abs=1e-4)
    manifest = json.loads((output_root / "kpp" / "manifest.json").read_text())
    assert manifest["task"] == "speed"
    assert manifest["passed"] is True


def test_eigen(capsys):
    status = main(["eigen", "--model", "constant_coop2", "--points", "16"])
    assert status == EXIT_OK
    assert capsys.readouterr().out.strip() == "k=-1.000000"


def test_config_with_overrides(capsys):
    status = main(["speed", "--config", str(SAMPLE_DIR / "valid" / "speed_kpp.cfg"),
                   "--r", "0.25"])
    assert status == EXIT_OK
    assert capsys.readouterr().out.startswith("c_star=1.000000 ")


def test_run_config_file(capsys, output_root):
    status = main(["run", str(SAMPLE_DIR / "valid" / "speed_kpp.cfg"), "--output", "run"])
    assert status == EXIT_OK
    assert capsys.readouterr().out.startswith("c_star=2.000000 ")
    assert (output_root / "run" / "speed.csv").exists()


def test_run_invalid_config(capsys):
    status = main(["run", str(SAMPLE_DIR / "invalid" / "bad_version.cfg")])
    assert status == EXIT_CONFIG
    assert "header.PTW_CONFIG_VERS" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["speed", "--model", "scalar_kpp", "--direction", "0,0"],
    ["speed", "--model", "scalar_kpp", "--direction", "1,0"],
    ["speed", "--model", "fisher"],
    ["speed", "--model", "scalar_kpp", "--growth", "2"],
    ["speed", "--model", "scalar_kpp", "--r"],
    ["speed", "--model", "scalar_kpp", "--r", "-1"],
    ["dispersion", "--model", "scalar_kpp"],
    ["simulate", "--model", "scalar_kpp"],
])
def test_config_errors(argv, capsys):
    assert main(argv) == EXIT_CONFIG
    assert capsys.readouterr().err.startswith("ptw: config error:")


def test_numerical_failure(capsys):
    assert main(["speed", "--model", "saturating_decay", "--points", "16"]) == EXIT_FAILURE
    assert "UnstableZeroState" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    [],
    ["plot"],
    ["run"],
    ["run", "config.cfg", "--r", "1"],
    ["barrier", "verify", "--model", "scalar_kpp", "--kind", "super_x"],
])
def test_argument_errors(argv):
    with pytest.raises(SystemExit) as error:
        main(argv)
    assert error.value.code == EXIT_CONFIG


def test_simulate_extinction(capsys):
    status = main(["simulate", "--model", "saturating_decay", "--kind", "extinction"])
    assert status == EXIT_OK
    assert capsys.readouterr().out.startswith("extinct=true")


def test_verify_all_stable_zero_state(capsys, output_root):
    status = main(["verify-all", "--model", "saturating_decay", "--points", "16",
                   "--output", "verify"])
    assert status == EXIT_OK
    assert capsys.readouterr().out.splitlines() == ["wave_refused: PASS", "extinction: PASS"]
    report = json.loads((output_root / "verify" / "verify_all.json").read_text())
    assert report["passed"] is True


def test_barrier_verify(capsys, output_root):
    status = main(["barrier", "verify", "--model", "scalar_kpp", "--kind", "super_h",
                   "--speed", "2.5", "--output", "barrier"])
    assert status == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("super_h max_violation=")
    assert out.strip().endswith("passed=true")
    report = json.loads((output_root / "barrier" / "barrier.json").read_text())
    assert report["speed"] == 2.5


@pytest.mark.parametrize("argv", [
    ["barrier", "verify", "--model", "scalar_kpp", "--kind", "super_h"],
    ["barrier", "verify", "--model", "scalar_kpp", "--kind", "sub_omega", "--speed", "0"],
    ["barrier", "verify", "--model", "scalar_kpp", "--kind", "super_h", "--speed", "2.5",
     "--direction", "0"],
])
def test_barrier_config_errors(argv):
    assert main(argv) == EXIT_CONFIG


def test_barrier_below_minimal_speed(capsys):
    status = main(["barrier", "verify", "--model", "scalar_kpp", "--kind", "super_h",
                   "--speed", "1.5"])
    assert status == EXIT_FAILURE
    assert "SpeedBelowMinimal" in capsys.readouterr().err


def test_model_fields():
    assert _model_fields(["--r", "2", "--diffusion-matrix=2,0,0,1"]) == {
        "R": "2",
        "DIFFUSION_MATRIX": "2,0,0,1",
    }
    with pytest.raises(ConfigError):
        _model_fields(["2"])
