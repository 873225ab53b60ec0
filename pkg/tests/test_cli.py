import json
import subprocess
import sys

import pytest

from lmmbench.cli import main

SWEEP = ["rate-sweep", "--preset", "finite-implicit", "--n-grid", "8,12,16", "--trials", "2", "--n-test", "10", "--p-exp", "1.5"]


def test_no_command_is_usage_error(capsys):
    assert main([]) == 2


def test_bad_flag_value():
    assert main(["cosine-demo", "--p", "many"]) == 2


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"regime": "finite", "colour": "blue"}))
    assert main(["cosine-demo", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "colour" in capsys.readouterr().err


def test_invalid_scenario_is_config_error(tmp_path):
    assert main(SWEEP[:3] + ["--gamma-coef", "1", "--out", str(tmp_path)]) == 2


def test_cosine_demo_outputs(tmp_path, capsys):
    out = tmp_path / "cos"
    assert main(["cosine-demo", "--regime", "exp", "--reg", "implicit", "--p", "128", "--out", str(out)]) == 0
    lines = (out / "predictions.csv").read_text().splitlines()
    assert lines[0] == "z_test,g,prediction,kernel_prediction" and len(lines) == 1001
    echo = json.loads((out / "config.echo.json").read_text())
    assert echo["regime"] == "exp" and echo["p"] == 128
    assert "test MSE" in capsys.readouterr().out


def test_diagnostics_report(tmp_path, capsys):
    out = tmp_path / "d"
    args = ["diagnostics", "--check", "w-orthonormality", "--spectrum", "finite:k_max=3", "--p", "32", "--reps", "50"]
    assert main(args + ["--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["reps"] == 50
    assert main(args[:2] + ["bogus"]) == 2


def test_sweep_echo_reproduces(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(SWEEP + ["--out", str(first), "--seed", "3"]) == 0
    assert main(["rate-sweep", "--config", str(first / "config.echo.json"), "--out", str(second)]) == 0
    assert (first / "results.csv").read_bytes() == (second / "results.csv").read_bytes()
    summary = json.loads((first / "summary.json").read_text())
    assert set(summary) == {"scenario", "slope", "slope_se", "n_grid", "medians"}


def test_temperature_synthetic(tmp_path):
    out = tmp_path / "t"
    args = ["temperature", "--synthetic-cities", "40", "--synthetic-days", "60", "--trials", "2", "--p-grid", "10,60"]
    assert main(args + ["--gram-p", "30", "--out", str(out)]) == 0
    for name in ("rmse.csv", "summary.json", "gram.csv", "gram.json", "config.echo.json"):
        assert (out / name).exists()


def test_missing_input_file(tmp_path):
    assert main(["temperature", "--input", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2


def test_runtime_error_exit_code(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("city_id,continent,latitude,t_0001\nA,Asia,10,x\n")
    assert main(["temperature", "--input", str(bad), "--out", str(tmp_path / "o")]) == 1


def test_synth_cities_file(tmp_path):
    path = tmp_path / "cities.csv"
    assert main(["synth-cities", "--n-cities", "12", "--p-len", "5", "--out", str(path)]) == 0
    assert len(path.read_text().splitlines()) == 13


@pytest.mark.slow
def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lmmbench.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "rate-sweep" in proc.stdout
