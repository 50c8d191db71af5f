import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from dpdsa.cli import EXIT_CONFIG, EXIT_OK, EXIT_STATS, ks_required, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_ks_required():
    assert ks_required(9) == 8
    assert ks_required(18) == 16


def test_validate_ok(capsys):
    assert main(["validate-config", "--config", str(CONFIGS / "box_ring.yaml")]) == EXIT_OK
    assert "n=4" in capsys.readouterr().out


def test_validate_needs_file(capsys):
    assert main(["validate-config"]) == EXIT_CONFIG


def test_bad_config_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("problem: {builtin: sensors}\ngraph: {builtin: gossip, n: 4}\n")
    assert main(["run", "--config", str(bad)]) == EXIT_CONFIG
    assert "graph" in capsys.readouterr().err


def test_missing_file_exit_one(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == EXIT_CONFIG


def test_bad_seed():
    assert main(["run", "--seed", "-1"]) == EXIT_CONFIG


def test_run(tmp_path):
    out = tmp_path / "run"
    code = main(["run", "--config", str(CONFIGS / "box_ring.yaml"), "--steps", "2000", "--out", str(out)])
    assert code == EXIT_OK
    rows = list(csv.DictReader((out / "trajectory.csv").open()))
    assert len(rows) == 2 * 4
    summary = json.loads((out / "summary.json").read_text())
    assert summary["runtime_seconds"] >= 0
    assert summary["config"]["run"]["steps"] == 2000


def test_montecarlo_deterministic(tmp_path):
    args = ["montecarlo", "--reps", "6", "--steps", "200", "--seed", "9"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b"), "--parallel", "2"]) == EXIT_OK
    for name in ("final_x.csv", "montecarlo.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_asymptotics(tmp_path, capsys):
    assert main(["asymptotics", "--out", str(tmp_path)]) == EXIT_OK
    d = json.loads((tmp_path / "asymptotics.json").read_text())
    assert d["spectral_abscissa"] == pytest.approx(-0.5)
    assert len(d["Sigma"]) == 15


def test_normality_pass(tmp_path):
    out = tmp_path / "norm"
    assert main(["normality", "--fit", "--reps", "500", "--steps", "1000", "--out", str(out)]) == EXIT_OK
    assert (out / "ks.csv").exists() and (out / "timing.json").exists()


def test_normality_fail_exit_two(tmp_path):
    # 20 steps are far from the limit law, so the theoretical variances are badly off
    code = main(["normality", "--reps", "1000", "--steps", "20", "--out", str(tmp_path)])
    assert code == EXIT_STATS


def test_normality_rejects_constrained():
    assert main(["normality", "--config", str(CONFIGS / "box_ring.yaml"), "--reps", "60"]) == EXIT_CONFIG


def test_efficiency(tmp_path):
    code = main(["efficiency", "--reps", "100", "--steps", "500", "--out", str(tmp_path)])
    assert code in (EXIT_OK, EXIT_STATS)
    d = json.loads((tmp_path / "efficiency.json").read_text())
    assert "averaging_reduces_error" in d["report"]


def test_replicate_command(tmp_path):
    code = main(["replicate-paper", "--reps", "300", "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert (tmp_path / "agent3_estimates.csv").exists()


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "dpdsa.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for sub in ("run", "montecarlo", "asymptotics", "normality", "efficiency", "replicate-paper", "validate-config"):
        assert sub in r.stdout
