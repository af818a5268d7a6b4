import json
import subprocess
import sys
from pathlib import Path

import pytest

from dlsched.cli import main

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def test_solve_then_oracle(tmp_path, capsys):
    assert main(["solve", str(SCENARIOS / "varying_control.json"), "--out", str(tmp_path)]) == 0
    csv_path = tmp_path / "schedule.csv"
    assert csv_path.exists()
    capsys.readouterr()
    assert main(["oracle", str(SCENARIOS / "varying_control.json"), str(csv_path),
                 "--slot", "1e-4"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("processor,alpha,processed")
    assert len(out) == 5


def test_oracle_flags_edited_schedule(tmp_path, capsys):
    sc = str(SCENARIOS / "varying_control.json")
    main(["solve", sc, "--out", str(tmp_path)])
    path = tmp_path / "schedule.csv"
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    row = lines[1].split(",")
    a1, a2 = header.index("alpha_1"), header.index("alpha_2")
    row[a1] = str(float(row[a1]) + 0.05)
    row[a2] = str(float(row[a2]) - 0.05)
    path.write_text("\n".join([lines[0], ",".join(row)] + lines[2:]) + "\n")
    capsys.readouterr()
    assert main(["oracle", sc, str(path), "--slot", "1e-4"]) == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["flagged"] == [1, 2]


def test_sweep_mode_flag(capsys):
    assert main(["solve", str(SCENARIOS / "table1.json"), "--mode", "sweep"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("point,T_f") and "bracket_low" in out


def test_estimate(capsys):
    assert main(["estimate", str(SCENARIOS / "samples.json")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "parameter,estimate,samples_used"
    assert lines[1].startswith("lambda,") and lines[2].startswith("mu,")


def test_simulate_methods(tmp_path, capsys):
    sc = str(SCENARIOS / "stochastic.json")
    for method in ("simulation", "iterative"):
        assert main(["simulate", sc, "--trials", "10", "--method", method, "--seed", "2",
                     "--out", str(tmp_path)]) == 0
        assert (tmp_path / f"{method}.csv").exists()
    assert main(["simulate", sc, "--method", "iterative", "--initial", "baseline",
                 "--trials", "5"]) == 0
    assert main(["simulate", sc, "--method", "baseline"]) == 0


def test_simulate_needs_mm1(capsys):
    assert main(["simulate", str(SCENARIOS / "table1.json")]) == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "ScenarioError"


def test_missing_scenario_is_json_error(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "missing.json")]) == 2
    assert "error" in json.loads(capsys.readouterr().err.strip())


def test_experiment_cli(tmp_path, capsys):
    assert main(["experiment", "table2", "--seed", "7", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "table2.csv").exists()


def test_unknown_experiment_exits_nonzero():
    with pytest.raises(SystemExit) as exc:
        main(["experiment", "table9"])
    assert exc.value.code != 0


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dlsched", "estimate",
                           str(SCENARIOS / "samples.json")], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("parameter")
