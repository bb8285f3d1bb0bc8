import csv
import json
from pathlib import Path

import pytest

from attitude_consensus.cli import main, parse_grid

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
OBJ1 = str(SCENARIOS / "paper_obj1.cfg")
TRACK = str(SCENARIOS / "paper_tracking.cfg")


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_run_writes_outputs(tmp_path, capsys):
    code = main(["run", OBJ1, "--output", str(tmp_path), "--duration", "0.5", "--set", "gains.Kp=2"])
    assert code == 0
    out = capsys.readouterr().out
    assert "override: gains.Kp=2" in out
    assert "override: scenario.duration=0.5" in out
    report = json.loads((tmp_path / "paper_obj1_report.json").read_text())
    assert report["overrides"] == ["gains.Kp=2", "scenario.duration=0.5"]
    assert report["effective_config"]["gains"]["kp"] == "2"
    assert report["status"] == "ok" and report["lyapunov_monitor"] == "V1"
    assert report["lyapunov_violations"] == 0
    assert report["initial_set"]["member"] is True
    rows = read_rows(tmp_path / "paper_obj1.csv")
    assert len(rows) == 501
    header = list(rows[0])
    assert header[:10] == ["t", "a1_roll_deg", "a1_pitch_deg", "a1_yaw_deg", "a1_wx_degps",
                           "a1_wy_degps", "a1_wz_degps", "a1_ux", "a1_uy", "a1_uz"]
    assert header[-4:] == ["V1", "max_pairwise_psi", "max_pairwise_angle_deg",
                           "max_velocity_disagreement_degps"]
    assert float(rows[0]["a3_roll_deg"]) == pytest.approx(50.0)
    columns = json.loads((tmp_path / "paper_obj1_columns.json").read_text())
    assert [c["name"] for c in columns] == header
    assert (tmp_path / "paper_obj1_report.txt").read_text().startswith("scenario: paper_obj1")


def test_run_is_reproducible(tmp_path):
    for sub in ("a", "b"):
        assert main(["run", OBJ1, "--output", str(tmp_path / sub), "--duration", "0.2"]) == 0
    assert (tmp_path / "a" / "paper_obj1.csv").read_bytes() == (tmp_path / "b" / "paper_obj1.csv").read_bytes()


def test_run_tracking_report(tmp_path, capsys):
    code = main(["run", TRACK, "--output", str(tmp_path), "--duration", "0.5", "--every", "10",
                 "--set", "gains.Kp=20", "--set", "gains.Kd=10"])
    assert code == 0
    assert "final tracking angle error" in capsys.readouterr().out
    rows = read_rows(tmp_path / "paper_tracking.csv")
    assert len(rows) == 51
    assert "sigma_norm_4" in rows[0] and "tracking_rate_degps" in rows[0]


def test_check(capsys):
    assert main(["check", OBJ1]) == 0
    out = capsys.readouterr().out
    assert out.startswith("OK: paper_obj1")
    assert '"margin"' in out


def test_exit_codes(tmp_path, capsys):
    assert main(["check", str(tmp_path / "missing.cfg")]) == 3
    assert main(["check", OBJ1, "--set", "gains.Kp=zero"]) == 4
    assert main(["check", OBJ1, "--set", "graph.edges=1-2, 2-3, 3-4, 4-1"]) == 5
    assert main(["check", OBJ1, "--set", "graph.directed=true", "--set", "graph.edges=0-1, 1-2, 2-3, 3-4"]) == 5
    assert main(["run", OBJ1, "--output", str(tmp_path), "--set", "gains.Kp=bad"]) == 4
    code = main(["run", str(SCENARIOS / "paper_obj2.cfg"), "--output", str(tmp_path), "--step", "0.2",
                 "--duration", "20", "--set", "gains.Kp=2000", "--set", "gains.Kd=1000"])
    assert code == 6
    report = json.loads((tmp_path / "paper_obj2_report.json").read_text())
    assert report["status"].startswith("blow-up") and report["failure_time"] > 0
    with pytest.raises(SystemExit) as info:
        main(["run"])
    assert info.value.code == 2
    capsys.readouterr()


def test_sweep_grid(tmp_path, capsys):
    code = main(["sweep", OBJ1, "--output", str(tmp_path), "--duration", "0.2",
                 "--grid", "gains.Kp=1,2", "--grid", "gains.Kd=1,3"])
    assert code == 0
    rows = read_rows(tmp_path / "sweep.csv")
    assert len(rows) == 4
    assert {(r["gains.Kp"], r["gains.Kd"]) for r in rows} == {("1", "1"), ("1", "3"), ("2", "1"), ("2", "3")}
    assert all(r["status"] == "ok" for r in rows)
    assert main(["sweep", OBJ1, "--output", str(tmp_path)]) == 2
    assert main(["sweep", OBJ1, "--output", str(tmp_path), "--grid", "gains.Kp="]) == 2
    capsys.readouterr()


def test_sweep_records_failures_and_continues(tmp_path):
    code = main(["sweep", OBJ1, "--output", str(tmp_path), "--duration", "0.1",
                 "--grid", "gains.Kp=1,-1", "--jobs", "2"])
    assert code == 0
    rows = read_rows(tmp_path / "sweep.csv")
    assert rows[0]["status"] == "ok"
    assert rows[1]["status"].startswith("error")


def test_kp_doubling_speeds_up_consensus(tmp_path):
    assert main(["sweep", OBJ1, "--output", str(tmp_path), "--grid", "gains.Kp=2,4"]) == 0
    rows = read_rows(tmp_path / "sweep.csv")
    ttc = [float(r["time_to_consensus"]) for r in rows]
    assert ttc[1] <= ttc[0]


def test_parse_grid():
    assert parse_grid(["gains.Kp=1, 2"]) == [("gains.Kp", ["1", "2"])]
    with pytest.raises(ValueError):
        parse_grid([])
    with pytest.raises(ValueError):
        parse_grid(["Kp=1"])
