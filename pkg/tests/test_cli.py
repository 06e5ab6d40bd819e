import json

import numpy as np
import pytest

from constrained_dynamics.cli import main


def test_simulate_writes_csv(tmp_path, capsys):
    rc = main(["simulate", "pendulum", "--t-end", "0.05", "--out", str(tmp_path)])
    assert rc == 0
    csv_path = tmp_path / "pendulum_trajectory.csv"
    assert csv_path.exists()
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("t,x1,x2,v1,v2,lambda1,N1,N2")
    assert len(lines) == 1 + 51
    out = capsys.readouterr().out
    assert "wrote" in out and "max |phi|" in out


def test_reactions_json_dump(capsys):
    rc = main(["reactions", "pendulum", "--state", "0,-1,2,0"])
    assert rc == 0
    dump = json.loads(capsys.readouterr().out)
    assert abs(dump["Lambda"][0] - (-14.0)) < 1e-12
    assert abs(dump["N"][1] - 14.0) < 1e-12


def test_reactions_wrong_state_length(capsys):
    with pytest.raises(SystemExit):
        main(["reactions", "pendulum", "--state", "1,2,3"])


def test_check_invariants_passes(tmp_path, capsys):
    rc = main(
        ["check-invariants", "pendulum", "--t-end", "0.5", "--out", str(tmp_path)]
    )
    assert rc == 0
    report = json.loads((tmp_path / "pendulum_report.json").read_text(encoding="utf-8"))
    assert report["passed"] is True
    text = (tmp_path / "pendulum_report.txt").read_text(encoding="utf-8")
    assert "overall: PASS" in text


def test_check_invariants_tol_override_fails(tmp_path, capsys):
    rc = main(
        [
            "check-invariants", "pendulum", "--t-end", "0.2",
            "--tol", "gde-residual=1e-30", "--out", str(tmp_path),
        ]
    )
    assert rc == 1
    assert "[FAIL] gde-residual" in capsys.readouterr().out


def test_unknown_tol_name_rejected(tmp_path):
    with pytest.raises(SystemExit):
        main(
            [
                "check-invariants", "pendulum", "--t-end", "0.1",
                "--tol", "no-such-check=1", "--out", str(tmp_path),
            ]
        )


def test_unknown_scenario_exit_code(capsys):
    rc = main(["simulate", "not-a-scenario"])
    assert rc == 2
    assert "scenario error" in capsys.readouterr().err


def test_compare_embeddings(tmp_path, capsys):
    rc = main(
        ["compare-embeddings", "pendulum", "--t-end", "1.0", "--out", str(tmp_path)]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "[PASS] equivalence" in out
    assert "[PASS] chart-inversion" in out


def test_compare_embeddings_nonholonomic(capsys):
    rc = main(["compare-embeddings", "knife-edge", "--t-end", "0.5"])
    assert rc == 1
    assert "no embedding" in capsys.readouterr().out


def test_scenario_from_file(tmp_path, capsys):
    doc = {
        "name": "wire-copy",
        "mass": {"matrix": [[1.0, 0.0], [0.0, 1.0]]},
        "force": {"type": "none"},
        "constraint": {"type": "rotating-line", "omega": 1.0},
        "embedding": {"type": "rotating-line", "omega": 1.0},
        "initial": {"t": 0.0, "y": [1.0], "w": [0.0]},
        "integrator": {"method": "rk4-fixed", "dt": 1e-3},
    }
    p = tmp_path / "wire.json"
    p.write_text(json.dumps(doc), encoding="utf-8")
    rc = main(["simulate", str(p), "--t-end", "0.05", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "wire-copy_trajectory.csv").exists()


def test_dt_override_changes_sample_count(tmp_path, capsys):
    main(["simulate", "pendulum", "--t-end", "0.1", "--dt", "0.05", "--out", str(tmp_path)])
    lines = (tmp_path / "pendulum_trajectory.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + 3


def test_console_script_installed():
    import shutil
    import subprocess

    exe = shutil.which("cdyn")
    if exe is None:
        pytest.skip("console script not on PATH")
    proc = subprocess.run(
        [exe, "reactions", "pendulum", "--state", "0,-1,2,0"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["Lambda"] == [-14.0]
