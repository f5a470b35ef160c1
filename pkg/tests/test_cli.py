import csv
import json
from pathlib import Path

import numpy as np

from qtherm.cli import main


def read_csv(path: Path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return header, np.array(rows)


def test_trajectory_outputs_and_determinism(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    base = ["trajectory", "--seed", "1", "--tau-us", "1"]
    assert main(base + ["--out-dir", str(out1)]) == 0
    assert main(base + ["--out-dir", str(out2)]) == 0
    csv1 = (out1 / "trajectory.csv").read_bytes()
    csv2 = (out2 / "trajectory.csv").read_bytes()
    assert csv1 == csv2
    header, rows = read_csv(out1 / "trajectory.csv")
    assert header == ["t", "x", "z", "dV", "dW", "dWF", "dQ", "dU"]
    assert len(rows) == 50
    # first law row by row: dU = dW + dWF + dQ
    assert np.array_equal(rows[:, 7], rows[:, 4] + rows[:, 5] + rows[:, 6])
    sidecar = json.loads((out1 / "trajectory_config.json").read_text())
    assert sidecar["sim"]["seed"] == 1
    assert sidecar["final_outcome"] in (0, 1)
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["outputs"] == ["trajectory.csv", "trajectory_config.json"]


def test_trajectory_closed_drive_has_no_heat(tmp_path):
    out = tmp_path / "closed"
    assert main(
        ["trajectory", "--gamma-per-us", "0", "--tau-us", "2",
         "--out-dir", str(out)]
    ) == 0
    _, rows = read_csv(out / "trajectory.csv")
    assert np.abs(rows[:, 6]).max() < 1e-15  # dQ column
    assert np.abs(rows[:, 3]).max() == 0.0   # dV column


def test_ensemble_outputs(tmp_path):
    out = tmp_path / "ens"
    assert main(
        ["ensemble", "--n-traj", "400", "--tau-us", "2", "--seed", "5",
         "--out-dir", str(out)]
    ) == 0
    header, ts = read_csv(out / "timeseries.csv")
    assert header[:3] == ["t", "p00_mean", "p00_sem"]
    assert len(ts) == 101
    assert ts[0, 1] == 1.0
    header, tr = read_csv(out / "trajectories.csv")
    assert len(tr) == 400
    summary = json.loads((out / "summary.json").read_text())
    assert summary["max_first_law_residual"] < 1e-9
    lo, hi = summary["p_sum00_range"]
    assert -1.0 <= lo <= hi <= 0.0


def test_ensemble_worker_invariance(tmp_path):
    out1 = tmp_path / "w1"
    out2 = tmp_path / "w2"
    base = ["ensemble", "--n-traj", "300", "--tau-us", "1", "--seed", "9"]
    assert main(base + ["--workers", "1", "--out-dir", str(out1)]) == 0
    assert main(base + ["--workers", "3", "--out-dir", str(out2)]) == 0
    for name in ("timeseries.csv", "trajectories.csv", "summary.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_ensemble_with_feedback_reports_correlation(tmp_path):
    out = tmp_path / "fb"
    assert main(
        ["ensemble", "--n-traj", "150", "--tau-us", "2", "--feedback", "pll",
         "--delay-ns", "100", "--out-dir", str(out)]
    ) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["r_wf_q_lag0"] is not None
    assert "r_wf_q_lag5" in summary


def test_jarzynski_outputs(tmp_path):
    out = tmp_path / "jar"
    assert main(
        ["jarzynski", "--n-traj", "60", "--tau-us", "0.5", "--dt-ns", "10",
         "--feedback", "optimal", "--eta-list", "0.5,1.0",
         "--out-dir", str(out)]
    ) == 0
    for eta in ("0.5", "1"):
        header, rows = read_csv(out / f"efficacy_eta{eta}.csv")
        assert header[0] == "t" and len(rows) == 51
        assert rows[0, 1] == 1.0  # gamma_q(0) = 1
    summary = json.loads((out / "summary.json").read_text())
    assert summary["per_eta"]["1"]["gamma0"] == 1.0


def test_sweep_outputs(tmp_path):
    out = tmp_path / "sweep"
    assert main(
        ["sweep", "--n-traj", "100", "--tau-us", "6", "--feedback", "pll",
         "--gain-grid", "20,35", "--offset-grid=-1,-0.5",
         "--out-dir", str(out)]
    ) == 0
    header, rows = read_csv(out / "sweep.csv")
    assert header == ["gain", "offset", "contrast"]
    assert len(rows) == 4
    summary = json.loads((out / "summary.json").read_text())
    assert summary["best_gain"] in (20.0, 35.0)


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(
        "[physics]\ngamma_per_us = 1.7\neta = 0.35\n"
        "[numerics]\ndt_ns = 20\ntau_us = 1.0\nseed = 3\n"
        "[run]\nn_traj = 50\nout_dir = ignored\n"
    )
    out = tmp_path / "cfg"
    assert main(
        ["ensemble", "--config", str(cfg), "--seed", "4", "--out-dir", str(out)]
    ) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 4  # flag wins over file
    assert manifest["n_traj"] == 50


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[physics]\ngamma_per_us = fast\n")
    assert main(["ensemble", "--config", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "gamma_per_us" in err
    bad.write_text("[physics]\nunknown_knob = 1\n")
    assert main(["ensemble", "--config", str(bad)]) == 2
    assert "unknown_knob" in capsys.readouterr().err
    assert main(["ensemble", "--config", str(tmp_path / "absent.ini")]) == 2
    capsys.readouterr()
    # tau/dt mismatch surfaces as a config error, not a traceback
    assert main(["ensemble", "--tau-us", "1.0", "--dt-ns", "30"]) == 2
    assert "integer step count" in capsys.readouterr().err


def test_verify_passes_quickly(tmp_path):
    assert main(["verify", "--out-dir", str(tmp_path)]) == 0
