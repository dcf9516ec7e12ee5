import subprocess
import sys

import numpy as np
import pytest

from fcsl.cli import main, run
from fcsl.config import parse_config
from fcsl.io import read_csv, read_snapshot

SIM = """
[model]
name = "burgers_frac"
[model.noise]
K = 4
[solver]
n = 32
t_end = 0.05
seed = 7
[experiment]
n_paths = 3
snapshot_every = 5
"""


def test_simulate_twice_byte_identical(tmp_path):
    cfg = parse_config(SIM)
    assert run("simulate", cfg, tmp_path / "a") == 0
    assert run("simulate", cfg, tmp_path / "b", threads=2) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "trajectory.csv" in files and any(f.endswith(".fcsl") for f in files)
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    snap = read_snapshot(next((tmp_path / "a").glob("snapshot_p0001_*.fcsl")))
    assert snap.seed == 7 and snap.n == 32


def test_resolved_config_reproduces_run(tmp_path):
    assert run("simulate", parse_config(SIM), tmp_path / "a", seed_override=11) == 0
    again = parse_config((tmp_path / "a" / "resolved_config.toml").read_text())
    assert again.solver_section["seed"] == 11
    assert run("simulate", again, tmp_path / "b") == 0
    for p in (tmp_path / "a").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_check_trivial_contraction_passes(tmp_path):
    text = """
[model]
name = "burgers_frac"
[solver]
n = 32
t_end = 0.05
[experiment]
check = "contraction"
n_paths = 2
u0_b = { shape = "sine" }
"""
    assert run("check", parse_config(text), tmp_path) == 0
    header, rows = read_csv(tmp_path / "summary.csv")
    assert header[:2] == ["name", "passed"] and rows == [["contraction", "1", "0", "1e-10", "2", rows[0][5]]]
    assert (tmp_path / "check_contraction_detail.csv").exists()


def test_check_nld_degenerate_exit_zero(tmp_path, capsys):
    text = """
[model]
name = "linear_advection"
[experiment]
check = ["nld"]
"""
    assert run("check", parse_config(text), tmp_path) == 0
    _, rows = read_csv(tmp_path / "summary.csv")
    assert rows[0][0] == "nld" and rows[0][1] == "1" and "degenerate" in rows[0][5]


def test_failed_check_exit_code(tmp_path):
    # a repeated top level gives d_0 = 0, so the distances cannot decrease strictly
    text = """
[model]
name = "burgers_frac"
[solver]
n = 32
t_end = 0.05
[experiment]
check = "viscosity"
tau_ladder = [0.01, 0.01, 0.005]
n_paths = 1
"""
    assert run("check", parse_config(text), tmp_path) == 1
    assert run("report", parse_config(text), tmp_path) == 1
    header, rows = read_csv(tmp_path / "report.csv")
    assert rows[0][:3] == ["check", "viscosity", "0"]


def test_ergodic_and_report(tmp_path):
    text = """
[model]
name = "burgers_frac"
[model.noise]
family = "trig"
[solver]
n = 32
[experiment]
T = 14.0
burn_in = 2.0
stride = 0.5
"""
    cfg = parse_config(text)
    assert run("ergodic", cfg, tmp_path) == 0
    header, rows = read_csv(tmp_path / "samples.csv")
    assert header[0] == "time" and len(rows) == 24
    _, dist = read_csv(tmp_path / "distance.csv")
    d = np.array([float(r[1]) for r in dist])
    assert np.all(np.diff(d) <= 1e-12)
    assert run("report", cfg, tmp_path) == 0
    assert (tmp_path / "report.csv").exists()


def test_main_errors(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[solver]\nviscocity = 1\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "did you mean 'tau'" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.toml")]) == 2
    assert "missing.toml" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(SIM)
    out = subprocess.run([sys.executable, "-m", "fcsl.cli", "simulate", "--config", str(cfg),
                          "--out", str(tmp_path / "o"), "--threads", "2"],
                         capture_output=True, text=True, env={"FCSL_LOG": "error", "PATH": ""})
    assert out.returncode == 0, out.stderr
