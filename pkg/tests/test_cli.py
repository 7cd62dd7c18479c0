"""Command-line interface: artifacts, exit codes, error paths."""

import json
import re
import subprocess
import sys

import pytest

from avgeuler import cli


SEVENTEEN_DIGITS = re.compile(r"-?\d\.\d{16}e[+-]\d{2}")


def write_config(tmp_path, **overrides):
    payload = dict(seed=7, N=2, M=64, T=0.2, dt=0.05)
    payload.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload))
    return str(path)


def read_report(out_dir):
    return json.loads((out_dir / "report.json").read_text())


# ---------------------------------------------------------------------------
# Subcommands, artifacts, exit code 0
# ---------------------------------------------------------------------------

def test_sample_writes_jsonl(tmp_path):
    cfg = write_config(tmp_path, M=5)
    assert cli(["sample", "--config", cfg, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "samples.jsonl").read_text().strip().splitlines()
    assert len(lines) == 5
    row = json.loads(lines[0])
    assert {"N", "a", "s", "modes", "re", "im"} <= set(row)


def test_sample_fixed_energy(tmp_path):
    cfg = write_config(tmp_path, M=3, measure="nu", r=1.0)
    assert cli(["sample", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "samples.jsonl").read_text().strip().splitlines()) == 3


def test_evolve_artifacts(tmp_path):
    cfg = write_config(tmp_path, T=0.5)
    assert cli(["evolve", "--config", cfg, "--out", str(tmp_path)]) == 0
    traj = (tmp_path / "trajectory.jsonl").read_text().strip().splitlines()
    assert json.loads(traj[0])["t"] == 0.0
    cons = (tmp_path / "conservation.csv").read_text().splitlines()
    assert cons[0].split(",")[0] == "t"
    assert SEVENTEEN_DIGITS.search(cons[1])
    rep = read_report(tmp_path)
    assert rep["experiment"] == "evolve"
    assert {"config", "results", "provenance"} <= set(rep)


def test_evolve_conservation_breach_exits_2(tmp_path):
    cfg = write_config(tmp_path, N=4, T=2.0, dt=0.5, scheme="rk4",
                       conservation_tol=1e-13)
    assert cli(["evolve", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_invariance_artifacts(tmp_path):
    cfg = write_config(tmp_path, M=256)
    assert cli(["invariance", "--config", cfg, "--out", str(tmp_path)]) == 0
    moments = (tmp_path / "invariance_moments.csv").read_text().splitlines()
    assert moments[0].startswith("k1,k2,theory_second_moment")
    assert read_report(tmp_path)["results"]["passed"] is True


def test_surface_artifacts(tmp_path):
    cfg = write_config(tmp_path, M=256)
    assert cli(["surface", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "surface_moments.csv").exists()
    assert read_report(tmp_path)["results"]["passed"] is True


def test_recurrence_artifacts(tmp_path):
    cfg = write_config(tmp_path, M=1, T_max=20.0)
    assert cli(["recurrence", "--config", cfg, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "distances.jsonl").read_text().strip().splitlines()
    first = json.loads(lines[0])
    assert set(first) == {"t", "dist_sq"}
    assert SEVENTEEN_DIGITS.search(lines[1])
    assert "return_times" in read_report(tmp_path)["results"]


def test_density_artifacts(tmp_path):
    cfg = write_config(tmp_path)
    assert cli(["density", "--config", cfg, "--out", str(tmp_path),
                "--points", "64"]) == 0
    rows = (tmp_path / "density.csv").read_text().splitlines()
    assert rows[0] == "r,rho"
    assert len(rows) == 65
    assert SEVENTEEN_DIGITS.search(rows[2])


def test_convergence_artifacts(tmp_path):
    cfg = write_config(tmp_path, N=4, M=128, T=0.5, dt=0.1,
                       N_small=[2], N_large=4)
    assert cli(["convergence", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "convergence.csv").read_text().splitlines()
    assert rows[0] == "n_small,estimate,standard_error"


def test_convergence_non_decreasing_exits_2(tmp_path):
    # deliberately reversed refinement order: estimates cannot decrease
    cfg = write_config(tmp_path, N=8, M=64, T=0.5, dt=0.1,
                       N_small=[4, 2], N_large=8)
    assert cli(["convergence", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_coeffs_artifacts(tmp_path):
    cfg = write_config(tmp_path)
    assert cli(["coeffs", "--config", cfg, "--out", str(tmp_path),
                "--k", "1,1"]) == 0
    rows = (tmp_path / "coeffs.csv").read_text().splitlines()
    assert rows[0] == "h1,h2,one_sided_coeff,conserving_coeff"
    assert len(rows) > 1


# ---------------------------------------------------------------------------
# Usage and IO failures, exit code 1
# ---------------------------------------------------------------------------

def test_unknown_subcommand_exits_1(tmp_path):
    assert cli(["frobnicate"]) == 1


def test_missing_config_flag_exits_1():
    assert cli(["sample"]) == 1


def test_unreadable_config_exits_1(tmp_path):
    assert cli(["sample", "--config", str(tmp_path / "nope.json"),
                "--out", str(tmp_path)]) == 1


def test_invalid_json_config_exits_1(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert cli(["sample", "--config", str(path), "--out", str(tmp_path)]) == 1


def test_config_missing_seed_exits_1(tmp_path):
    path = tmp_path / "noseed.json"
    path.write_text(json.dumps(dict(N=2, M=4, T=0.1, dt=0.05)))
    assert cli(["sample", "--config", str(path), "--out", str(tmp_path)]) == 1


def test_config_unknown_key_exits_1(tmp_path):
    cfg = write_config(tmp_path, bogus_knob=1)
    assert cli(["sample", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_recurrence_without_horizon_exits_1(tmp_path):
    cfg = write_config(tmp_path, M=1)
    assert cli(["recurrence", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_coeffs_bad_mode_exits_1(tmp_path):
    cfg = write_config(tmp_path)
    assert cli(["coeffs", "--config", cfg, "--out", str(tmp_path),
                "--k", "9,9"]) == 1
    assert cli(["coeffs", "--config", cfg, "--out", str(tmp_path),
                "--k", "banana"]) == 1


def test_console_script_entry_point(tmp_path):
    cfg = write_config(tmp_path, M=2)
    proc = subprocess.run(
        [sys.executable, "-m", "avgeuler.cli", "sample",
         "--config", cfg, "--out", str(tmp_path)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "samples.jsonl").exists()
