from __future__ import annotations

import json
import os
import subprocess
import sys

import pytest

from combagg.cli import main
from combagg.lattice import Region
from combagg.sandpile import sandpile


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_sim_idla_single_vertex(capsys):
    code, out, _ = run(capsys, "sim", "idla", "--n", "1", "--seed", "7")
    assert code == 0
    assert out == "x,y\n0,0\n"


def test_sim_rotor_three(capsys):
    code, out, _ = run(capsys, "sim", "rotor", "--n", "3", "--rotors", "all-first")
    assert code == 0
    assert set(Region.from_csv(out)) == {(0, 0), (0, 1), (-1, 0)}


def test_sim_sandpile_writes_files(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, _, _ = run(capsys, "sim", "sandpile", "--n", "1000", "--tol", "1e-9", "--out", str(out))
    assert code == 0
    cluster = Region.from_csv(out)
    assert cluster == sandpile(1000, stop_tol=1e-9).cluster
    meta = json.loads((tmp_path / "s.json").read_text())
    assert meta["model"] == "sandpile" and meta["cluster_size"] == len(cluster)
    assert (tmp_path / "s.odometer.csv").read_text().startswith("x,y,value\n")
    assert (tmp_path / "s.mass.csv").exists()


def test_sim_seed_replay(capsys):
    _, a, _ = run(capsys, "sim", "idla", "--n", "300", "--seed", "11")
    _, b, _ = run(capsys, "sim", "idla", "--n", "300", "--seed", "11")
    _, c, _ = run(capsys, "sim", "idla", "--n", "300", "--seed", "12")
    assert a == b and a != c


def test_sim_json_metadata(capsys):
    code, out, _ = run(capsys, "sim", "rotor", "--n", "7", "--graph", "line", "--format", "json")
    meta = json.loads(out)
    assert code == 0 and meta["extents"]["xmin"] == -3 and meta["extents"]["xmax"] == 3


def test_rotor_file_preset(tmp_path, capsys):
    path = tmp_path / "r.csv"
    path.write_text("x,y,index\n0,0,1\n")
    code, out, _ = run(capsys, "sim", "rotor", "--n", "2", "--rotors", f"file:{path}")
    assert code == 0 and set(Region.from_csv(out)) == {(0, 0), (-1, 0)}


def test_config_errors(capsys, tmp_path):
    assert run(capsys, "sim", "rotor", "--n", "3", "--rotors", "file:/does/not/exist")[0] == 2
    assert run(capsys, "sim", "idla", "--n", "3", "--graph", "line")[0] == 2
    with pytest.raises(SystemExit) as info:
        main(["sim", "idla", "--n", "3", "--bogus"])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        main(["sim", "idla", "--n", "0"])
    with pytest.raises(SystemExit):
        main(["kernel", "--z", "1.5"])


def test_verify_kernel_report(capsys):
    code, out, _ = run(capsys, "verify", "kernel", "--tmax", "40")
    rep = json.loads(out)
    assert rep["max_coefficient_error"] <= 1e-10
    # exit code follows the overall verdict
    assert code == (0 if rep["pass"] else 1)


def test_verify_line_regular_small(capsys):
    code, out, _ = run(capsys, "verify", "line-regular", "--n", "999")
    assert code == 0 and json.loads(out)["pass"]


def test_kernel_json(capsys):
    code, out, _ = run(capsys, "kernel", "--z", "0.5")
    rep = json.loads(out)
    assert code == 0 and set(rep) >= {"z", "F1", "F2", "G", "A"}
    assert rep["G"] == pytest.approx(1.1124766546, rel=1e-9)


def test_console_entry_and_log_env(tmp_path):
    env = dict(os.environ, AGG_LOG="info")
    proc = subprocess.run(
        [sys.executable, "-m", "combagg.cli", "sim", "idla", "--n", "5", "--seed", "1"],
        capture_output=True, text=True, env=env, check=False,
    )
    assert proc.returncode == 0
    assert "INFO" in proc.stderr
    bad = dict(os.environ, AGG_LOG="chatty")
    proc = subprocess.run([sys.executable, "-m", "combagg.cli", "kernel", "--z", "0.5"], capture_output=True, env=bad)
    assert proc.returncode == 2
