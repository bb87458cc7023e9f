import subprocess
import sys

import numpy as np
import pytest

from bohmsim.cli import main
from bohmsim.io import SnapshotFile, file_sha256, read_manifest

SMALL = """
[physics]
kappa = 1
hbar = 1
[grid]
half_width = 7
n = 79
[solver]
t_end = 0.5
dt_snap = 0.01
[trajectories]
seeds = 1.4 0.5; 0.5 1.4
dt = 1e-3
out_every = 10
[vortices]
region = -3 3 -3 3
t_start = 0.3
frame_interval = 0.05
[chaos]
region = fig4R
count = 4
dt = 1e-3
out_every = 10
n_boot = 50
"""


def cli(tmp_path, cmd, text=SMALL, out="out", *extra):
    ini = tmp_path / f"{out}.ini"
    ini.write_text(text)
    return main([cmd, "--config", str(ini), "--out", str(tmp_path / out), *extra])


def test_evolve_writes_snapshots_and_manifest(tmp_path):
    assert cli(tmp_path, "evolve") == 0
    out = tmp_path / "out"
    snaps = SnapshotFile(out / "snapshots.bin")
    assert snaps.count == 51 and snaps.t_end == pytest.approx(0.5)
    man = read_manifest(out / "snapshots.manifest")
    assert man["output.snapshots_sha256"] == file_sha256(out / "snapshots.bin")
    assert man["physics.kappa"] == "1.0"
    assert (out / "history.csv").read_text().startswith("t,norm,energy\n")
    # effective.ini re-runs the same job bit for bit
    assert main(["evolve", "--config", str(out / "effective.ini"), "--out", str(tmp_path / "again")]) == 0
    assert (tmp_path / "again" / "snapshots.bin").read_bytes() == (out / "snapshots.bin").read_bytes()
    assert (tmp_path / "again" / "history.csv").read_bytes() == (out / "history.csv").read_bytes()


def test_evolve_t_end_zero(tmp_path):
    assert cli(tmp_path, "evolve", SMALL.replace("t_end = 0.5", "t_end = 0").replace("t_start = 0.3", "t_start = 0")) == 0
    snaps = SnapshotFile(tmp_path / "out" / "snapshots.bin")
    assert snaps.count == 1 and snaps.t_end == 0.0


def test_tiny_domain_is_a_numerical_failure(tmp_path, capsys):
    text = SMALL.replace("half_width = 7", "half_width = 3")
    assert cli(tmp_path, "evolve", text) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_config_errors(tmp_path):
    assert main(["evolve", "--preset", "nope", "--out", str(tmp_path / "x")]) == 2
    assert cli(tmp_path, "evolve", SMALL.replace("hbar = 1", "hbar = 0")) == 2
    assert main(["evolve", "--config", str(tmp_path / "missing.ini")]) == 2
    assert main(["traj", "--preset", "fig3", "--jobs", "0"]) == 2


def test_missing_snapshot_input_is_io_failure(tmp_path):
    text = SMALL + f"[input]\nsnapshots = {tmp_path / 'none.bin'}\n"
    assert cli(tmp_path, "traj", text) == 4


def test_traj_chains_snapshot_manifest(tmp_path):
    assert cli(tmp_path, "evolve", SMALL, "ev") == 0
    text = SMALL + f"[input]\nsnapshots = {tmp_path / 'ev' / 'snapshots.bin'}\n"
    assert cli(tmp_path, "traj", text, "tr") == 0
    man = read_manifest(tmp_path / "tr" / "traj.manifest")
    assert man["snapshots.manifest_sha256"] == file_sha256(tmp_path / "ev" / "snapshots.manifest")
    lines = (tmp_path / "tr" / "traj_000.csv").read_text().splitlines()
    assert lines[0] == "t,x,y,px,py,flag" and len(lines) == 52
    # the same run with an inline field gives the same trajectories
    assert cli(tmp_path, "traj", SMALL, "inline") == 0
    a = np.loadtxt(tmp_path / "tr" / "traj_001.csv", delimiter=",", skiprows=1, usecols=range(5))
    b = np.loadtxt(tmp_path / "inline" / "traj_001.csv", delimiter=",", skiprows=1, usecols=range(5))
    assert np.array_equal(a, b)


def test_snapshot_for_other_parameters_rejected(tmp_path):
    assert cli(tmp_path, "evolve", SMALL, "ev") == 0
    text = SMALL.replace("kappa = 1", "kappa = 0.5") + f"[input]\nsnapshots = {tmp_path / 'ev' / 'snapshots.bin'}\n"
    assert cli(tmp_path, "traj", text, "tr") == 2


@pytest.mark.property
@pytest.mark.parametrize(
    "cmd,files",
    [
        ("traj", ["traj_000.csv", "traj_001.csv"]),
        ("vortex", ["tracks.csv", "events.csv"]),
        ("chaos", ["mean_ln_xi.csv", "pairs_ln_xi.csv"]),
    ],
)
def test_csv_outputs_are_byte_deterministic(tmp_path, cmd, files):
    assert cli(tmp_path, cmd, SMALL, "a") == 0
    assert cli(tmp_path, cmd, SMALL, "b") == 0
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_chaos_manifest_reports_fit(tmp_path):
    assert cli(tmp_path, "chaos", SMALL) == 0
    man = read_manifest(tmp_path / "out" / "chaos.manifest")
    for key in ("fit.slope", "fit.intercept", "fit.residual", "fit.window", "fit.ci95"):
        assert key in man
    assert man["fit.window"] == "0.1,0.5"
    head = (tmp_path / "out" / "mean_ln_xi.csv").read_text().splitlines()
    assert head[0] == "t,mean_ln_xi,n_effective" and head[1] == "0.0,0.0,4"


def test_sweep_runs_in_subdirectories(tmp_path):
    text = SMALL.replace("kappa = 1", "kappa = 0, 1").replace("t_end = 0.5", "t_end = 0.1").replace("t_start = 0.3", "t_start = 0")
    assert cli(tmp_path, "traj", text, "sw", "--jobs", "2") == 0
    out = tmp_path / "sw"
    sweep = read_manifest(out / "sweep.manifest")
    assert sweep["points"] == "2"
    for name in ("kappa=0_hbar=1", "kappa=1_hbar=1"):
        assert (out / name / "traj_000.csv").exists()
        assert (out / name / "effective.ini").exists()
    serial = tmp_path / "serial"
    assert cli(tmp_path, "traj", text, "serial") == 0
    assert (serial / "kappa=1_hbar=1" / "traj_000.csv").read_bytes() == (out / "kappa=1_hbar=1" / "traj_000.csv").read_bytes()


def test_plot_subcommand(tmp_path):
    assert cli(tmp_path, "evolve", SMALL, "ev") == 0
    snap = str(tmp_path / "ev" / "snapshots.bin")
    args = ["plot", "--config", str(tmp_path / "ev.ini"), "--kind", "density", "--input", snap, "--times", "0 0.5"]
    assert main(args + ["--out", str(tmp_path / "p1")]) == 0
    assert main(args + ["--out", str(tmp_path / "p2")]) == 0
    a = (tmp_path / "p1" / "plot_density.svg").read_bytes()
    assert a.startswith(b"<?xml") and a == (tmp_path / "p2" / "plot_density.svg").read_bytes()
    # a snapshot file is not a ln xi table
    bad = ["plot", "--config", str(tmp_path / "ev.ini"), "--kind", "lnxi", "--input", snap, "--out", str(tmp_path / "p3")]
    assert main(bad) == 2


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "bohmsim.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("bohmsim ")
