import csv
import subprocess
import sys

import numpy as np
import pytest

from chnl.cli import main
from chnl.config import parse_config
from chnl.io import read_checkpoint, read_snapshot

CFG = """\
mode = fourth
cells = 32
potential = logarithmic
lambda = 3
sigma = 1e-3
coefficient = constant
a0 = 1e-3
initial = noise
amplitude = 0.2
seed = 4
tau = 2e-4
t_end = 2e-3
checkpoint_every = 5
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(CFG + f"out = {tmp_path / 'out'}\n")
    return p


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_writes_outputs(cfg, tmp_path):
    assert main(["run", str(cfg), "--quiet"]) == 0
    out = tmp_path / "out"
    names = sorted(p.name for p in out.iterdir())
    assert {"config.cfg", "diagnostics.csv", "u_000000.snap", "u_final.snap", "checkpoint_000005.chkp"} <= set(names)
    assert parse_config(out / "config.cfg") == parse_config(cfg)
    r = rows(out / "diagnostics.csv")
    assert r[0][0] == "t" and len(r) == 12
    mass = np.array([float(x[r[0].index("mass")]) for x in r[1:]])
    assert np.max(np.abs(mass - mass[0])) <= 1e-10
    u, t = read_snapshot(out / "u_final.snap")
    assert t == 2e-3 and u.domain.cells == (32,)


def test_steady_state_demo_config(tmp_path):
    assert main(["run", "demos/configs/steady_state.cfg", "--out", str(tmp_path), "--quiet"]) == 0
    r = rows(tmp_path / "diagnostics.csv")
    e = {x[r[0].index("energy")] for x in r[1:]}
    assert len(e) == 1


def test_resume_matches_uninterrupted(cfg, tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--quiet"]) == 0
    full = (out / "diagnostics.csv").read_text()
    final = (out / "u_final.snap").read_bytes()
    assert main(["resume", str(out / "checkpoint_000005.chkp"), str(cfg), "--quiet"]) == 0
    assert (out / "diagnostics.csv").read_text() == full
    assert (out / "u_final.snap").read_bytes() == final
    t, tau, _, _ = read_checkpoint(out / "checkpoint_000010.chkp")
    assert t == pytest.approx(2e-3) and tau == 2e-4


def test_seed_override_changes_run(cfg, tmp_path):
    assert main(["run", str(cfg), "--seed", "5", "--out", str(tmp_path / "a"), "--quiet"]) == 0
    assert main(["run", str(cfg), "--seed", "5", "--out", str(tmp_path / "b"), "--quiet"]) == 0
    assert main(["run", str(cfg), "--out", str(tmp_path / "c"), "--quiet"]) == 0
    a = (tmp_path / "a" / "diagnostics.csv").read_text()
    assert a == (tmp_path / "b" / "diagnostics.csv").read_text()
    assert a != (tmp_path / "c" / "diagnostics.csv").read_text()


@pytest.mark.parametrize(
    "extra, where",
    [("bogus = 1\n", "config.parse_config"), ("delta = 1e-3\n", "config.parse_config")],
)
def test_bad_config_exits_1(tmp_path, capsys, extra, where):
    p = tmp_path / "bad.cfg"
    p.write_text(CFG + extra)
    assert main(["run", str(p), "--quiet"]) == 1
    err = capsys.readouterr().err
    assert err.startswith("chnl run: " + where)


def test_missing_config_exits_1(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.cfg"), "--quiet"]) == 1


def test_step_failure_exits_2(tmp_path, capsys):
    p = tmp_path / "fail.cfg"
    text = CFG.replace("tau = 2e-4", "tau = 0.5").replace("t_end = 2e-3", "t_end = 1")
    p.write_text(text + f"newton_max = 1\ntau_min = 0.25\nout = {tmp_path}\n")
    assert main(["run", str(p), "--quiet"]) == 2
    assert "stepper.run" in capsys.readouterr().err
    assert (tmp_path / "diagnostics.csv").exists()


def test_dispersion_command(tmp_path, capsys):
    assert main(["dispersion", "demos/configs/dispersion.cfg", "--out", str(tmp_path), "--modes", "1", "2"]) == 0
    r = rows(tmp_path / "dispersion.csv")
    assert [x[0] for x in r[1:]] == ["1", "2"]
    assert all(float(x[-1]) <= 1e-2 for x in r[1:])
    assert main(["dispersion", str(tmp_path.parent / "x.cfg")]) == 1


def test_dispersion_needs_linear_setup(cfg, capsys):
    assert main(["dispersion", str(cfg), "--quiet"]) == 1
    assert "diagnostics.dispersion_check" in capsys.readouterr().err


def test_sweep_delta_command(cfg, tmp_path, capsys):
    p = tmp_path / "s.cfg"
    p.write_text(CFG.replace("a0 = 1e-3", "a0 = 1") + f"out = {tmp_path / 's'}\n")
    assert main(["sweep-delta", str(p), "--ladder", "1e-2,1e-3,1e-4", "--quiet"]) == 0
    r = rows(tmp_path / "s" / "sweep.csv")
    d = [float(x[1]) for x in r[1:]]
    assert len(d) == 2 and d[1] < d[0]
    # a constant coefficient is concave, so the guard passes
    assert main(["sweep-delta", str(p), "--ladder", "1e-2,1e-3", "--require-concave", "--quiet"]) == 0
    with pytest.raises(SystemExit):
        main(["sweep-delta", str(p), "--ladder", "1e-2"])


def test_refine_rejects_noise(cfg, capsys):
    assert main(["refine", str(cfg), "--levels", "2", "--quiet"]) == 1


def test_check_command(capsys):
    assert main(["check", "--module", "grid", "--module", "cli"]) == 0
    out = capsys.readouterr().out
    assert "PASS  grid" in out and "PASS  cli" in out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "chnl", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "sweep-delta" in res.stdout
