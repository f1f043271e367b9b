import json
import subprocess
import sys

import numpy as np
import pytest

from cnspe.cli import build_parser, main

CFG = "N = 3\ngamma = 2\neps = 0.1\ndelta = 0.1\nb = 11\nn_cells = 128\nt_end = 0.2\noutput_every = 5\n"


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "bump.cfg"
    p.write_text(CFG + "scenario = gaussian-bump\n")
    return p


def test_run_writes_outputs(cfg, tmp_path, capsys):
    assert main(["--out", str(tmp_path), "run", "--config", str(cfg), "--id", "a"]) == 0
    out = tmp_path / "runs" / "a"
    for name in ("snapshots.csv", "diagnostics.csv", "verdicts.json", "report.json"):
        assert (out / name).exists()
    v = json.loads((out / "verdicts.json").read_text())
    assert all(v["verdicts"].values())
    snaps = np.genfromtxt(out / "snapshots.csv", delimiter=",", names=True)
    assert set(snaps.dtype.names) == {"t", "r", "rho", "u", "phir", "phi"}
    assert len(snaps) % 128 == 0
    assert "PASS" in capsys.readouterr().out


def test_plot_reads_run(cfg, tmp_path):
    main(["--out", str(tmp_path), "run", "--config", str(cfg), "--id", "a"])
    for what in ("energy", "bd", "profile"):
        assert main(["--out", str(tmp_path), "plot", "--run", "a", "--what", what]) == 0
        data = np.loadtxt(tmp_path / "runs" / "a" / f"plot_{what}.dat")
        assert data.shape[1] == 2


def test_sweep_command(tmp_path):
    p = tmp_path / "s.cfg"
    p.write_text(CFG.replace("n_cells = 128", "n_cells = 64") + "output_dt = 0.1\nscenario = equilibrium\n")
    assert main(["--out", str(tmp_path), "sweep", "--config", str(p), "--axis", "eps"]) == 0
    rep = json.loads((tmp_path / "runs" / "s-eps" / "report.json").read_text())
    assert rep["ladder"] == [0.1, 0.05, 0.025]


def test_check_entropy_suite(capsys):
    assert main(["check", "--suite", "entropy", "--quick"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_parser_rejects_bad_axis():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["sweep", "--config", "x", "--axis", "gamma"])


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "cnspe.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "sweep" in res.stdout
