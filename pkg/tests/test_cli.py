"""Command-line surface: subcommands, flag/config merging, exit codes."""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from gassphere import ConfigError
from gassphere.cli import _parse_axis, build_parser, main

FAST = [
    "--N", "32",
    "--t-end", "2.0",
    "--sample-interval", "0.5",
    "--epsilon", "0.01",
    "--shape-params", "0.5",
]


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "sim"
    code = main(
        [
            "simulate",
            "--N", "32",
            "--t-end", "20.0",
            "--sample-interval", "0.5",
            "--epsilon", "0.01",
            "--shape-params", "0.5",
            "--out-dir", str(out),
        ]
    )
    assert code == 0
    return out


def test_parser_requires_subcommand(capsys):
    with pytest.raises(SystemExit) as e:
        build_parser().parse_args([])
    assert e.value.code == 2
    assert "usage: gassphere" in capsys.readouterr().err


def test_profile_command(tmp_path, capsys):
    out = tmp_path / "star.csv"
    code = main(["profile", "--gamma", "2.0", "--mass", "1.0", "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "R = 1.25331413732" in printed
    assert "rho(0) = 0.3989422804" in printed
    lines = out.read_text().splitlines()
    header = json.loads(lines[0][2:])
    assert header["gamma"] == 2.0
    assert lines[1] == "x,rho,q,phi"
    data = np.genfromtxt(out, delimiter=",", names=True, skip_header=1)
    assert data["x"][0] == 0.0
    assert data["rho"][-1] == 0.0


def test_simulate_writes_artifacts(sim_dir, capsys):
    for name in ("profile.csv", "timeseries.csv", "metadata.jsonl", "decay_fits.json"):
        assert (sim_dir / name).is_file()


def test_flags_override_config_file(tmp_path, capsys):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(
        json.dumps(
            {
                "N": 32,
                "epsilon": 0.02,
                "t_end": 2.0,
                "sample_interval": 0.5,
                "shape_params": [0.5],
                "out_dir": str(tmp_path / "from-file"),
            }
        )
    )
    out = tmp_path / "from-flag"
    code = main(
        ["simulate", "--config", str(cfg_file), "--epsilon", "0.01", "--out-dir", str(out)]
    )
    assert code == 0
    assert out.is_dir()
    assert not (tmp_path / "from-file").exists()
    meta = json.loads((out / "metadata.jsonl").read_text().splitlines()[0])
    assert meta["config"]["epsilon"] == 0.01  # flag wins
    assert meta["config"]["N"] == 32  # file value kept


def test_config_errors_exit_2(tmp_path, capsys):
    code = main(["simulate", "--gamma", "1.2", "--out-dir", str(tmp_path / "x")])
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")
    code = main(["simulate", "--config", str(tmp_path / "none.json")])
    assert code == 2
    assert "not found" in capsys.readouterr().err


def test_blow_up_exit_propagates(tmp_path, capsys):
    code = main(
        [
            "simulate",
            "--N", "32",
            "--t-end", "10.0",
            "--epsilon", "0.5",
            "--shape-params", "0.9",
            "--lambda1", "0.01",
            "--lambda2", "0.01",
            "--out-dir", str(tmp_path / "blow"),
        ]
    )
    assert code == 5


def test_linearize_command(tmp_path, capsys):
    out = tmp_path / "lin"
    code = main(["linearize", *FAST, "--out-dir", str(out)])
    assert code == 0
    lines = (out / "linear_timeseries.csv").read_text().splitlines()
    assert len(lines) == 2 + 5


def test_sweep_command(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("GASSPHERE_WORKERS", "2")
    root = tmp_path / "grid"
    code = main(
        ["sweep", *FAST, "--out-dir", str(root), "--axis", "epsilon=0.01,-0.01"]
    )
    assert code == 0
    lines = (root / "aggregate.csv").read_text().splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("point,epsilon,exit_code,termination")
    code = main(["sweep", *FAST, "--out-dir", str(root)])
    assert code == 2
    assert "--axis" in capsys.readouterr().err


def test_axis_parsing():
    assert _parse_axis("gamma=1.4,1.5") == ("gamma", [1.4, 1.5])
    assert _parse_axis("family=radial_dilation,velocity_kick") == (
        "family",
        ["radial_dilation", "velocity_kick"],
    )
    with pytest.raises(ConfigError, match="key=v1,v2"):
        _parse_axis("gamma")
    with pytest.raises(ConfigError, match="no values"):
        _parse_axis("gamma=")


def test_fit_command(sim_dir, tmp_path, capsys):
    code = main(["fit", "--input", str(sim_dir / "timeseries.csv"), "--gamma", "1.5"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report["fits"]) == {"sup_r_minus_x", "sup_v", "sup_vx", "L2_v"}
    out = tmp_path / "fits.json"
    code = main(
        [
            "fit",
            "--input", str(sim_dir / "timeseries.csv"),
            "--gamma", "1.5",
            "--window", "5", "20",
            "--out", str(out),
        ]
    )
    assert code == 0
    assert json.loads(out.read_text())["window"] == [5.0, 20.0]
    code = main(["fit", "--input", str(tmp_path / "none.csv"), "--gamma", "1.5"])
    assert code == 2


def test_describe_ic_command(tmp_path, capsys):
    out = tmp_path / "ic.csv"
    code = main(["describe-ic", *FAST, "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x,r0,v0,rx"
    assert len(lines) == 1 + 33


def test_console_script_installed(tmp_path):
    exe = shutil.which("gassphere")
    if exe is None:
        pytest.skip("console script not on PATH")
    res = subprocess.run(
        [exe, "profile", "--gamma", "1.5", "--mass", "5.0", "--out", str(tmp_path / "p.csv")],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0
    assert (tmp_path / "p.csv").is_file()
    assert sys.executable  # the script runs in the same environment
