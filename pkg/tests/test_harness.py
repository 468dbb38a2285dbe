"""Config strictness, artifact layout, reproducibility, sweeps, reports."""

import json
from pathlib import Path

import numpy as np
import pytest

from gassphere import ConfigError, diagnostics, harness, initial_data, scheme
from gassphere.harness import RunConfig, config_from_dict, load_config

BASE = {
    "N": 32,
    "t_end": 20.0,
    "sample_interval": 0.5,
    "epsilon": 0.01,
    "shape_params": [0.5],
}


@pytest.fixture(scope="module")
def success_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "ok"
    cfg = config_from_dict({**BASE, "out_dir": str(out)})
    code = harness.run_experiment(cfg)
    return cfg, out, code


def read_meta(out: Path):
    return [json.loads(l) for l in (out / "metadata.jsonl").read_text().splitlines()]


def test_defaults_round_trip():
    cfg = config_from_dict({})
    assert cfg == RunConfig()
    assert cfg.alphas() == (0.5, 1.5, 2.0)
    assert cfg.window() == (50.0, 200.0)


def test_unknown_key_is_fatal_and_named():
    with pytest.raises(ConfigError, match="gamm"):
        config_from_dict({"gamm": 1.5})


def test_gamma_range_enforced():
    with pytest.raises(ConfigError, match="4/3"):
        config_from_dict({"gamma": 1.2})
    with pytest.raises(ConfigError, match="stability range"):
        config_from_dict({"gamma": 2.0})
    cfg = config_from_dict({"gamma": 2.0, "allow_edge": True, "total_mass": 1.0})
    assert cfg.gamma == 2.0
    with pytest.raises(ConfigError, match="stability range"):
        config_from_dict({"gamma": 2.1, "allow_edge": True})


@pytest.mark.parametrize(
    "raw, match",
    [
        ({"lambda1": 0.0}, "positive"),
        ({"lambda2": -1.0}, "positive"),
        ({"N": 8}, "minimum"),
        ({"family": "square_wave"}, "not one of"),
        ({"epsilon": float("inf")}, "finite"),
        ({"mode": "leapfrog"}, "unknown"),
        ({"dt": -0.5}, "positive"),
        ({"cfl_safety": 1.5}, "cfl_safety"),
        ({"max_steps": 0}, "at least 1"),
        ({"t_end": 0.0}, "positive"),
        ({"sample_interval": 0.0}, "positive"),
        ({"theta": 0.5}, "theta"),
        ({"alpha_list": [2.5]}, "alpha"),
        ({"delta": 1.0}, "delta"),
        ({"fit_window": [10.0, 5.0]}, "increasing"),
        ({"fit_slack": -0.1}, "nonnegative"),
        ({"profile_tol": 1.0}, "profile_tol"),
    ],
)
def test_constraint_violations(raw, match):
    with pytest.raises(ConfigError, match=match):
        config_from_dict(raw)


@pytest.mark.parametrize(
    "raw, match",
    [
        ({"N": 20.5}, "integer"),
        ({"N": True}, "integer"),
        ({"gamma": True}, "number"),
        ({"gamma": "wide"}, "number"),
        ({"family": 3}, "string"),
        ({"allow_edge": "yes"}, "true/false"),
        ({"shape_params": 5}, "list"),
    ],
)
def test_type_coercion_errors(raw, match):
    with pytest.raises(ConfigError, match=match):
        config_from_dict(raw)


def test_load_config_json(tmp_path):
    p = tmp_path / "run.json"
    p.write_text(json.dumps({"gamma": 1.8, "N": 64, "epsilon": -0.02}))
    cfg = load_config(p)
    assert cfg == config_from_dict({"gamma": 1.8, "N": 64, "epsilon": -0.02})
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  'gamma': 1.5\n}")
    with pytest.raises(ConfigError, match="line"):
        load_config(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="top level"):
        load_config(arr)


def test_run_writes_all_artifacts(success_run):
    cfg, out, code = success_run
    assert code == 0
    for name in ("profile.csv", "timeseries.csv", "metadata.jsonl", "decay_fits.json"):
        assert (out / name).is_file()
    meta = read_meta(out)
    assert [m["kind"] for m in meta] == ["config", "compatibility", "result"]
    echo = meta[0]["config"]
    assert echo["gamma"] == cfg.gamma
    assert echo["alpha_list"] == [0.5, 1.5, 2.0]
    assert echo["fit_window"] == [5.0, 20.0]
    assert echo["shape_params"] == [0.5]
    assert meta[1]["passed"] is True
    result = meta[2]
    assert result["exit_code"] == 0
    assert result["termination"] == "t_end"
    assert result["wall_time_s"] > 0.0
    finals = result["final"]
    assert finals["samples"] == 41
    assert finals["steps"] >= finals["samples"]
    assert set(finals["F_alpha"]) == {"0.5", "1.5", "2"}
    assert finals["E_N"] >= 0.0


def test_timeseries_layout(success_run):
    _, out, _ = success_run
    lines = (out / "timeseries.csv").read_text().splitlines()
    header = json.loads(lines[0][2:])
    assert header["schema_version"] == harness.SCHEMA_VERSION
    assert header["columns"] == list(diagnostics.record_fields())
    assert lines[1] == ",".join(diagnostics.record_fields())
    data = np.genfromtxt(out / "timeseries.csv", delimiter=",", names=True, skip_header=1)
    assert data.dtype.names == tuple(diagnostics.record_fields())
    assert data.shape[0] == 41
    assert data["t"][0] == 0.0
    assert data["t"][-1] == 20.0
    for name in data.dtype.names:
        assert np.all(np.isfinite(data[name]))


def test_decay_fit_artifact_schema(success_run):
    cfg, out, _ = success_run
    fits = json.loads((out / "decay_fits.json").read_text())
    assert fits["schema_version"] == harness.SCHEMA_VERSION
    assert fits["window"] == [5.0, 20.0]
    assert fits["gamma"] == cfg.gamma
    assert set(fits["fits"]) == {q for q, _ in harness.FIT_QUANTITIES}
    table = diagnostics.theoretical_exponents(cfg.gamma, cfg.theta)
    for quantity, floor_name in harness.FIT_QUANTITIES:
        info = fits["fits"][quantity]
        assert info["theoretical_floor"] == getattr(table, floor_name)
        assert isinstance(info["passed"], bool)
        assert np.isfinite(info["fitted_exponent"])


def test_rerun_is_byte_identical(success_run, tmp_path):
    cfg, out, _ = success_run
    import dataclasses

    cfg2 = dataclasses.replace(cfg, out_dir=str(tmp_path / "again"))
    assert harness.run_experiment(cfg2) == 0
    for name in ("profile.csv", "timeseries.csv", "decay_fits.json"):
        assert (out / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_equilibrium_series_pass_by_noise_floor(tmp_path):
    cfg = config_from_dict({**BASE, "epsilon": 0.0, "out_dir": str(tmp_path / "eq")})
    assert harness.run_experiment(cfg) == 0
    fits = json.loads((tmp_path / "eq" / "decay_fits.json").read_text())
    for info in fits["fits"].values():
        assert info["note"] == "decayed below floating noise"
        assert info["passed"] is True
        assert info["fitted_exponent"] == "inf"


def test_blow_up_leaves_failure_record(tmp_path):
    cfg = config_from_dict(
        {
            **BASE,
            "epsilon": 0.5,
            "shape_params": [0.9],
            "lambda1": 0.01,
            "lambda2": 0.01,
            "t_end": 10.0,
            "out_dir": str(tmp_path / "blow"),
        }
    )
    code = harness.run_experiment(cfg)
    assert code == 5
    out = tmp_path / "blow"
    for name in ("profile.csv", "timeseries.csv", "metadata.jsonl", "decay_fits.json"):
        assert (out / name).is_file()
    meta = read_meta(out)
    assert meta[-1]["kind"] == "failure"
    assert meta[-1]["exit_code"] == 5
    assert "BlowUpError" in meta[-1]["error"]
    fits = json.loads((out / "decay_fits.json").read_text())
    assert "BlowUpError" in fits["run_error"]
    # the partial time series keeps every sample taken before the abort
    rows = (out / "timeseries.csv").read_text().splitlines()[2:]
    assert len(rows) >= 2
    last = float(rows[-1].split(",")[1])
    first = float(rows[0].split(",")[1])
    assert last > 1.0e4 * first


def test_fit_report_matches_run_artifact(success_run):
    cfg, out, _ = success_run
    rep = harness.fit_report(out / "timeseries.csv", gamma=cfg.gamma)
    disk = json.loads((out / "decay_fits.json").read_text())
    assert rep["fits"] == disk["fits"]
    assert rep["window"] == disk["window"]
    with pytest.raises(ConfigError, match="not found"):
        harness.fit_report(out / "missing.csv", gamma=1.5)


def test_describe_initial_data(tmp_path, prof15, bg64):
    cfg = config_from_dict({**BASE, "N": 64})
    path = tmp_path / "ic.csv"
    harness.describe_initial_data(cfg, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,r0,v0,rx"
    assert len(lines) == 1 + 65
    data = np.genfromtxt(path, delimiter=",", names=True)
    state = initial_data.build_perturbation(prof15, bg64, cfg.perturbation())
    assert np.allclose(data["r0"], state.r, rtol=0, atol=1.0e-15 * bg64.radius)
    assert data["v0"][0] == 0.0
    assert np.all(data["rx"] > 0.0)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv(harness.WORKERS_ENV, "3")
    assert harness.worker_count(8) == 3
    assert harness.worker_count(2) == 2
    monkeypatch.setenv(harness.WORKERS_ENV, "0")
    with pytest.raises(ConfigError, match="at least 1"):
        harness.worker_count(4)
    monkeypatch.setenv(harness.WORKERS_ENV, "many")
    with pytest.raises(ConfigError, match="not an integer"):
        harness.worker_count(4)
    monkeypatch.delenv(harness.WORKERS_ENV)
    assert 1 <= harness.worker_count(2) <= 2


def test_sweep_axis_validation(tmp_path):
    base = config_from_dict({**BASE, "out_dir": str(tmp_path / "sw")})
    with pytest.raises(ConfigError, match="at least one axis"):
        harness.sweep(base, {})
    with pytest.raises(ConfigError, match="unknown sweep axis"):
        harness.sweep(base, {"gamm": [1.5]})
    with pytest.raises(ConfigError, match="out_dir"):
        harness.sweep(base, {"out_dir": ["a"]})
    with pytest.raises(ConfigError, match="empty"):
        harness.sweep(base, {"gamma": []})
    with pytest.raises(ConfigError, match="4/3"):
        harness.sweep(base, {"gamma": [1.2]})


def test_sweep_grid_runs_and_aggregates(tmp_path, monkeypatch):
    monkeypatch.setenv(harness.WORKERS_ENV, "4")
    root = tmp_path / "grid"
    base = config_from_dict({**BASE, "out_dir": str(root)})
    res = harness.sweep(base, {"gamma": [1.5, 1.8], "epsilon": [0.01, -0.01]})
    assert res.exit_codes == (0, 0, 0, 0)
    assert len(res.rows) == 4
    agg = Path(res.aggregate_path)
    assert agg == root / "aggregate.csv"
    lines = agg.read_text().splitlines()
    quantities = [q for q, _ in harness.FIT_QUANTITIES]
    assert lines[0] == ",".join(
        ["point", "gamma", "epsilon", "exit_code", "termination"]
        + [f"{q}_exponent" for q in quantities]
        + [f"{q}_passed" for q in quantities]
    )
    assert len(lines) == 5
    # each point runs isolated in its own labeled directory with full artifacts
    for row in res.rows:
        sub = root / row[0]
        assert row[0].startswith("point-")
        assert row[3] == "0"
        assert row[4] == "t_end"
        for name in ("profile.csv", "timeseries.csv", "metadata.jsonl", "decay_fits.json"):
            assert (sub / name).is_file()
    # a sweep point is the same computation as a standalone run
    import dataclasses

    first = root / res.rows[0][0]
    solo = dataclasses.replace(base, out_dir=str(tmp_path / "solo"))
    assert harness.run_experiment(solo) == 0
    assert (first / "decay_fits.json").read_bytes() == (
        tmp_path / "solo" / "decay_fits.json"
    ).read_bytes()
    assert (first / "timeseries.csv").read_bytes() == (
        tmp_path / "solo" / "timeseries.csv"
    ).read_bytes()


def test_run_linearize_artifact(tmp_path):
    cfg = config_from_dict(
        {**BASE, "t_end": 5.0, "sample_interval": 0.25, "out_dir": str(tmp_path / "lin")}
    )
    assert harness.run_linearize(cfg) == 0
    out = tmp_path / "lin"
    lines = (out / "linear_timeseries.csv").read_text().splitlines()
    header = json.loads(lines[0][2:])
    assert header["columns"] == ["t", "energy", "dissipation", "sup_w", "sup_wt"]
    data = np.genfromtxt(out / "linear_timeseries.csv", delimiter=",", names=True, skip_header=1)
    assert data.shape[0] == 21
    assert data["t"][-1] == 5.0
    assert np.all(np.diff(data["energy"]) <= 1.0e-9 * data["energy"][0])
    meta = read_meta(out)
    assert meta[0]["flavor"] == "linearized"
    assert meta[-1]["kind"] == "result"
    assert meta[-1]["coercive"] is True
