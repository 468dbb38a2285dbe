"""Run configuration, experiment orchestration, persistence and reports.

A run directory always ends up with four artifacts: profile.csv,
timeseries.csv, metadata.jsonl and decay_fits.json.  Failures leave the
partial time series plus a failure record in the metadata, never a silent
gap.  All CSV numbers are written with 17 significant digits so reruns are
byte-identical; wall time lives only in the metadata.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import diagnostics, initial_data, integrator, linearized, polytrope, scheme
from .errors import ConfigError, GasSphereError

__all__ = [
    "SCHEMA_VERSION",
    "RunConfig",
    "SweepResult",
    "load_config",
    "config_from_dict",
    "run_experiment",
    "run_linearize",
    "sweep",
    "fit_report",
    "describe_initial_data",
    "worker_count",
]

SCHEMA_VERSION = 1

WORKERS_ENV = "GASSPHERE_WORKERS"

# time-series quantities fitted for decay, with their exponent-table floors
FIT_QUANTITIES = (
    ("sup_r_minus_x", "p_r_Linf"),
    ("sup_v", "p_u_Linf"),
    ("sup_vx", "p_ur_Linf"),
    ("L2_v", "p_v_L2"),
)


@dataclass(frozen=True)
class RunConfig:
    """One experiment; every field has a config-file key of the same name."""

    gamma: float = 1.5
    total_mass: float = 5.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    N: int = 400
    family: str = "radial_dilation"
    epsilon: float = 0.01
    shape_params: tuple = ()
    mode: str = "imex_cn"
    dt: float | None = None
    cfl_safety: float = 0.9
    max_steps: int = 10_000_000
    t_end: float = 200.0
    sample_interval: float = 0.5
    theta: float = 0.05
    alpha_list: tuple | None = None  # None -> (gamma-1, gamma, 2*gamma-1)
    delta: float = 0.5
    fit_window: tuple | None = None  # None -> (t_end/4, t_end)
    fit_slack: float = 0.05
    profile_tol: float = 1.0e-10
    out_dir: str = "runs/run"
    allow_edge: bool = False

    def alphas(self) -> tuple:
        if self.alpha_list is not None:
            return self.alpha_list
        g = self.gamma
        return (g - 1.0, g, 2.0 * g - 1.0)

    def window(self) -> tuple:
        if self.fit_window is not None:
            return self.fit_window
        return (self.t_end / 4.0, self.t_end)

    def step_policy(self) -> integrator.StepPolicy:
        return integrator.StepPolicy(
            mode=self.mode,
            dt=self.dt,
            cfl_safety=self.cfl_safety,
            t_end=self.t_end,
            max_steps=self.max_steps,
        )

    def perturbation(self) -> initial_data.PerturbationSpec:
        return initial_data.PerturbationSpec(
            family=self.family, epsilon=self.epsilon, shape_params=self.shape_params
        )


def _coerce_float(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"key {key!r}: expected a number, got {v!r}")
    return float(v)


def _coerce_optional_float(key, v):
    return None if v is None else _coerce_float(key, v)


def _coerce_int(key, v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"key {key!r}: expected an integer, got {v!r}")
    return v


def _coerce_str(key, v):
    if not isinstance(v, str):
        raise ConfigError(f"key {key!r}: expected a string, got {v!r}")
    return v


def _coerce_bool(key, v):
    if not isinstance(v, bool):
        raise ConfigError(f"key {key!r}: expected true/false, got {v!r}")
    return v


def _coerce_float_tuple(key, v):
    if v is None:
        return None
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"key {key!r}: expected a list of numbers, got {v!r}")
    return tuple(_coerce_float(key, x) for x in v)


_COERCERS = {
    "gamma": _coerce_float,
    "total_mass": _coerce_float,
    "lambda1": _coerce_float,
    "lambda2": _coerce_float,
    "N": _coerce_int,
    "family": _coerce_str,
    "epsilon": _coerce_float,
    "shape_params": _coerce_float_tuple,
    "mode": _coerce_str,
    "dt": _coerce_optional_float,
    "cfl_safety": _coerce_float,
    "max_steps": _coerce_int,
    "t_end": _coerce_float,
    "sample_interval": _coerce_float,
    "theta": _coerce_float,
    "alpha_list": _coerce_float_tuple,
    "delta": _coerce_float,
    "fit_window": _coerce_float_tuple,
    "fit_slack": _coerce_float,
    "profile_tol": _coerce_float,
    "out_dir": _coerce_str,
    "allow_edge": _coerce_bool,
}


def _validate(cfg: RunConfig) -> None:
    g = cfg.gamma
    hi_ok = g < 2.0 or (cfg.allow_edge and g == 2.0)
    if not (g > 4.0 / 3.0 and hi_ok):
        edge = "]" if cfg.allow_edge else ")"
        raise ConfigError(
            f"gamma = {g} outside the stability range (4/3, 2{edge}; compactly "
            "supported equilibria with decaying perturbations need gamma in (4/3, 2)"
        )
    if not (cfg.lambda1 > 0.0 and cfg.lambda2 > 0.0):
        raise ConfigError(
            f"viscosities must be positive: lambda1 = {cfg.lambda1}, "
            f"lambda2 = {cfg.lambda2}"
        )
    if cfg.N < 16:
        raise ConfigError(f"N = {cfg.N} below the minimum of 16 cells")
    if cfg.family not in initial_data.FAMILIES:
        raise ConfigError(
            f"family = {cfg.family!r} not one of {initial_data.FAMILIES}"
        )
    if not math.isfinite(cfg.epsilon):
        raise ConfigError(f"epsilon = {cfg.epsilon} must be finite")
    if cfg.mode not in ("explicit_rk4", "imex_be", "imex_cn"):
        raise ConfigError(f"mode = {cfg.mode!r} unknown")
    if cfg.dt is not None and not (cfg.dt > 0.0):
        raise ConfigError(f"dt = {cfg.dt} must be positive or null")
    if not (0.0 < cfg.cfl_safety <= 1.0):
        raise ConfigError(f"cfl_safety = {cfg.cfl_safety} outside (0, 1]")
    if cfg.max_steps < 1:
        raise ConfigError(f"max_steps = {cfg.max_steps} must be at least 1")
    if not (cfg.t_end > 0.0):
        raise ConfigError(f"t_end = {cfg.t_end} must be positive")
    if not (cfg.sample_interval > 0.0):
        raise ConfigError(f"sample_interval = {cfg.sample_interval} must be positive")
    cap = 2.0 * (g - 1.0) / (3.0 * g)
    if not (0.0 < cfg.theta < cap):
        raise ConfigError(
            f"theta = {cfg.theta} outside (0, 2(gamma-1)/(3 gamma) = {cap:.6g})"
        )
    for a in cfg.alphas():
        if not (0.0 <= a <= 2.0 * g - 1.0):
            raise ConfigError(
                f"alpha_list entry {a} outside [0, 2*gamma - 1 = {2.0 * g - 1.0}]"
            )
    if not (0.0 < cfg.delta < 1.0):
        raise ConfigError(f"delta = {cfg.delta} outside (0, 1)")
    wa, wb = cfg.window()
    if not (wb > wa >= 0.0):
        raise ConfigError(f"fit_window {cfg.window()} must be increasing")
    if not (cfg.fit_slack >= 0.0):
        raise ConfigError(f"fit_slack = {cfg.fit_slack} must be nonnegative")
    if not (0.0 < cfg.profile_tol <= 1.0e-4):
        raise ConfigError(f"profile_tol = {cfg.profile_tol} outside (0, 1e-4]")


def config_from_dict(raw: dict, source: str = "<dict>") -> RunConfig:
    """Strict construction: unknown keys are fatal, then constraints checked."""
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be an object")
    values = {}
    for key, v in raw.items():
        if key not in _COERCERS:
            raise ConfigError(f"{source}: unknown config key {key!r}")
        values[key] = _COERCERS[key](key, v)
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    """Read a strict JSON config file; every unknown key is an error."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p}: line {e.lineno}, column {e.colno}: {e.msg}") from e
    return config_from_dict(raw, source=str(p))


def _fmt(v) -> str:
    return "%.17g" % float(v)


def _write_profile_csv(path: Path, profile, tol: float) -> None:
    header = {
        "schema_version": SCHEMA_VERSION,
        "gamma": profile.gamma,
        "total_mass": profile.total_mass,
        "radius": profile.radius_bar_R,
        "rho_center": profile.rho_center,
        "polytropic_index": profile.polytropic_index,
        "solver_tol": tol,
    }
    with path.open("w", newline="\n") as f:
        f.write("# " + json.dumps(header, sort_keys=True) + "\n")
        f.write("x,rho,q,phi\n")
        for row in profile.eval_table:
            f.write(",".join(_fmt(v) for v in row) + "\n")


class _MetadataWriter:
    def __init__(self, path: Path):
        self._f = path.open("w", newline="\n")

    def emit(self, kind: str, payload: dict) -> None:
        line = {"schema_version": SCHEMA_VERSION, "kind": kind}
        line.update(payload)
        self._f.write(json.dumps(line, sort_keys=True) + "\n")
        self._f.flush()

    def close(self) -> None:
        self._f.close()


def _config_echo(cfg: RunConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["shape_params"] = list(cfg.shape_params)
    d["alpha_list"] = list(cfg.alphas())
    d["fit_window"] = list(cfg.window())
    return d


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def _fit_records(cfg: RunConfig, times, series) -> dict:
    """Decay fits for the standard quantities; per-quantity failures recorded."""
    table = diagnostics.theoretical_exponents(cfg.gamma, cfg.theta)
    out = {
        "schema_version": SCHEMA_VERSION,
        "window": list(cfg.window()),
        "slack": cfg.fit_slack,
        "theta": cfg.theta,
        "gamma": cfg.gamma,
        "fits": {},
    }
    t = np.asarray(times)
    for quantity, floor_name in FIT_QUANTITIES:
        floor = getattr(table, floor_name)
        try:
            fit = diagnostics.fit_decay(
                t,
                np.asarray(series[quantity]),
                cfg.window(),
                floor,
                slack=cfg.fit_slack,
                quantity=quantity,
            )
            out["fits"][quantity] = {
                "window": list(fit.window),
                "fitted_exponent": _json_safe(fit.fitted_exponent),
                "fit_residual": _json_safe(fit.fit_residual),
                "theoretical_floor": fit.theoretical_floor,
                "passed": fit.passed,
                "note": fit.note,
            }
        except GasSphereError as e:
            out["fits"][quantity] = {
                "theoretical_floor": floor,
                "passed": False,
                "error": str(e),
            }
    return out


def run_experiment(cfg: RunConfig) -> int:
    """Execute one configured run, writing the four artifacts.

    Returns the process exit code: 0 on success, otherwise the failure
    class's code (2 config, 3 solver, 4 tangling, 5 blow-up).
    """
    _validate(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_wall = time.perf_counter()

    meta = _MetadataWriter(out / "metadata.jsonl")
    meta.emit("config", {"config": _config_echo(cfg)})

    times: list = []
    series: dict = {name: [] for name in diagnostics.record_fields()}
    exit_code = 0
    termination = "failed"
    failure: str | None = None
    alpha0 = cfg.alphas()[0]

    try:
        profile = polytrope.solve_lane_emden(
            cfg.gamma, cfg.total_mass, tol=cfg.profile_tol
        )
        _write_profile_csv(out / "profile.csv", profile, cfg.profile_tol)
        bg = scheme.sample_background(profile, cfg.N, cfg.lambda1, cfg.lambda2)
        state0 = initial_data.build_perturbation(profile, bg, cfg.perturbation())
        compat = initial_data.check_compatibility(state0, bg)
        meta.emit("compatibility", dataclasses.asdict(compat))

        ts_path = out / "timeseries.csv"
        with ts_path.open("w", newline="\n") as ts:
            columns = diagnostics.record_fields()
            ts.write(
                "# "
                + json.dumps(
                    {"schema_version": SCHEMA_VERSION, "columns": columns},
                    sort_keys=True,
                )
                + "\n"
            )
            ts.write(",".join(columns) + "\n")
            prev = {"t": None, "v_end": None}

            def sink(state, accel):
                rec = diagnostics.weighted_norms(
                    bg,
                    state,
                    accel,
                    alpha=alpha0,
                    delta=cfg.delta,
                    prev_t=prev["t"],
                    prev_v_end=prev["v_end"],
                )
                prev["t"] = state.t
                prev["v_end"] = float(state.v[-1])
                times.append(state.t)
                row = []
                for name in columns:
                    v = getattr(rec, name)
                    series[name].append(v)
                    row.append(_fmt(v))
                ts.write(",".join(row) + "\n")

            result = integrator.run(
                bg,
                state0,
                cfg.step_policy(),
                sink=sink,
                sample_interval=cfg.sample_interval,
            )
            termination = result.termination

        final_state = result.state
        final_accel = scheme.rhs(bg, final_state)
        finals = {
            "E_N": scheme.discrete_energy_functional(bg, final_state, final_accel),
            "F_alpha": {
                _fmt(a): dataclasses.asdict(
                    diagnostics.weighted_norms(
                        bg, final_state, final_accel, alpha=a, delta=cfg.delta
                    )
                )["F_alpha"]
                for a in cfg.alphas()
            },
            "phys_energy": series["phys_energy"][-1] if series["phys_energy"] else None,
            "R_residual": series["R_residual"][-1] if series["R_residual"] else None,
            "steps": result.steps,
            "samples": result.samples,
        }
        meta.emit(
            "result",
            {
                "termination": termination,
                "wall_time_s": time.perf_counter() - t_wall,
                "final": finals,
                "exit_code": 0,
            },
        )
    except GasSphereError as e:
        exit_code = e.exit_code
        failure = f"{type(e).__name__}: {e}"
        meta.emit(
            "failure",
            {
                "error": failure,
                "exit_code": exit_code,
                "termination": termination,
                "wall_time_s": time.perf_counter() - t_wall,
            },
        )

    # the decay-fit artifact is always written, recording what it can
    if times:
        fits = _fit_records(cfg, times, series)
    else:
        fits = {
            "schema_version": SCHEMA_VERSION,
            "fits": {},
            "error": failure or "no samples recorded",
        }
    if failure is not None:
        fits["run_error"] = failure
    (out / "decay_fits.json").write_text(json.dumps(fits, indent=2, sort_keys=True) + "\n")
    for name in ("timeseries.csv",):
        p = out / name
        if not p.exists():
            p.write_text("")
    meta.close()
    return exit_code


def run_linearize(cfg: RunConfig) -> int:
    """Tangent-flow run: writes linear_timeseries.csv and metadata.jsonl."""
    _validate(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_wall = time.perf_counter()
    meta = _MetadataWriter(out / "metadata.jsonl")
    meta.emit("config", {"config": _config_echo(cfg), "flavor": "linearized"})
    exit_code = 0
    try:
        profile = polytrope.solve_lane_emden(
            cfg.gamma, cfg.total_mass, tol=cfg.profile_tol
        )
        bg = scheme.sample_background(profile, cfg.N, cfg.lambda1, cfg.lambda2)
        lin0 = linearized.tangent_state(bg, cfg.perturbation())
        path = out / "linear_timeseries.csv"
        with path.open("w", newline="\n") as f:
            columns = ["t", "energy", "dissipation", "sup_w", "sup_wt"]
            f.write(
                "# "
                + json.dumps(
                    {"schema_version": SCHEMA_VERSION, "columns": columns},
                    sort_keys=True,
                )
                + "\n"
            )
            f.write(",".join(columns) + "\n")

            def sink(st, udot):
                rep = linearized.linear_energy(bg, st.w, st.wt, udot)
                row = (
                    st.t,
                    rep.energy,
                    rep.dissipation,
                    float(np.max(np.abs(st.w))),
                    float(np.max(np.abs(st.wt))),
                )
                f.write(",".join(_fmt(v) for v in row) + "\n")

            result = linearized.run_linear(
                bg,
                lin0,
                cfg.step_policy(),
                sink=sink,
                sample_interval=cfg.sample_interval,
            )
        meta.emit(
            "result",
            {
                "termination": result.termination,
                "wall_time_s": time.perf_counter() - t_wall,
                "steps": result.steps,
                "samples": result.samples,
                "coercive": cfg.gamma > 4.0 / 3.0,
                "exit_code": 0,
            },
        )
    except GasSphereError as e:
        exit_code = e.exit_code
        meta.emit(
            "failure",
            {
                "error": f"{type(e).__name__}: {e}",
                "exit_code": exit_code,
                "wall_time_s": time.perf_counter() - t_wall,
            },
        )
    meta.close()
    return exit_code


def describe_initial_data(cfg: RunConfig, path) -> None:
    """CSV dump of the constructed initial data: x, r0, v0, discrete r_x."""
    _validate(cfg)
    profile = polytrope.solve_lane_emden(cfg.gamma, cfg.total_mass, tol=cfg.profile_tol)
    bg = scheme.sample_background(profile, cfg.N, cfg.lambda1, cfg.lambda2)
    state0 = initial_data.build_perturbation(profile, bg, cfg.perturbation())
    rx = np.diff(state0.r) / bg.dx
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", newline="\n") as f:
        f.write("x,r0,v0,rx\n")
        for n in range(bg.x.size):
            rx_n = rx[n - 1] if n > 0 else rx[0]
            f.write(
                ",".join(_fmt(v) for v in (bg.x[n], state0.r[n], state0.v[n], rx_n))
                + "\n"
            )


def fit_report(
    csv_path,
    gamma: float,
    theta: float = 0.05,
    window: tuple | None = None,
    slack: float = 0.05,
) -> dict:
    """Fit the standard quantities from a written time-series CSV."""
    p = Path(csv_path)
    if not p.is_file():
        raise ConfigError(f"time series not found: {p}")
    with p.open() as f:
        first = f.readline()
        if not first.startswith("#"):
            raise ConfigError(f"{p}: missing the JSON comment header")
        names = f.readline().strip().split(",")
        rows = [line.strip().split(",") for line in f if line.strip()]
    if not rows:
        raise ConfigError(f"{p}: no data rows")
    data = {
        name: np.array([float(r[i]) for r in rows]) for i, name in enumerate(names)
    }
    t = data["t"]
    if window is None:
        window = (float(t[-1]) / 4.0, float(t[-1]))
    cfg = RunConfig(
        gamma=gamma,
        theta=theta,
        fit_window=tuple(window),
        fit_slack=slack,
        t_end=max(float(t[-1]), 1.0),
    )
    return _fit_records(cfg, t, data)


def worker_count(n_points: int) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is not None:
        try:
            w = int(raw)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} = {raw!r} is not an integer") from None
        if w < 1:
            raise ConfigError(f"{WORKERS_ENV} must be at least 1, got {w}")
    else:
        w = os.cpu_count() or 1
    return max(1, min(w, n_points))


@dataclass(frozen=True)
class SweepResult:
    aggregate_path: str
    rows: tuple
    exit_codes: tuple


def _sweep_point(args):
    index, cfg = args
    code = run_experiment(cfg)
    fits_path = Path(cfg.out_dir) / "decay_fits.json"
    fits = json.loads(fits_path.read_text()) if fits_path.exists() else {"fits": {}}
    meta_term = "failed"
    meta_path = Path(cfg.out_dir) / "metadata.jsonl"
    if meta_path.exists():
        for line in meta_path.read_text().splitlines():
            rec = json.loads(line)
            if rec.get("kind") in ("result", "failure"):
                meta_term = rec.get("termination", meta_term)
    return index, code, meta_term, fits.get("fits", {})


def sweep(base: RunConfig, axes: dict) -> SweepResult:
    """Cartesian product of axes over the base config, run concurrently.

    Each point runs in its own subdirectory of base.out_dir; failures are
    recorded in the aggregate and never stop the other points.
    """
    _validate(base)
    if not axes:
        raise ConfigError("sweep needs at least one axis")
    keys = list(axes.keys())
    for k in keys:
        if k not in _COERCERS:
            raise ConfigError(f"unknown sweep axis {k!r}")
        if k == "out_dir":
            raise ConfigError("out_dir cannot be a sweep axis")
        if not axes[k]:
            raise ConfigError(f"sweep axis {k!r} is empty")
    root = Path(base.out_dir)
    root.mkdir(parents=True, exist_ok=True)

    points = []
    for i, combo in enumerate(itertools.product(*(axes[k] for k in keys))):
        overrides = {k: _COERCERS[k](k, v) for k, v in zip(keys, combo)}
        label = "point-%03d-" % i + "-".join(
            f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}"
            for k, v in overrides.items()
        )
        cfg = dataclasses.replace(
            base, out_dir=str(root / label), **overrides
        )
        _validate(cfg)
        points.append((i, cfg))

    results = {}
    n_workers = worker_count(len(points))
    if n_workers == 1:
        for item in points:
            idx, code, term, fits = _sweep_point(item)
            results[idx] = (code, term, fits)
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for idx, code, term, fits in pool.map(_sweep_point, points):
                results[idx] = (code, term, fits)

    quantities = [q for q, _ in FIT_QUANTITIES]
    header = (
        ["point"]
        + keys
        + ["exit_code", "termination"]
        + [f"{q}_exponent" for q in quantities]
        + [f"{q}_passed" for q in quantities]
    )
    rows = []
    agg_path = root / "aggregate.csv"
    with agg_path.open("w", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for i, cfg in points:
            code, term, fits = results[i]
            label = Path(cfg.out_dir).name
            cells = [label]
            cells += [_fmt(getattr(cfg, k)) if isinstance(getattr(cfg, k), float) else str(getattr(cfg, k)) for k in keys]
            cells += [str(code), term]
            for q in quantities:
                info = fits.get(q, {})
                exp = info.get("fitted_exponent")
                cells.append(_fmt(exp) if exp is not None else "nan")
            for q in quantities:
                info = fits.get(q, {})
                cells.append(str(bool(info.get("passed", False))).lower())
            f.write(",".join(cells) + "\n")
            rows.append(tuple(cells))
    codes = tuple(results[i][0] for i, _ in points)
    return SweepResult(aggregate_path=str(agg_path), rows=tuple(rows), exit_codes=codes)
