"""Command-line front end.

Every config key is also a flag; flags override values read from --config.
Errors print one line to stderr and map to exit codes: 2 configuration,
3 solver failure, 4 mesh tangling, 5 blow-up.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, polytrope
from .errors import ConfigError, GasSphereError

__all__ = ["main", "build_parser"]

# (config key, flag, parse spec); parse spec is a type or a tuple marker
_CONFIG_FLAGS = (
    ("gamma", "--gamma", float),
    ("total_mass", "--total-mass", float),
    ("lambda1", "--lambda1", float),
    ("lambda2", "--lambda2", float),
    ("N", "--N", int),
    ("family", "--family", str),
    ("epsilon", "--epsilon", float),
    ("shape_params", "--shape-params", "float*"),
    ("mode", "--mode", str),
    ("dt", "--dt", float),
    ("cfl_safety", "--cfl-safety", float),
    ("max_steps", "--max-steps", int),
    ("t_end", "--t-end", float),
    ("sample_interval", "--sample-interval", float),
    ("theta", "--theta", float),
    ("alpha_list", "--alpha-list", "float*"),
    ("delta", "--delta", float),
    ("fit_window", "--fit-window", "float2"),
    ("fit_slack", "--fit-slack", float),
    ("profile_tol", "--profile-tol", float),
    ("out_dir", "--out-dir", str),
    ("allow_edge", "--allow-edge", "bool"),
)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its keys")
    for key, flag, kind in _CONFIG_FLAGS:
        if kind == "bool":
            p.add_argument(
                flag, dest=key, action=argparse.BooleanOptionalAction, default=None
            )
        elif kind == "float*":
            p.add_argument(flag, dest=key, type=float, nargs="*", default=None)
        elif kind == "float2":
            p.add_argument(flag, dest=key, type=float, nargs=2, default=None)
        else:
            p.add_argument(flag, dest=key, type=kind, default=None)


def _merged_config(args) -> harness.RunConfig:
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(
                f"{path}: line {e.lineno}, column {e.colno}: {e.msg}"
            ) from e
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
        source = str(path)
    else:
        raw, source = {}, "<flags>"
    for key, _, _ in _CONFIG_FLAGS:
        v = getattr(args, key)
        if v is not None:
            raw[key] = v
    return harness.config_from_dict(raw, source=source)


def _parse_axis(text: str):
    if "=" not in text:
        raise ConfigError(f"axis {text!r} must look like key=v1,v2,...")
    key, _, values = text.partition("=")
    key = key.strip()
    items = [v for v in values.split(",") if v.strip()]
    if not items:
        raise ConfigError(f"axis {key!r} has no values")
    parsed = []
    for v in items:
        try:
            parsed.append(json.loads(v))
        except json.JSONDecodeError:
            parsed.append(v.strip())
    return key, parsed


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gassphere",
        description="Spherically symmetric viscous gas spheres with a vacuum "
        "free boundary: equilibria, nonlinear runs, tangent flow, decay fits.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("profile", help="solve an equilibrium and dump x,rho,q,phi")
    pr.add_argument("--gamma", type=float, default=1.5)
    pr.add_argument("--mass", type=float, default=1.0)
    pr.add_argument("--tol", type=float, default=1.0e-10)
    pr.add_argument("--out", required=True)

    sim = sub.add_parser("simulate", help="run one configured experiment")
    _add_config_flags(sim)

    lin = sub.add_parser("linearize", help="run the tangent flow for a config")
    _add_config_flags(lin)

    sw = sub.add_parser("sweep", help="cartesian sweep over config axes")
    _add_config_flags(sw)
    sw.add_argument(
        "--axis",
        action="append",
        default=[],
        metavar="KEY=V1,V2,...",
        help="repeatable; e.g. --axis gamma=1.4,1.5 --axis epsilon=0.005,0.01",
    )

    ft = sub.add_parser("fit", help="decay fits from a written time-series CSV")
    ft.add_argument("--input", required=True)
    ft.add_argument("--gamma", type=float, required=True)
    ft.add_argument("--theta", type=float, default=0.05)
    ft.add_argument("--window", type=float, nargs=2, default=None)
    ft.add_argument("--slack", type=float, default=0.05)
    ft.add_argument("--out", default=None, help="JSON output path (default stdout)")

    ic = sub.add_parser("describe-ic", help="dump constructed initial data as CSV")
    _add_config_flags(ic)
    ic.add_argument("--out", required=True)

    return p


def _cmd_profile(args) -> int:
    prof = polytrope.solve_lane_emden(args.gamma, args.mass, tol=args.tol)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    harness._write_profile_csv(out, prof, args.tol)
    print(f"wrote {out}: R = {prof.radius_bar_R:.12g}, rho(0) = {prof.rho_center:.12g}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = _merged_config(args)
    code = harness.run_experiment(cfg)
    print(f"run finished with exit code {code}; artifacts in {cfg.out_dir}")
    return code


def _cmd_linearize(args) -> int:
    cfg = _merged_config(args)
    code = harness.run_linearize(cfg)
    print(f"tangent run finished with exit code {code}; artifacts in {cfg.out_dir}")
    return code


def _cmd_sweep(args) -> int:
    cfg = _merged_config(args)
    if not args.axis:
        raise ConfigError("sweep needs at least one --axis")
    axes = {}
    for text in args.axis:
        key, values = _parse_axis(text)
        axes[key] = values
    result = harness.sweep(cfg, axes)
    print(f"sweep finished; aggregate in {result.aggregate_path}")
    return max(result.exit_codes, default=0)


def _cmd_fit(args) -> int:
    report = harness.fit_report(
        args.input,
        gamma=args.gamma,
        theta=args.theta,
        window=tuple(args.window) if args.window else None,
        slack=args.slack,
    )
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def _cmd_describe_ic(args) -> int:
    cfg = _merged_config(args)
    harness.describe_initial_data(cfg, args.out)
    print(f"wrote {args.out}")
    return 0


_DISPATCH = {
    "profile": _cmd_profile,
    "simulate": _cmd_simulate,
    "linearize": _cmd_linearize,
    "sweep": _cmd_sweep,
    "fit": _cmd_fit,
    "describe-ic": _cmd_describe_ic,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except GasSphereError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
