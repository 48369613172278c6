"""Command-line entry point.

Points are given as ``x1,...,xn,y`` with y = -x0 the distance to the
boundary; directions likewise as ``dx1,...,dxn,dy`` (dy < 0 points toward
the boundary).  On two-dimensional charts ``--theta`` gives the direction
(sin theta, -cos theta) measured from the downward vertical.

Exit codes: 0 ok, 1 configuration error, 2 numeric failure, 3 invariant failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import CCGeoError, DomainError, IntegrationFailure, NumericError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INVARIANT = 0, 1, 2, 3


class ConfigError(Exception):
    pass


def _floats(text) -> np.ndarray:
    if isinstance(text, (list, tuple)):
        return np.asarray(text, dtype=float)
    try:
        return np.array([float(t) for t in str(text).split(",") if t.strip()])
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _emit(args, name: str, payload: dict) -> None:
    from .integrate import write_json

    payload = _clean(payload)
    write_json(os.path.join(args.out, name), payload)
    print(json.dumps(payload, sort_keys=True))


def _cfg(args):
    from .integrate import IntegratorConfig

    return IntegratorConfig().with_overrides(rel_tol=args.rel_tol, abs_tol=args.abs_tol, tau_min=args.tau_min)


def _chart(args, default="epsilon:0"):
    from .providers import parse_chart

    spec = args.chart if args.chart is not None else default
    if isinstance(spec, dict):
        spec = json.dumps(spec)
    return parse_chart(spec)


def _fermi_point(chart, p):
    p = _floats(p)
    if p.shape != (chart.dim,):
        raise ConfigError(f"--p needs {chart.dim} numbers (x1..xn, y)")
    return np.concatenate([[-p[-1]], p[:-1]])


def _fermi_direction(chart, args):
    if args.theta is not None:
        if chart.dim != 2:
            raise ConfigError("--theta applies to two-dimensional charts; use --v")
        th = float(args.theta)
        return np.array([math.cos(th), math.sin(th)])
    if args.v is None:
        raise ConfigError("give a direction with --theta or --v")
    v = _floats(args.v)
    if v.shape != (chart.dim,):
        raise ConfigError(f"--v needs {chart.dim} numbers (dx1..dxn, dy)")
    return np.concatenate([[-v[-1]], v[:-1]])


# ---------------------------------------------------------------------------
# subcommands


def cmd_shoot(args) -> int:
    from .shoot import endpoint_map

    chart = _chart(args)
    p = _fermi_point(chart, args.p)
    v = _fermi_direction(chart, args)
    res = endpoint_map(chart, p, v, _cfg(args))
    traj_file = os.path.join(args.out, "shoot_trajectory.csv")
    res.trajectory.to_csv(traj_file)
    res.t_trajectory.to_csv(os.path.join(args.out, "shoot_arclength.csv"))
    _emit(args, "shoot.json", {
        "chart": chart.chart_id,
        "endpoint": res.endpoint.x_prime,
        "diagnostics": res.diagnostics,
        "trajectory_file": traj_file,
    })
    return EXIT_OK


def cmd_boundary_shoot(args) -> int:
    from .asymptotics import fit_expansion, obstruction
    from .shoot import boundary_shoot

    chart = _chart(args)
    q = _floats(args.q)
    u = _floats(args.u)
    if q.shape != (chart.n,) or u.shape != (chart.n,):
        raise ConfigError(f"--q and --u need {chart.n} numbers")
    tau_end = -abs(float(args.tau_end)) if args.tau_end is not None else -chart.delta
    traj = boundary_shoot(chart, q, u, tau_end, _cfg(args))
    traj_file = os.path.join(args.out, "boundary_trajectory.csv")
    traj.to_csv(traj_file)
    out = {"chart": chart.chart_id, "q": q, "u": u, "termination": traj.termination,
           "trajectory_file": traj_file, "max_energy_drift": float(np.max(np.abs(traj.energies() - 1.0)))}
    if args.fit:
        fit = fit_expansion(traj, _window(args))
        out["fit"] = fit.to_json()
        out["obstruction"] = obstruction(chart, q)
    _emit(args, "boundary_shoot.json", out)
    return EXIT_OK


def _window(args):
    from .asymptotics import DEFAULT_WINDOW

    if getattr(args, "window", None) is None:
        return DEFAULT_WINDOW
    w = _floats(args.window)
    if w.shape != (2,):
        raise ConfigError("--window needs two numbers")
    return tuple(abs(w))


def cmd_expmap(args) -> int:
    from .shoot import expmap_jacobian

    chart = _chart(args)
    p = _fermi_point(chart, args.p)
    v = _fermi_direction(chart, args)
    J, smin = expmap_jacobian(chart, p, v, _cfg(args), fd_step=args.fd_step)
    _emit(args, "expmap.json", {"chart": chart.chart_id, "jacobian": J, "sigma_min": smin, "fd_step": args.fd_step})
    return EXIT_OK


def read_tau_csv(path: str):
    """Load a tau trajectory written by ``Trajectory.to_csv``."""
    from .integrate import Trajectory

    if not os.path.exists(path):
        raise ConfigError(f"trajectory file {path} does not exist")
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    header = lines[0].strip().split(",")
    if header[0] != "tau":
        raise ConfigError("fit needs a tau trajectory CSV")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:] if ln.strip()])
    return Trajectory("tau", data[:, 0], data[:, 1:-2], "unknown", "file")


def cmd_fit(args) -> int:
    from .asymptotics import fit_expansion

    if args.trajectory is None:
        raise ConfigError("fit needs --trajectory")
    traj = read_tau_csv(args.trajectory)
    fit = fit_expansion(traj, _window(args), include_nuisance=not args.no_nuisance)
    _emit(args, "fit.json", {"fit": fit.to_json(), "trajectory_file": args.trajectory})
    return EXIT_OK


def cmd_figures(args) -> int:
    from .examples import figure_data

    eps = None if args.eps is None else [float(e) for e in _floats(args.eps)]
    files = figure_data(int(args.id), eps, args.out, _cfg(args))
    _emit(args, f"figure{args.id}.json", {"figure": int(args.id), "files": [os.path.basename(f) for f in files]})
    return EXIT_OK


def cmd_check(args) -> int:
    from .checks import format_table, run_battery

    charts = None if args.chart is None else [_chart(args)]
    rows = run_battery(charts, seed=args.seed, cfg=_cfg(args), heavy=not args.quick)
    print(format_table(rows), file=sys.stderr)
    ok = all(r["passed"] for r in rows)
    _emit(args, "check.json", {"seed": args.seed, "passed": ok, "rows": rows})
    return EXIT_OK if ok else EXIT_INVARIANT


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--chart", help="epsilon:<value>, hyperbolic, warped, inline JSON or a JSON file")
    common.add_argument("--config", help="JSON file of option defaults (keys as the long flags, with underscores)")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--seed", type=int)
    common.add_argument("--rel-tol", type=float)
    common.add_argument("--abs-tol", type=float)
    common.add_argument("--tau-min", type=float)

    parser = argparse.ArgumentParser(prog="ccgeo", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("shoot", parents=[common], help="boundary endpoint of a geodesic from an interior point")
    p.add_argument("--p")
    p.add_argument("--theta", type=float)
    p.add_argument("--v")
    p.set_defaults(func=cmd_shoot)

    p = sub.add_parser("boundary-shoot", parents=[common], help="geodesic from the boundary with prescribed u")
    p.add_argument("--q")
    p.add_argument("--u")
    p.add_argument("--tau-end", type=float)
    p.add_argument("--fit", action="store_true")
    p.add_argument("--window")
    p.set_defaults(func=cmd_boundary_shoot)

    p = sub.add_parser("expmap", parents=[common], help="Jacobian of the boundary exponential map")
    p.add_argument("--p")
    p.add_argument("--theta", type=float)
    p.add_argument("--v")
    p.add_argument("--fd-step", type=float)
    p.set_defaults(func=cmd_expmap)

    p = sub.add_parser("fit", parents=[common], help="fit the boundary expansion of a tau trajectory CSV")
    p.add_argument("--trajectory")
    p.add_argument("--window")
    p.add_argument("--no-nuisance", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("figures", parents=[common], help="write figure data CSVs")
    p.add_argument("--id", type=int, choices=(1, 2, 3))
    p.add_argument("--eps")
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("check", parents=[common], help="run the invariant battery")
    p.add_argument("--quick", action="store_true", help="skip the flow-map regularity checks")
    p.set_defaults(func=cmd_check)
    return parser


DEFAULTS = {"out": ".", "seed": 0, "fd_step": 1e-4, "id": 1}


def _apply_config(args) -> None:
    conf = {}
    if args.config is not None:
        if not os.path.exists(args.config):
            raise ConfigError(f"config file {args.config} does not exist")
        with open(args.config) as fh:
            try:
                conf = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: {exc}") from None
    for key, val in conf.items():
        key = key.replace("-", "_")
        if not hasattr(args, key):
            raise ConfigError(f"unknown config key {key!r}")
        if getattr(args, key) in (None, False):
            setattr(args, key, val)
    for key, val in DEFAULTS.items():
        if getattr(args, key, "missing") is None:
            setattr(args, key, val)
    os.makedirs(args.out, exist_ok=True)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        return args.func(args)
    except (ConfigError, DomainError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationFailure, NumericError, CCGeoError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
