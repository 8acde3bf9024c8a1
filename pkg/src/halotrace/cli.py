"""Command-line front end: ``halotrace {lagrange,coeffs,halo,trace,experiment}``.

Settings come from built-in defaults, then an optional ``--config`` file of
``key=value`` lines (``#`` starts a comment), then explicit flags. Exit
status is 0 on success, 1 for bad usage or configuration and 2 when a
numerical routine fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .cr3bp import ConvergenceError, IntegrationError, SingularityError, SystemConfig, lagrange_points
from .experiment import RunConfig, format_summary, run_experiment
from .halo import correct_halo, write_trajectory
from .inverse import NoTimeSolution, SolverSettings, query_from_km, trace
from .lp_series import BifurcationError, build_coefficients, coefficient_dump

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2
NUMERICAL_ERRORS = (ConvergenceError, IntegrationError, SingularityError, BifurcationError,
                    NoTimeSolution, FloatingPointError, np.linalg.LinAlgError)


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def _flag(text):
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# config key -> value parser
CONFIG_KEYS = {
    "mu": float,
    "lpoint": str,
    "family": str,
    "length_unit_km": float,
    "seed": int,
    "n": int,
    "method": int,
    "az_lo_km": float,
    "az_hi_km": float,
    "tol_x": float,
    "tol_norm": float,
    "tol_trigger": float,
    "grid_points": int,
    "shrink": float,
    "passes": int,
    "out": str,
    "workers": int,
    "timing": _flag,
}


def read_config(path) -> dict:
    """Parse a ``key=value`` file into typed settings."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: cannot use {raw.strip()!r}")
        try:
            out[key] = CONFIG_KEYS[key](value.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return out


def _common(p):
    p.add_argument("--config", help="key=value settings file")
    p.add_argument("--mu", type=float)
    p.add_argument("--lpoint", help="L1, L2 or L3")
    p.add_argument("--family", help="northern or southern")
    p.add_argument("--length-unit-km", dest="length_unit_km", type=float)
    p.add_argument("--az-lo-km", dest="az_lo_km", type=float)
    p.add_argument("--az-hi-km", dest="az_hi_km", type=float)
    p.add_argument("--tol-x", dest="tol_x", type=float)
    p.add_argument("--tol-norm", dest="tol_norm", type=float, help="norm acceptance tolerance")
    p.add_argument("--tol-trigger", dest="tol_trigger", type=float,
                   help="Method 1 error norm above which the norm search reruns")
    p.add_argument("--grid-points", dest="grid_points", type=int)
    p.add_argument("--shrink", type=float)
    p.add_argument("--passes", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="halotrace", description="Trace CR3BP points to halo orbits.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("lagrange", help="print the five libration points")
    _common(p)

    p = sub.add_parser("coeffs", help="dump the series coefficients")
    _common(p)

    p = sub.add_parser("halo", help="correct one halo orbit and export its trajectory")
    _common(p)
    p.add_argument("--az-km", dest="az_km", type=float, required=True)
    p.add_argument("--samples", type=int, default=1000)

    p = sub.add_parser("trace", help="find (t, Az) for one point")
    _common(p)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--z", type=float, required=True)
    p.add_argument("--km", action="store_true", help="coordinates are in km, not normalized")
    p.add_argument("--method", type=int)

    p = sub.add_parser("experiment", help="run the random-point benchmark")
    _common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--method", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--timing", action="store_const", const=True,
                   help="record per-point wall time in the CSV")
    return parser


def resolve(args) -> dict:
    """Merge config-file values with explicit flags (flags win)."""
    settings = read_config(args.config) if args.config else {}
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def system_config(s: dict) -> SystemConfig:
    kw = {}
    for key, name in (("mu", "mu"), ("lpoint", "lagrange_point"), ("family", "family"),
                      ("length_unit_km", "length_unit_km")):
        if key in s:
            kw[name] = s[key]
    return SystemConfig(**kw)


def solver_settings(s: dict) -> SolverSettings:
    names = {"az_lo_km": "az_lo_km", "az_hi_km": "az_hi_km", "tol_x": "tol_x",
             "tol_norm": "tol_norm_accept", "tol_trigger": "tol_norm_trigger",
             "grid_points": "grid_points_per_pass", "shrink": "shrink_factor",
             "passes": "max_passes"}
    return SolverSettings(**{names[k]: v for k, v in s.items() if k in names})


def _out_dir(s: dict) -> Path:
    return Path(s.get("out", "."))


def _cmd_lagrange(s, args, out):
    system = system_config(s)
    for i, p in enumerate(lagrange_points(system.mu), 1):
        x, y, z = (float(v) for v in p)
        print(f"L{i} {x!r} {y!r} {z!r}", file=out)


def _cmd_coeffs(s, args, out):
    out.write(coefficient_dump(build_coefficients(system_config(s))))


def _cmd_halo(s, args, out):
    coeffs = build_coefficients(system_config(s))
    orbit = correct_halo(args.az_km, coeffs, n_samples=args.samples)
    st = [float(v) for v in orbit.initial_state]
    print(f"az_km={orbit.az_km!r}", file=out)
    print(f"x0={st[0]!r}\nz0={st[2]!r}\nvy0={st[4]!r}", file=out)
    print(f"period={orbit.period!r}\niterations={orbit.iterations}\nresidual={orbit.residual!r}",
          file=out)
    if "out" in s:
        d = _out_dir(s)
        d.mkdir(parents=True, exist_ok=True)
        path = write_trajectory(orbit, d / "halo_trajectory.csv")
        print(f"trajectory={path}", file=out)


def _cmd_trace(s, args, out):
    coeffs = build_coefficients(system_config(s))
    settings = solver_settings(s)
    method = s.get("method", 3)
    if method not in (1, 2, 3):
        raise ConfigError(f"method must be 1, 2 or 3, got {method}")
    q = (args.x, args.y, args.z)
    if args.km:
        q = query_from_km(q, coeffs)
    sol = trace(q, settings, coeffs).for_method(method)
    print(f"method={method}\ndisposition={sol.disposition.value}", file=out)
    if sol.recovered:
        dx, dy, dz = sol.per_coordinate_errors
        print(f"t={sol.t!r}\naz_km={sol.az_km!r}\nerr_norm={sol.error_norm!r}", file=out)
        print(f"dx={dx!r}\ndy={dy!r}\ndz={dz!r}", file=out)


def _cmd_experiment(s, args, out):
    config = RunConfig(system=system_config(s), solver=solver_settings(s),
                       n_points=s.get("n", 1000), seed=s.get("seed", 0),
                       method=s.get("method", 3), out_dir=_out_dir(s),
                       workers=s.get("workers", 1), timing=s.get("timing", False))
    result = run_experiment(config)
    out.write(format_summary(result.summary))
    print(f"wall_s={result.wall_s:.2f}", file=sys.stderr)
    for path in result.files:
        print(f"wrote {path}", file=sys.stderr)


COMMANDS = {"lagrange": _cmd_lagrange, "coeffs": _cmd_coeffs, "halo": _cmd_halo,
            "trace": _cmd_trace, "experiment": _cmd_experiment}


def cli_main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        settings = resolve(args)
        COMMANDS[args.command](settings, args, out)
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main():
    sys.exit(cli_main())
