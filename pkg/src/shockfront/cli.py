"""Command-line entry point: ``shockfront {solve,riemann,distance,convergence}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from typing import Any, Sequence

from .flux import PiecewiseLinearFlux, flux_from_dict, interpolate_flux
from .harness import ConfigError, StudyConfig, build_initial, emit_study, run_study
from .metrics import distance_report
from .piecewise import PiecewiseConstantFn, from_json_dict, project_to_grid
from .solver import EventCapExceeded, run, solve_riemann

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAILED_LEVEL = 2
EXIT_CONFIG = 3


def _load_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path!r}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path!r} is not valid JSON: {exc}") from exc


def _floats(text: str) -> list[float]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok:
            out.append(math.inf if tok.lower() in ("inf", "infinity") else float(tok))
    return out


def _write_json(obj: Any, path: str | None) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


# -- subcommands --------------------------------------------------------------------


def _solve_inputs(cfg: dict) -> tuple[PiecewiseConstantFn, PiecewiseLinearFlux]:
    """Initial data and front-tracking flux for ``solve``.

    ``initial`` is either a serialized step function (used as is) or a study
    descriptor, projected on the grid ``dx`` (default 2^-6). Analytic fluxes
    are interpolated with spacing ``lambda * dx``.
    """
    if "initial" not in cfg or "flux" not in cfg:
        raise ConfigError("solve config needs 'flux' and 'initial'")
    dx = float(cfg.get("dx", 2.0**-6))
    lam = float(cfg.get("lambda", 1.0))
    if not (dx > 0 and lam > 0):
        raise ConfigError("dx and lambda must be positive")
    try:
        init = cfg["initial"]
        if init.get("kind") == "pc":
            u0 = from_json_dict(init)
        else:
            u0 = project_to_grid(build_initial(init), dx)
        flux = flux_from_dict(cfg["flux"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    if not isinstance(flux, PiecewiseLinearFlux):
        flux = interpolate_flux(flux, lam * dx, max(u0.sup_norm, lam * dx))
    return u0, flux


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = _load_json(args.config)
    if not isinstance(cfg, dict):
        raise ConfigError("solve config must be a JSON object")
    u0, flux = _solve_inputs(cfg)
    times = _floats(args.times)
    if not times or any(t < 0 for t in times):
        raise ConfigError("--times must be nonnegative")
    result = run(u0, flux, max(times), snap=not args.no_snap, max_events=int(cfg.get("max_events", 10**7)))
    out = {
        "flux": flux.to_dict(),
        "summary": result.summary(),
        "snapshots": [{"t": t, "u": s.to_dict()} for t, s in zip(times, result.snapshots(times))],
    }
    _write_json(out, args.output)
    return EXIT_OK


def cmd_riemann(args: argparse.Namespace) -> int:
    flux = flux_from_dict(_load_json(args.flux))
    if not isinstance(flux, PiecewiseLinearFlux):
        if args.delta is None:
            raise ConfigError("analytic flux needs --delta for its interpolant")
        flux = interpolate_flux(flux, args.delta, max(abs(args.ul), abs(args.ur)))
    fan = solve_riemann(flux, args.ul, args.ur)
    _write_json({"states": list(fan.states), "speeds": list(fan.speeds)}, None)
    return EXIT_OK


def cmd_distance(args: argparse.Namespace) -> int:
    a, b = from_json_dict(_load_json(args.a)), from_json_dict(_load_json(args.b))
    if not (isinstance(a, PiecewiseConstantFn) and isinstance(b, PiecewiseConstantFn)):
        raise ConfigError("distance needs two step functions (kind 'pc')")
    report = distance_report(a, b, _floats(args.p))
    _write_json(report.to_dict(), None)
    return EXIT_OK


def cmd_convergence(args: argparse.Namespace) -> int:
    cfg = StudyConfig.from_dict(_load_json(args.config))
    result = run_study(cfg)
    text = emit_study(result, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)
    for note in result.notes:
        print(f"note: {note}", file=sys.stderr)
    if result.failed_levels:
        print(f"failed levels: {result.failed_levels}", file=sys.stderr)
        return EXIT_FAILED_LEVEL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shockfront", description="Front tracking and Wasserstein convergence studies.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run front tracking and write snapshots")
    s.add_argument("--config", required=True)
    s.add_argument("--times", required=True, help="comma-separated snapshot times")
    s.add_argument("--output", default=None, help="output JSON path (stdout if omitted)")
    s.add_argument("--no-snap", action="store_true", help="keep off-lattice cell averages")
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("riemann", help="print the Riemann fan as JSON")
    r.add_argument("--flux", required=True, help="flux descriptor JSON file")
    r.add_argument("--ul", type=float, required=True)
    r.add_argument("--ur", type=float, required=True)
    r.add_argument("--delta", type=float, default=None, help="interpolation spacing for analytic fluxes")
    r.set_defaults(func=cmd_riemann)

    d = sub.add_parser("distance", help="distances between two step functions")
    d.add_argument("--a", required=True)
    d.add_argument("--b", required=True)
    d.add_argument("--p", default="1,2,inf")
    d.set_defaults(func=cmd_distance)

    c = sub.add_parser("convergence", help="refinement study with observed orders")
    c.add_argument("--config", required=True)
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_convergence)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, EventCapExceeded, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
