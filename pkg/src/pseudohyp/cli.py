"""Command-line front end (``pseudohyp``)."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import mpmath

from . import __version__
from .config import parse_config, to_text
from .energy import constants, write_constants_csv
from .errors import ConfigError, NumericalError
from .harness import (
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    SCENARIOS,
    convergence_study,
    run_audit,
    run_scenario,
    write_convergence_csv,
)

log = logging.getLogger("pseudohyp")


def _load(path, modes):
    cfg = parse_config(path)
    if cfg.mode not in modes:
        raise ConfigError(f"this command needs source.mode in {modes}, got {cfg.mode!r}", key="source.mode")
    return cfg


def _report(res):
    for p in res.written:
        print(f"wrote {p}")
    print(res.message)
    return res.code


def cmd_solve_linear(args):
    cfg = _load(args.config, ("linear", "manufactured"))
    return _report(run_scenario(cfg, args.output))


def cmd_solve_nonlinear(args):
    cfg = _load(args.config, ("nonlinear",))
    return _report(run_scenario(cfg, args.output))


def cmd_audit(args):
    cfg = _load(args.config, ("linear", "manufactured", "nonlinear"))
    return _report(run_audit(cfg, args.output, draws=args.draws, seed=args.seed))


def cmd_constants(args):
    cfg = parse_config(args.config)
    d1, d2 = (cfg.nonlinear.delta1, cfg.nonlinear.delta2) if cfg.nonlinear else (0.0, 0.0)
    c = constants(cfg.spec, d1, d2)
    out = Path(args.output or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    write_constants_csv(c, out / "constants.csv")
    for name, val, lg in c.items():
        print(f"{name:18s} {val:<24.17g} log={mpmath.nstr(lg, 12) if lg != mpmath.ninf else '-inf'}")
    print(f"wrote {out / 'constants.csv'}")
    return EXIT_OK


def cmd_converge(args):
    cfg = _load(args.config, ("manufactured",))
    table = convergence_study(cfg, args.levels, workers=args.workers)
    out = Path(args.output or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    write_convergence_csv(table, out / "convergence.csv")
    print(f"{'level':>5} {'nx':>6} {'nt':>6} {'err_l2':>14} {'order':>8}")
    for r in table.rows:
        print(f"{r['level']:>5} {r['nx']:>6} {r['nt']:>6} {r['err_l2']:>14.6e} {r['order']:>8.3f}")
    print(f"wrote {out / 'convergence.csv'}")
    if not table.decreasing:
        print("errors are not strictly decreasing")
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_scenario(args):
    cfg = SCENARIOS[args.name]()
    text = to_text(cfg)
    if args.emit:
        Path(args.emit).write_text(text)
        print(f"wrote {args.emit}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pseudohyp", description="Coupled fractional pseudo-hyperbolic solver and audits.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="scenario config file")
        sp.add_argument("--output", "-o", help="output directory (overrides [run] output)")
        sp.set_defaults(func=fn)
        return sp

    with_config("solve-linear", cmd_solve_linear, "march a linear or manufactured scenario")
    with_config("solve-nonlinear", cmd_solve_nonlinear, "run the Picard iteration")
    sp = with_config("audit", cmd_audit, "energy bound and inequality audits")
    sp.add_argument("--draws", type=int, default=1000, help="ensemble size (default 1000)")
    sp.add_argument("--seed", type=int, default=20240607, help="ensemble RNG seed")
    with_config("constants", cmd_constants, "evaluate the stability constants")
    sp = with_config("converge", cmd_converge, "manufactured-solution convergence study")
    sp.add_argument("--levels", type=int, default=3, help="number of (h, dt) halvings")
    sp.add_argument("--workers", type=int, default=1, help="levels run concurrently")

    sp = sub.add_parser("scenario", help="emit a canned scenario config")
    sp.add_argument("name", choices=sorted(SCENARIOS))
    sp.add_argument("--emit", metavar="PATH", help="write the config here (default stdout)")
    sp.set_defaults(func=cmd_scenario)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
