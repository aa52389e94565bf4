"""
``tvtrack`` command line.

Exit codes: 0 success, 1 a verification check failed, 2 configuration
error or unknown check, 3 divergence detected (data is still written),
4 output path not writable.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys

from .. import __version__
from . import checks, experiments
from .config import PAPER_SCALE_REPS, ConfigError, dump_config, load_config
from .csvio import OutputError, write_rows

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_DIVERGED, EXIT_OUTPUT = 0, 1, 2, 3, 4


def _overrides(args):
    pairs = []
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        pairs.append(tuple(item.split("=", 1)))
    if args.seed is not None:
        pairs.append(("seed", str(args.seed)))
    if args.out is not None:
        pairs.append(("output_path", args.out))
    if args.paper_scale:
        pairs.append(("replications", str(PAPER_SCALE_REPS)))
    if args.reps is not None:
        pairs.append(("replications", str(args.reps)))
    if args.workers is not None:
        pairs.append(("workers", str(args.workers)))
    return pairs


def _write_meta(cfg, command, diverged):
    meta = {
        "command": command,
        "digest": cfg.digest(),
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "version": __version__,
        "diverged": diverged,
        "config": dump_config(cfg),
    }
    path = cfg.output_path + ".meta.json"
    try:
        with open(path, "w") as f:
            json.dump(meta, f, indent=2)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def _experiment(args, command):
    cfg = load_config(args.config, _overrides(args))
    if cfg.seed is None:
        raise ConfigError("a seed is required (config key 'seed' or --seed)")
    if command == "run":
        rows, diverged = experiments.run(cfg)
    else:
        rows, diverged, fits = experiments.sweep(cfg)
        for solver, c in fits.items():
            print(f"fit_constant {solver} {c:.6g}", file=sys.stderr)
    write_rows(cfg.output_path, rows)
    _write_meta(cfg, command, diverged)
    print(f"wrote {len(rows)} rows to {cfg.output_path}", file=sys.stderr)
    if diverged:
        print("divergence detected", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _verify(args):
    names = list(checks.CHECKS) if args.all else args.checks
    if not names:
        raise ConfigError("name at least one check or pass --all")
    unknown = [n for n in names if n not in checks.CHECKS]
    if unknown:
        raise ConfigError(f"unknown check(s): {', '.join(unknown)}; see list-checks")
    scale = "paper" if args.paper_scale else "desk"
    ok = True
    for name in names:
        res = checks.run_check(name, scale)
        ok &= res.passed
        print(json.dumps(res.to_json()))
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def build_parser():
    p = argparse.ArgumentParser(prog="tvtrack", description=__doc__.strip().splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run one configured experiment"),
                        ("sweep", "sweep one parameter and fit limsup constants")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="flat key = value config file")
        s.add_argument("--seed", type=int)
        s.add_argument("--out", help="CSV output path")
        s.add_argument("--reps", type=int, help="replications")
        s.add_argument("--paper-scale", action="store_true",
                       help=f"use {PAPER_SCALE_REPS} replications")
        s.add_argument("--workers", type=int, help="process-pool size for replications")
        s.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
    v = sub.add_parser("verify", help="run named checks and print JSON results")
    v.add_argument("checks", nargs="*")
    v.add_argument("--all", action="store_true")
    v.add_argument("--paper-scale", action="store_true")
    sub.add_parser("list-checks", help="list check names")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("run", "sweep"):
            return _experiment(args, args.command)
        if args.command == "verify":
            return _verify(args)
        for name in checks.CHECKS:
            print(f"{name}\t{checks.describe(name)}")
        return EXIT_OK
    except OutputError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except ValueError as exc:
        # ConfigError plus constructor rejections of inconsistent constants
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
