"""Command line front-end.

Subcommands: ``simulate`` runs a seeded end-to-end generation and writes
the dataset bundle; ``fit`` cleans a real activity log and fits a catalog;
``metrics`` compares sequence exports against a reference (randomized
baselines included); ``plotdata`` derives per-figure CSVs from a bundle.

Exit codes: 0 success, 1 usage error, 2 invalid configuration or input
files, 3 runtime failure.  The output directory may be preset with the
``ELDERSIM_OUT`` environment variable (flags still win).
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from datetime import datetime
from pathlib import Path

from .anomaly import load_profile, default_profile_path
from .core import MONTHS_PER_YEAR, DAYS_PER_MONTH, Tier
from .floor_plan import LayoutError
from .ingest import (
    IngestError,
    fit_params,
    preprocess_aruba,
    preprocess_kasteren,
    preprocess_plain,
    read_events,
)
from .metrics import DEFAULT_RATE_HZ
from .pipeline import ConfigError, RunConfig, export_plotdata, run_metrics, \
    run_simulation
from .scheduler import CatalogError, SchedulingError, save_catalog
from .trajectory import PathError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

DAYS_PER_YEAR = MONTHS_PER_YEAR * DAYS_PER_MONTH


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _default_out() -> str:
    return os.environ.get("ELDERSIM_OUT", "out")


def build_parser() -> _Parser:
    parser = _Parser(prog="eldersim",
                     description="Smart-home sensor dataset simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a labeled dataset bundle")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--days", type=int, default=None)
    sim.add_argument("--years", type=int, default=None,
                     help=f"horizon in {DAYS_PER_YEAR}-day years")
    sim.add_argument("--out", default=None, help="output directory")
    sim.add_argument("--layout", default=None, help="layout config file")
    sim.add_argument("--catalog", default=None, help="activity catalog CSV")
    sim.add_argument("--profile", default=None, help="anomaly profile file")
    sim.add_argument("--from-manifest", default=None,
                     help="reproduce a run from its manifest")

    fit = sub.add_parser("fit", help="fit a catalog from a real activity log")
    fit.add_argument("--input", required=True,
                     help="events file: start<TAB>end<TAB>label, ISO-8601")
    fit.add_argument("--dataset", choices=("kasteren", "aruba", "plain"),
                     default="plain", help="preprocessing pipeline")
    fit.add_argument("--fundamental", default="",
                     help="comma-separated fundamental activities")
    fit.add_argument("--necessary", default="")
    fit.add_argument("--random", default="")
    fit.add_argument("--shrink", action="append", default=[],
                     metavar="NAME=FACTOR",
                     help="multiply an activity's deviations by a factor")
    fit.add_argument("--window-start", default=None,
                     help="ISO date of the first day to keep")
    fit.add_argument("--window-days", type=int, default=None)
    fit.add_argument("--out", default=None, help="catalog CSV to write")

    met = sub.add_parser("metrics", help="similarity report vs a reference")
    met.add_argument("--candidate", nargs="+", required=True,
                     help="candidate activities.csv files (one per trial)")
    met.add_argument("--reference", required=True)
    met.add_argument("--freq", type=float, default=DEFAULT_RATE_HZ,
                     help="sampling rate of day strings, Hz")
    met.add_argument("--trials", type=int, default=10,
                     help="baseline trials")
    met.add_argument("--seed", type=int, default=0)
    met.add_argument("--sleep-activity", default=None)
    met.add_argument("--no-baselines", action="store_true")
    met.add_argument("--out", default=None, help="report CSV to write")

    plot = sub.add_parser("plotdata", help="derive figure CSVs from a bundle")
    plot.add_argument("--bundle", required=True)
    plot.add_argument("--day", type=int, default=0,
                      help="day for the transition traces")
    return parser


def _cmd_simulate(args) -> int:
    if args.from_manifest:
        cfg = RunConfig.from_manifest(args.from_manifest,
                                      args.out or _default_out())
    else:
        if args.days is not None and args.years is not None:
            raise _UsageError("--days and --years are mutually exclusive")
        days = args.days if args.days is not None else \
            (args.years * DAYS_PER_YEAR if args.years is not None else 100)
        cfg = RunConfig(seed=args.seed, days=days, layout_path=args.layout,
                        catalog_path=args.catalog, profile_path=args.profile,
                        out_dir=args.out or _default_out())
    started = time.perf_counter()
    result = run_simulation(cfg)
    elapsed = time.perf_counter() - started
    print(f"wrote {len(result.files)} files to {result.out_dir} "
          f"({cfg.days} days, {len(result.labels)} labels, "
          f"{elapsed:.1f} s)")
    for note in result.notes:
        print(f"note: {note}")
    return EXIT_OK


def _tiers_from_args(args) -> dict[str, Tier]:
    tiers: dict[str, Tier] = {}
    for flag, tier in (("fundamental", Tier.FUNDAMENTAL),
                       ("necessary", Tier.NECESSARY),
                       ("random", Tier.RANDOM)):
        for name in getattr(args, flag).split(","):
            name = name.strip().lower().replace(" ", "_")
            if name:
                tiers[name] = tier
    if not tiers:
        raise _UsageError("at least one tier assignment is required")
    return tiers


def _cmd_fit(args) -> int:
    events = read_events(args.input)
    start = datetime.fromisoformat(args.window_start) \
        if args.window_start else None
    pipeline = {"kasteren": preprocess_kasteren, "aruba": preprocess_aruba,
                "plain": preprocess_plain}[args.dataset]
    days = pipeline(events, window_start=start, window_days=args.window_days)
    shrink = {}
    for spec in args.shrink:
        name, _, factor = spec.partition("=")
        if not factor:
            raise _UsageError(f"bad --shrink {spec!r}, expected NAME=FACTOR")
        shrink[name.strip().lower().replace(" ", "_")] = float(factor)
    report = fit_params(days, _tiers_from_args(args), shrink)
    print(report.format_text())
    if args.out:
        save_catalog(report.to_catalog(), args.out)
        print(f"catalog written to {args.out}")
    return EXIT_OK


def _cmd_metrics(args) -> int:
    report = run_metrics(args.candidate, args.reference, rate_hz=args.freq,
                         trials=args.trials, seed=args.seed,
                         sleep_activity=args.sleep_activity,
                         include_baselines=not args.no_baselines)
    print(report.format_text())
    if args.out:
        report.write_csv(args.out)
        print(f"report written to {args.out}")
    return EXIT_OK


def _cmd_plotdata(args) -> int:
    paths = export_plotdata(args.bundle, day=args.day)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return EXIT_OK


_COMMANDS = {"simulate": _cmd_simulate, "fit": _cmd_fit,
             "metrics": _cmd_metrics, "plotdata": _cmd_plotdata}

_CONFIG_ERRORS = (ConfigError, LayoutError, CatalogError, IngestError,
                  FileNotFoundError)
_RUNTIME_ERRORS = (SchedulingError, PathError, RuntimeError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _RUNTIME_ERRORS as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
