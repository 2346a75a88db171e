"""Command-line entry point.

Subcommands:

* ``run <config>``: execute an experiment config into CSV artifacts
  (``--seed`` overrides the config seed, ``--plot`` also renders PNGs).
* ``selftest``: run the built-in oracle cross-checks.
* ``fit <model> <csv>``: fit a two-column CSV and print the result.

Exit codes: 0 on success, 2 on configuration errors, 3 on numerical
failures.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import ConfigError, load_config
from .core import ValidationError
from .inference import fit_result_text
from .runner import run_experiment, run_fit
from .selftest import run_selftest

__all__ = ["build_parser", "main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nanoguide",
        description="Simulate and fit single emitters coupled to a 1D nanoguide.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", type=Path, help="path to the experiment config file")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument(
        "--output-dir", type=Path, default=None, help="override the config output directory"
    )
    p_run.add_argument(
        "--plot", action="store_true", help="also render PNG figures next to the CSVs"
    )

    sub.add_parser("selftest", help="run the oracle cross-check suites")

    p_fit = sub.add_parser("fit", help="fit a two-column (x, y) CSV")
    p_fit.add_argument("model", choices=["lorentzian", "g2", "stark"])
    p_fit.add_argument("csv", type=Path)
    p_fit.add_argument("--n-peaks", type=int, default=1, help="Lorentzian peak count")
    p_fit.add_argument("--degree", type=int, default=2, help="Stark polynomial degree")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    try:
        artifacts = run_experiment(cfg, out_dir=args.output_dir)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for artifact in artifacts:
        print(artifact)
    if args.plot:
        from .plots import render_artifact

        for artifact in artifacts:
            figure = render_artifact(artifact)
            if figure is not None:
                print(figure)
    return EXIT_OK


def _cmd_fit(args: argparse.Namespace) -> int:
    try:
        result = run_fit(args.model, args.csv, n_peaks=args.n_peaks, degree=args.degree)
    except (ValidationError, FileNotFoundError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    sys.stdout.write(fit_result_text(result))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "selftest":
        return EXIT_OK if run_selftest() else 1
    if args.command == "fit":
        return _cmd_fit(args)
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
