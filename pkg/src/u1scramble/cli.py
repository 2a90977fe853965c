"""Command-line entry point.

    u1scramble <subcommand> [--config FILE] [--out DIR] [--workers N] [--seed S]

Subcommands: otoc, autocorr, butterfly, exact-bound, syk-theory and
reproduce-paper.  Exit codes: 0 success, 1 usage error, 2 invalid
configuration, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from .experiments import KINDS, ConfigError, ExperimentConfig, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="u1scramble", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for kind in KINDS + ("reproduce-paper",):
        p = sub.add_parser(kind)
        p.add_argument("--config", type=Path, help="key = value configuration file")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--workers", type=int, default=None, help="worker processes")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        if kind == "reproduce-paper":
            p.add_argument("--quick", action="store_true", help="reduced budgets for a smoke run")
    return parser


def _load_config(args) -> ExperimentConfig:
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        cfg = ExperimentConfig.from_text(text)
        if cfg.kind != args.command:
            raise ConfigError(f"config kind {cfg.kind!r} does not match subcommand {args.command!r}")
    else:
        cfg = ExperimentConfig(args.command, {})
    if args.seed is not None:
        cfg = ExperimentConfig(cfg.kind, {**cfg.params, "seed": args.seed})
    if args.workers is not None and args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    return cfg


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        if args.command == "reproduce-paper":
            from .reproduce import run_suite

            out = args.out or Path("reproduce-out")
            results = run_suite(out, workers=args.workers or 1, quick=args.quick,
                                seed=args.seed if args.seed is not None else 2024)
            for r in results:
                print(r.line())
            return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME
        cfg = _load_config(args)
        manifest = run_experiment(cfg, args.out or Path(f"{cfg.kind}-out"), args.workers)
        print(json.dumps({"outputs": manifest["outputs"], "wall_clock_s": manifest["wall_clock_s"]},
                         indent=2))
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        traceback.print_exc()
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
