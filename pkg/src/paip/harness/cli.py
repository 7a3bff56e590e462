"""Command line front door: run, evaluate, oracle, validate."""
from __future__ import annotations

import argparse
import logging
import os
import sys

from ..errors import AgentStepError, ComplexityRefusal, ConfigError, NonConvergence, PaipError
from .config import load_config
from .oracle import format_report, run_suite
from .runner import evaluate_command, parse_history, run_command

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_COMPLEXITY = 2
EXIT_NONCONVERGENCE = 3
EXIT_CONFIG = 4
EXIT_EMPTY_SUITE = 5

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("paip.harness")


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, AgentStepError):
        exc = exc.cause
    if isinstance(exc, ComplexityRefusal):
        return EXIT_COMPLEXITY
    if isinstance(exc, NonConvergence):
        return EXIT_NONCONVERGENCE
    if isinstance(exc, (ConfigError, OSError)):
        return EXIT_CONFIG
    return EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="overrides run.seed")
    common.add_argument("--out", help="output path (default: stdout where applicable)")
    common.add_argument("--workers", type=int, help="worker processes for episodes")
    parser = argparse.ArgumentParser(prog="paip", description="perception-action loop experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run seeded episodes and write a JSON-lines log")
    ev = sub.add_parser("evaluate", parents=[common], help="dump action values for a history")
    ev.add_argument("--history", required=True, help='interleaved literal "s0,a1,s1,..."')
    orc = sub.add_parser("oracle", parents=[common], help="cross-check against brute-force oracles")
    orc.add_argument("--suite", help="comma-separated check names (empty string selects none)")
    orc.add_argument("--mutate", action="store_true", help="corrupt the main-side inputs (negative control)")
    sub.add_parser("validate", parents=[common], help="validate a config and report all violations")
    return parser


def _normalize_argv(argv):
    """``--check`` anywhere is an alias of the oracle subcommand."""
    argv = list(argv)
    if "--check" in argv:
        argv.remove("--check")
        argv = [a for a in argv if a != "oracle"]
        argv.insert(0, "oracle")
    return argv


def main(argv=None) -> int:
    argv = _normalize_argv(sys.argv[1:] if argv is None else argv)
    level = LOG_LEVELS.get(os.environ.get("PAIP_LOG_LEVEL", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"{args.config}: ok")
            return EXIT_OK
        if args.command == "run":
            out = args.out or "run.jsonl"
            return run_command(cfg, out, seed=args.seed, workers=args.workers)
        if args.command == "evaluate":
            text = evaluate_command(cfg, parse_history(args.history))
            _emit(text, args.out)
            return EXIT_OK
        names = None
        if args.suite is not None:
            names = [n for n in args.suite.split(",") if n]
        elif cfg.oracle_checks is not None:
            names = cfg.oracle_checks
        results = run_suite(cfg, names, mutate=args.mutate)
        _emit(format_report(results) + "\n", args.out)
        if not results:
            return EXIT_EMPTY_SUITE
        return EXIT_FAILURE if any(r.status == "fail" for r in results) else EXIT_OK
    except (PaipError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


def _emit(text: str, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    sys.exit(main())
