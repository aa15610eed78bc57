import argparse
import logging
import os
from typing import Dict, List, Optional

from .._scheme import ColdStartError
from ..config import load_config
from .commands import COMMANDS, run_command

EXIT_ERROR = 1
EXIT_USAGE = 2
LOG_LEVELS = {"info": logging.INFO, "debug": logging.DEBUG, "warning": logging.WARNING}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coldstart",
                                     description="multi-strategy pre-training for cold-start recommendation",
                                     epilog="any other config field can be overridden with --field-name value")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--tasks", help="comma separated subset of Rg,Cg,Rp,Cp")
    parser.add_argument("--sampler", choices=["random", "importance", "dynamic"])
    parser.add_argument("--aug", choices=["delete", "substitute", "both"])
    parser.add_argument("--k-eval", type=int, dest="k_eval")
    parser.add_argument("--out", dest="out_dir")
    return parser


def parse_overrides(extra: List[str], parser: argparse.ArgumentParser) -> Dict[str, str]:
    """`--field-name value` and `--field-name=value` pairs left over by argparse"""
    overrides = {}
    tokens = list(extra)
    while tokens:
        token = tokens.pop(0)
        if not token.startswith("--") or len(token) < 3:
            parser.error(f"unexpected argument {token!r}")
        key = token[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        elif tokens and not tokens[0].startswith("--"):
            value = tokens.pop(0)
        else:
            parser.error(f"{token} needs a value")
        overrides[key.replace("-", "_")] = value
    return overrides


def configure_logging():
    level = os.environ.get("COLDSTART_LOG", "info").strip().lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.INFO), format="%(asctime)s %(levelname)s %(message)s")


def main(argv: Optional[List[str]] = None) -> int:
    '''
    coldstart <command> [--config PATH] [--seed N] [--tasks Rg,Cg] [--out DIR] [--field value ...]
    Exit codes: 0 success, 1 pipeline error, 2 bad arguments, 3 partial pre-training checkpoint.

    usage:
    - coldstart run --config experiment.cfg --out results/full
    - coldstart eval --tasks Rg --out results/rg
    '''
    configure_logging()
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    overrides = parse_overrides(extra, parser)
    overrides.update({k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None})
    try:
        config = load_config(args.config, overrides)
        logging.info(f"{args.command}: out_dir={config.out_dir} tasks={','.join(config.tasks)} seed={config.seed}")
        return run_command(args.command, config)
    except ColdStartError as e:
        logging.error(f"{args.command} failed: {e}")
        return EXIT_ERROR
