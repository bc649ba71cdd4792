import argparse
import logging
import sys
from typing import Optional, Sequence

from . import __version__
from .commands import COMMANDS
from .errors import EXIT_USAGE, LabError
from .logging_config import configure_logging

logger = logging.getLogger("grouplab")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grouplab",
        description="Grokking experiments and numeric checks on finite-group arithmetic",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", help="Override GROUPLAB_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Console entry point; returns the process exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0
    try:
        configure_logging(args.log_level)
        return args.handler(args)
    except LabError as exc:
        logger.error("%s", exc.detail)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
