"""
pkgrelax command line.

Exit codes
    0  success
    1  internal contract violation
    2  malformed input: CSV, query, spec, unknown attribute, bad arguments
    3  solve: the query is infeasible
    4  instance too large for the method, or solver node budget exhausted
    5  benchmark workload generation failed
"""

import argparse
import logging
import sys
from typing import Optional, Sequence

from pkgrelax import __version__
from pkgrelax.cli import bench, gen, recommend, relax, solve
from pkgrelax.core.errors import PackageRelaxError
from pkgrelax.utils import setup_logging

logger = logging.getLogger(__name__)

EXIT_IO_ERROR = 2

COMMANDS = (solve, relax, bench, gen, recommend)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pkgrelax",
        description="Solve package queries and relax them when they are too restrictive.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        type=str.upper,
        default=None,
        help="Log level for stderr (default: PKGRELAX_LOG_LEVEL or WARNING).",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.handler(args)
    except PackageRelaxError as e:
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        logger.debug("I/O failure", exc_info=True)
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_IO_ERROR
