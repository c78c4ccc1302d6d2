"""
Multi-type TASEP command-line entrypoint.

Exact stationary analysis, harmonic-mean approximation, Monte Carlo
simulation and identity verification for the open-boundary lattice.

Usage: python -m src.tasep_main <command> [options]
"""

import argparse
import logging
import os
import sys
from collections.abc import Sequence

from dotenv import load_dotenv

from src import __version__
from src.handlers.commands import DEFAULT_DRAWS, CommandManager
from src.settings import Settings

# Load environment variables
load_dotenv()

# Configure logging
logging.basicConfig(
    level=os.getenv("LOG_LEVEL", "INFO").upper(),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}")
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in an unsigned 64-bit integer: {value}")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _non_negative(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="model configuration JSON")
    common.add_argument("--out", help="write the JSON result document here")
    common.add_argument("--format", choices=("json", "csv", "table"), default="table")
    common.add_argument("--seed", type=_seed, help="RNG seed (unsigned 64-bit)")
    common.add_argument("--cap", type=_positive, help="maximum number of enumerated states")
    common.add_argument(
        "--force", action="store_true", help="accept non-ergodic parameters with a warning"
    )
    common.add_argument(
        "--allow-mismatch",
        action="store_true",
        help="run identity checks outside the equal-exit-probability case",
    )
    common.add_argument(
        "--eq23-paper-literal",
        action="store_true",
        help="use the misprinted type-2 balance equation (drops the exit coin)",
    )

    parser = argparse.ArgumentParser(
        prog="tasep", description="Multi-type synchronous TASEP on an open lattice"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("exact", parents=[common], help="exact stationary densities and flow")
    commands.add_parser("approx", parents=[common], help="compare with the auxiliary system")

    simulate = commands.add_parser("simulate", parents=[common], help="Monte Carlo estimates")
    simulate.add_argument("--warmup", type=_non_negative, help="discarded steps")
    simulate.add_argument("--steps", type=_positive, help="sampled steps per replica")
    simulate.add_argument("--batches", type=_positive, help="batches for standard errors")
    simulate.add_argument("--replicas", type=_positive, default=1)

    verify = commands.add_parser("verify", parents=[common], help="two-cell identity checks")
    verify.add_argument(
        "--draws", type=_positive, default=DEFAULT_DRAWS, help="size of the built-in suite"
    )
    verify.add_argument(
        "--probe", action="store_true", help="add the exploratory occupancy-class probe"
    )

    commands.add_parser("table1", parents=[common], help="reproduce the published benchmarks")
    commands.add_parser("schema", parents=[common], help="print the config JSON schema")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments and run one command."""
    args = build_parser().parse_args(argv)

    try:
        settings = Settings.from_env()
    except ValueError as e:
        logger.error(f"Invalid environment: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2

    manager = CommandManager(settings)
    handlers = {
        "exact": manager.handle_exact,
        "approx": manager.handle_approx,
        "simulate": manager.handle_simulate,
        "verify": manager.handle_verify,
        "table1": manager.handle_table1,
        "schema": manager.handle_schema,
    }
    logger.debug(f"Running {args.command}")
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
