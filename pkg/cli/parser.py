"""
Command-line parser and dispatch.

Every subcommand module registers its own parser and handler; ``dispatch`` parses
the arguments, configures logging and converts failures into exit statuses.
"""

import argparse
import logging
from typing import Optional, Sequence

import pydantic

from cli import (
    baseline_command,
    evaluate_command,
    generate_shards_command,
    infer_command,
    plot_command,
    synth_command,
    train_command,
)
from config.settings import get_settings
from core.error_handlers import handle_exception
from core.exceptions import ConfigurationError
from core.logging_config import configure_logging

logger = logging.getLogger(__name__)

COMMANDS = (
    generate_shards_command,
    train_command,
    infer_command,
    baseline_command,
    evaluate_command,
    synth_command,
    plot_command,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echoseg",
        description="Segmentation of entrained air, seafloor, surface and bad data in echograms.",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="count", default=0, help="More log output")
    verbosity.add_argument("-q", "--quiet", action="count", default=0, help="Less log output")
    parser.add_argument(
        "--no-log-timestamps", action="store_true", help="Omit timestamps for reproducible logs"
    )
    parser.add_argument("--jobs", type=int, default=None, help="Maximum worker count")
    parser.add_argument("--seed", type=int, default=None, help="Random seed")

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def _log_level(base: str, verbose: int, quiet: int) -> str:
    levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
    index = levels.index(base.upper()) if base.upper() in levels else 1
    return levels[min(max(index - verbose + quiet, 0), len(levels) - 1)]


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 2 for usage and configuration errors, 1 for I/O and
        processing failures
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        settings = get_settings()
    except pydantic.ValidationError as e:
        configure_logging()
        return handle_exception(ConfigurationError(f"Invalid environment settings: {e}"))

    configure_logging(
        _log_level(settings.log_level, args.verbose, args.quiet),
        timestamps=settings.log_timestamps and not args.no_log_timestamps,
    )
    if args.jobs is None:
        args.jobs = settings.jobs
    if args.seed is None:
        args.seed = settings.seed
    if args.jobs < 1:
        return handle_exception(ConfigurationError(f"--jobs must be at least 1, got {args.jobs}"))

    logger.debug(f"Running {args.command} with {args.jobs} jobs, seed {args.seed}")
    try:
        return args.handler(args, settings)
    except pydantic.ValidationError as e:
        return handle_exception(ConfigurationError(str(e)))
    except Exception as e:
        return handle_exception(e)
