"""
Argument helpers shared by the subcommands.
"""

import argparse
from pathlib import Path
from typing import Optional, Sequence

from constants.messages import ErrorMessages
from core.exceptions import DataIOError
from models.echogram import Orientation
from services.formats.corpus import CLEAN_SUFFIX, find_recordings


def add_orientation(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--orientation",
        choices=[o.value for o in Orientation],
        default=Orientation.DOWNFACING.value,
        help="Echosounder orientation of the inputs (default: %(default)s)",
    )


def add_jobs_and_seed(parser: argparse.ArgumentParser) -> None:
    """Options accepted both before and after the subcommand name."""
    parser.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="Maximum worker count")
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Random seed")


def resolve_inputs(paths: Sequence[str]) -> list[Path]:
    """
    Expand input arguments into raw Sv CSV files.

    Directories contribute every raw export they contain.

    Raises:
        DataIOError: If an input does not exist
    """
    resolved = []
    for item in paths:
        path = Path(item)
        if path.is_dir():
            resolved.extend(Path(r.raw_csv) for r in find_recordings(path))
        elif path.is_file():
            resolved.append(path)
        else:
            raise DataIOError(ErrorMessages.INPUT_NOT_FOUND.format(path=path), details={"path": str(path)})
    return [p for p in resolved if not p.name.endswith(CLEAN_SUFFIX)]


def output_dir_for(path: Path, output_dir: Optional[str]) -> Path:
    """Requested output directory, or the input's own directory."""
    return Path(output_dir) if output_dir else path.parent