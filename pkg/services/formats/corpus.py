"""
Corpus Layout Service
Locates the recordings of a corpus directory and their annotation files
"""

import logging
from pathlib import Path
from typing import Optional, Union

from constants.messages import ErrorMessages
from core.exceptions import DataIOError
from models.echogram import Orientation
from models.formats import LineFile, RecordingPaths, RegionFile
from services.formats.evl import read_evl
from services.formats.evr import read_evr

logger = logging.getLogger(__name__)

LINE_KINDS = ("air", "seafloor", "surface")
CLEAN_SUFFIX = ".clean.csv"
REPORT_PREFIX = "report-"


def find_recordings(
    directory: Union[str, Path], orientation: Orientation = Orientation.DOWNFACING
) -> list[RecordingPaths]:
    """
    Every raw export in ``directory``, sorted by name.

    Raises:
        DataIOError: If the directory does not exist
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DataIOError(ErrorMessages.INPUT_NOT_FOUND.format(path=directory))
    recordings = [
        RecordingPaths(name=path.name[: -len(".csv")], directory=str(directory), orientation=orientation)
        for path in sorted(directory.glob("*.csv"))
        if not path.name.endswith(CLEAN_SUFFIX) and not path.name.startswith(REPORT_PREFIX)
    ]
    logger.debug(f"Found {len(recordings)} recordings in {directory}")
    return recordings


def read_lines_for_recording(
    paths: RecordingPaths, tag: Optional[str] = None
) -> dict[str, LineFile]:
    """Line files present for a recording, keyed by kind (air, seafloor, surface)."""
    lines = {}
    for kind in LINE_KINDS:
        path = Path(paths.line(kind, tag))
        if path.is_file():
            lines[kind] = read_evl(path)
    return lines


def read_regions_for_recording(
    paths: RecordingPaths, tag: Optional[str] = None
) -> Optional[RegionFile]:
    path = Path(paths.regions(tag))
    return read_evr(path) if path.is_file() else None
