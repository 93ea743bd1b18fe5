"""
EVL Line File Service

Grammar (one item per text line)::

    EVBD 3 <software version>
    <point count>
    <CCYYMMDD> <HHMMSSssss> <depth> <status>
    ...

``ssss`` is ten-thousandths of a second. Status codes are 0 (none), 1 (unverified),
2 (bad) and 3 (good).
"""

import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Union

from constants.messages import ErrorMessages
from core.exceptions import DataIOError, ParseError, StructuralError, ValidationError
from models.formats import LineFile, LinePoint, LineStatus

logger = logging.getLogger(__name__)


def format_datetime(moment: datetime) -> tuple[str, str]:
    """Return the ``CCYYMMDD`` and ``HHMMSSssss`` fields of a UTC timestamp."""
    moment = moment.astimezone(timezone.utc)
    tenth_ms = moment.microsecond // 100
    return moment.strftime("%Y%m%d"), f"{moment:%H%M%S}{tenth_ms:04d}"


def parse_datetime(date: str, time: str) -> datetime:
    """Inverse of :func:`format_datetime`."""
    if len(date) != 8 or len(time) != 10 or not (date + time).isdigit():
        raise ValueError(f"Invalid date/time fields {date!r} {time!r}")
    return datetime(
        int(date[0:4]),
        int(date[4:6]),
        int(date[6:8]),
        int(time[0:2]),
        int(time[2:4]),
        int(time[4:6]),
        int(time[6:10]) * 100,
        tzinfo=timezone.utc,
    )


def write_evl(line: LineFile, path: Union[str, Path]) -> None:
    """
    Write a line to an EVL file.

    Raises:
        ValidationError: If the line has no points
    """
    if not line.points:
        raise ValidationError("Cannot write a line with no points")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [line.version, str(line.count)]
    for point in line.points:
        date, time = format_datetime(point.timestamp)
        rows.append(f"{date} {time} {point.depth!r} {int(point.status)}")
    path.write_text("\n".join(rows) + "\n")
    logger.debug(f"Wrote {line.count} points to {path}")


def read_evl(path: Union[str, Path]) -> LineFile:
    """
    Read an EVL file.

    Raises:
        DataIOError: If the file does not exist
        StructuralError: If the header or count line is missing, or the count does
            not match the number of records
        ParseError: If a record cannot be parsed or has an unknown status code
    """
    path = Path(path)
    if not path.is_file():
        raise DataIOError(ErrorMessages.INPUT_NOT_FOUND.format(path=path), details={"path": str(path)})

    lines = path.read_text().splitlines()
    if len(lines) < 2:
        raise StructuralError(ErrorMessages.MISSING_HEADER.format(path=path))
    version = lines[0].strip()
    try:
        declared = int(lines[1].strip())
    except ValueError as e:
        raise StructuralError(ErrorMessages.MISSING_HEADER.format(path=path), details={"row": 2}) from e

    points = []
    for row, text in enumerate(lines[2:], start=3):
        if not text.strip():
            continue
        fields = text.split()
        if len(fields) != 4:
            raise ParseError(
                ErrorMessages.MALFORMED_ROW.format(row=row, path=path, reason="expected 4 fields"),
                details={"row": row},
            )
        date, time, depth, status = fields
        try:
            timestamp = parse_datetime(date, time)
            depth_value = float(depth)
            status_value = int(status)
        except ValueError as e:
            raise ParseError(
                ErrorMessages.MALFORMED_ROW.format(row=row, path=path, reason=e),
                details={"row": row},
            ) from e
        if status_value not in LineStatus._value2member_map_:
            raise ParseError(
                ErrorMessages.INVALID_STATUS.format(status=status_value, row=row, path=path),
                details={"row": row},
            )
        points.append(
            LinePoint(timestamp=timestamp, depth=depth_value, status=LineStatus(status_value))
        )

    if declared != len(points):
        raise StructuralError(
            ErrorMessages.COUNT_MISMATCH.format(declared=declared, found=len(points), path=path)
        )
    try:
        return LineFile(version=version, points=points)
    except ValueError as e:
        raise StructuralError(f"Invalid line file {path}: {e}") from e
