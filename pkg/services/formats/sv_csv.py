"""
Sv CSV Service
Reads and writes echogram exports in CSV format

Layout: one header row naming the ping metadata columns, then one row per ping
holding ``Ping_index, Ping_date, Ping_time, Ping_milliseconds, Range_start,
Range_stop, Sample_count`` followed by ``Sample_count`` Sv values. Missing cells
carry the indicator value -9.9e37.
"""

import calendar
import csv
import logging
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Union

import numpy as np

from constants.defaults import NAN_INDICATOR
from constants.messages import ErrorMessages
from core.exceptions import DataIOError, ParseError, StructuralError
from models.formats import SvCsvRecording

logger = logging.getLogger(__name__)

HEADER = [
    "Ping_index",
    "Ping_date",
    "Ping_time",
    "Ping_milliseconds",
    "Range_start",
    "Range_stop",
    "Sample_count",
]
N_META = len(HEADER)


def _parse_timestamp(date: str, time: str, milliseconds: str) -> float:
    """Seconds since epoch (UTC) from the date, time and millisecond columns."""
    moment = datetime.strptime(f"{date} {time}", "%Y-%m-%d %H:%M:%S")
    whole = calendar.timegm(moment.timetuple())
    return whole + float(milliseconds) / 1000.0


def _format_timestamp(timestamp: float) -> tuple[str, str, str]:
    """Date, time and millisecond columns; milliseconds keep microsecond precision."""
    whole = math.floor(timestamp)
    milliseconds = round((timestamp - whole) * 1000.0, 3)
    if milliseconds >= 1000.0:
        whole, milliseconds = whole + 1, 0.0
    moment = datetime.fromtimestamp(whole, timezone.utc)
    return moment.strftime("%Y-%m-%d"), moment.strftime("%H:%M:%S"), f"{milliseconds:.3f}"


def _parse_sample(cell: str) -> float:
    value = float(cell)
    if value == NAN_INDICATOR or math.isnan(value):
        return math.nan
    return value


def read_sv_csv(path: Union[str, Path]) -> SvCsvRecording:
    """
    Read an Sv CSV export.

    Args:
        path: CSV file

    Returns:
        Parsed recording; missing cells are NaN in ``samples`` and False in ``presence``

    Raises:
        DataIOError: If the file does not exist
        StructuralError: If the header is missing, a row has the wrong number of
            columns, or there are no pings
        ParseError: If a cell cannot be parsed
    """
    path = Path(path)
    if not path.is_file():
        raise DataIOError(ErrorMessages.INPUT_NOT_FOUND.format(path=path), details={"path": str(path)})

    ping_index, timestamps, range_start, range_stop = [], [], [], []
    samples, presence = [], []

    with path.open("r", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [cell.strip() for cell in header[:N_META]] != HEADER:
            raise StructuralError(ErrorMessages.MISSING_HEADER.format(path=path))

        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < N_META:
                raise StructuralError(
                    ErrorMessages.INCONSISTENT_COLUMNS.format(
                        row=line, path=path, found=len(row), expected=N_META
                    ),
                    details={"row": line},
                )
            try:
                count = int(row[6])
                index = int(row[0])
                timestamp = _parse_timestamp(row[1].strip(), row[2].strip(), row[3])
                start, stop = float(row[4]), float(row[5])
            except ValueError as e:
                raise ParseError(
                    ErrorMessages.MALFORMED_ROW.format(row=line, path=path, reason=e),
                    details={"row": line},
                ) from e

            if count < 1 or not stop > start:
                raise ParseError(
                    ErrorMessages.MALFORMED_ROW.format(
                        row=line, path=path, reason="Sample_count < 1 or Range_stop <= Range_start"
                    ),
                    details={"row": line},
                )
            if len(row) != N_META + count:
                raise StructuralError(
                    ErrorMessages.INCONSISTENT_COLUMNS.format(
                        row=line, path=path, found=len(row), expected=N_META + count
                    ),
                    details={"row": line},
                )
            try:
                values = np.array([_parse_sample(cell) for cell in row[N_META:]], dtype=float)
            except ValueError as e:
                raise ParseError(
                    ErrorMessages.MALFORMED_ROW.format(row=line, path=path, reason=e),
                    details={"row": line},
                ) from e

            ping_index.append(index)
            timestamps.append(timestamp)
            range_start.append(start)
            range_stop.append(stop)
            samples.append(values)
            presence.append(~np.isnan(values))

    if not ping_index:
        raise StructuralError(ErrorMessages.EMPTY_DATA.format(path=path))

    n_missing = sum(int((~p).sum()) for p in presence)
    logger.debug(f"Read {len(ping_index)} pings from {path} ({n_missing} missing cells)")

    return SvCsvRecording(
        ping_index=np.array(ping_index, dtype=np.int64),
        timestamps=np.array(timestamps, dtype=float),
        range_start=np.array(range_start, dtype=float),
        range_stop=np.array(range_stop, dtype=float),
        samples=samples,
        presence=presence,
    )


def write_sv_csv(recording: SvCsvRecording, path: Union[str, Path]) -> None:
    """
    Write a recording in the layout read by :func:`read_sv_csv`.

    Missing cells are written as the indicator value. Floats are written with
    their shortest round-trip representation.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    indicator = repr(NAN_INDICATOR)

    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(HEADER)
        for i in range(recording.n_pings):
            date, time, milliseconds = _format_timestamp(float(recording.timestamps[i]))
            values = recording.samples[i]
            present = recording.presence[i]
            cells = [repr(float(v)) if p else indicator for v, p in zip(values, present)]
            writer.writerow(
                [
                    int(recording.ping_index[i]),
                    date,
                    time,
                    milliseconds,
                    repr(float(recording.range_start[i])),
                    repr(float(recording.range_stop[i])),
                    len(values),
                    *cells,
                ]
            )

    logger.debug(f"Wrote {recording.n_pings} pings to {path}")
