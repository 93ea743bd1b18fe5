"""
EVR Region File Service

Grammar::

    EVRG 7 <software version>
    <region count>

    13 <n points> <id> 0 <type> -1 1 <date> <time> <top> <date> <time> <bottom>
    <notes count>
    <notes lines ...>
    <detection settings count>
    <detection settings lines ...>
    <classification>
    <date> <time> <depth> ... <type>
    <region name>

Each region block is preceded by a blank line. The bounding box on the header line
is derived from the vertices and ignored when reading.
"""

import logging
from pathlib import Path
from typing import Union

from constants.messages import ErrorMessages
from core.exceptions import DataIOError, DuplicateRegionError, ParseError, StructuralError
from models.formats import Region, RegionClass, RegionFile, RegionVertex
from services.formats.evl import format_datetime, parse_datetime

logger = logging.getLogger(__name__)

REGION_HEADER_TAG = "13"
# Echoview region type "bad (no data)"
BAD_DATA_TYPE = 0


def _check_unique_ids(regions: list[Region]) -> None:
    seen = set()
    for region in regions:
        if region.id in seen:
            raise DuplicateRegionError(
                f"Duplicate region id {region.id}", details={"id": region.id}
            )
        seen.add(region.id)


def _encode_region(region: Region) -> list[str]:
    top_date, top_time = format_datetime(region.start_time)
    bottom_date, bottom_time = format_datetime(region.end_time)
    header = (
        f"{REGION_HEADER_TAG} {len(region.vertices)} {region.id} 0 {BAD_DATA_TYPE} -1 1 "
        f"{top_date} {top_time} {region.depth_top!r} "
        f"{bottom_date} {bottom_time} {region.depth_bottom!r}"
    )
    points = []
    for vertex in region.vertices:
        date, time = format_datetime(vertex.timestamp)
        points.append(f"{date} {time} {vertex.depth!r}")
    return [
        "",
        header,
        "0",
        "0",
        region.classification.value,
        " ".join(points + [str(BAD_DATA_TYPE)]),
        region.name,
    ]


def write_evr(regions: RegionFile, path: Union[str, Path]) -> None:
    """
    Write regions to an EVR file.

    Raises:
        DuplicateRegionError: If two regions share an id
    """
    _check_unique_ids(regions.regions)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [regions.version, str(regions.count)]
    for region in regions.regions:
        rows.extend(_encode_region(region))
    path.write_text("\n".join(rows) + "\n")
    logger.debug(f"Wrote {regions.count} regions to {path}")


class _Cursor:
    """Line cursor reporting 1-based line numbers."""

    def __init__(self, lines: list[str], path: Path):
        self.lines = lines
        self.path = path
        self.position = 0

    @property
    def row(self) -> int:
        return self.position + 1

    def done(self) -> bool:
        return all(not text.strip() for text in self.lines[self.position:])

    def next(self) -> str:
        if self.position >= len(self.lines):
            raise StructuralError(
                f"Unexpected end of file {self.path} at line {self.row}", details={"row": self.row}
            )
        text = self.lines[self.position]
        self.position += 1
        return text

    def skip_blank(self) -> None:
        while self.position < len(self.lines) and not self.lines[self.position].strip():
            self.position += 1

    def error(self, reason: object) -> ParseError:
        row = self.position
        return ParseError(
            ErrorMessages.MALFORMED_ROW.format(row=row, path=self.path, reason=reason),
            details={"row": row},
        )


def _decode_region(cursor: _Cursor) -> Region:
    header = cursor.next().split()
    if len(header) != 13 or header[0] != REGION_HEADER_TAG:
        raise cursor.error("invalid region header")
    try:
        n_points = int(header[1])
        region_id = int(header[2])
    except ValueError as e:
        raise cursor.error(e) from e

    for _ in range(2):
        try:
            n_lines = int(cursor.next().strip())
        except ValueError as e:
            raise cursor.error(e) from e
        for _ in range(n_lines):
            cursor.next()

    classification_text = cursor.next().strip()
    try:
        classification = RegionClass(classification_text)
    except ValueError as e:
        raise cursor.error(f"unknown classification {classification_text!r}") from e

    fields = cursor.next().split()
    if len(fields) != 3 * n_points + 1:
        raise cursor.error(f"expected {n_points} points")
    vertices = []
    try:
        for i in range(n_points):
            date, time, depth = fields[3 * i: 3 * i + 3]
            vertices.append(RegionVertex(timestamp=parse_datetime(date, time), depth=float(depth)))
    except ValueError as e:
        raise cursor.error(e) from e

    name = cursor.next().rstrip("\r")
    try:
        return Region(id=region_id, classification=classification, name=name, vertices=vertices)
    except ValueError as e:
        raise cursor.error(e) from e


def read_evr(path: Union[str, Path]) -> RegionFile:
    """
    Read an EVR file.

    Raises:
        DataIOError: If the file does not exist
        StructuralError: If the header is missing or the region count does not match
        ParseError: If a region block cannot be parsed
        DuplicateRegionError: If two regions share an id
    """
    path = Path(path)
    if not path.is_file():
        raise DataIOError(ErrorMessages.INPUT_NOT_FOUND.format(path=path), details={"path": str(path)})

    cursor = _Cursor(path.read_text().splitlines(), path)
    if len(cursor.lines) < 2:
        raise StructuralError(ErrorMessages.MISSING_HEADER.format(path=path))
    version = cursor.next().strip()
    try:
        declared = int(cursor.next().strip())
    except ValueError as e:
        raise StructuralError(ErrorMessages.MISSING_HEADER.format(path=path), details={"row": 2}) from e

    regions = []
    while not cursor.done():
        cursor.skip_blank()
        regions.append(_decode_region(cursor))

    if declared != len(regions):
        raise StructuralError(
            ErrorMessages.COUNT_MISMATCH.format(declared=declared, found=len(regions), path=path)
        )
    _check_unique_ids(regions)
    return RegionFile(version=version, regions=regions)
