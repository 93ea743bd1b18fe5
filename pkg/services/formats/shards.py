"""
Shard Store Service

A preprocessed recording is split into windows of 128 pings. Each window is a
directory of flat little-endian float32 arrays; ``manifest.json`` records the
source, the depth grid, the timestamps and the shard count.
"""

import logging
import math
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np

from constants.defaults import SHARD_LENGTH
from constants.messages import ErrorMessages
from core.exceptions import AlignmentError, ManifestMissingError, ShardIndexError
from models.echogram import (
    LINE_FIELDS,
    PING_FLAG_FIELDS,
    PIXEL_FIELDS,
    Echogram,
    SegmentationTargets,
)
from models.formats import Shard, ShardManifest

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
PAYLOAD_DTYPE = np.dtype("<f4")


def _shard_dir(directory: Path, index: int) -> Path:
    return directory / f"{index:05d}"


def _write_array(path: Path, values: np.ndarray) -> None:
    np.ascontiguousarray(values, dtype=PAYLOAD_DTYPE).tofile(path)


def _read_array(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    return np.fromfile(path, dtype=PAYLOAD_DTYPE).reshape(shape)


def write_shards(
    echogram: Echogram,
    targets: SegmentationTargets,
    directory: Union[str, Path],
    source_id: Optional[str] = None,
    shard_length: int = SHARD_LENGTH,
) -> ShardManifest:
    """
    Split a preprocessed recording into shards.

    Args:
        echogram: Regridded, orientation-standardised echogram
        targets: Targets aligned with ``echogram``
        directory: Output directory (created if missing)
        source_id: Identifier of the recording (defaults to the directory name)
        shard_length: Pings per shard

    Returns:
        The manifest written alongside the shards

    Raises:
        AlignmentError: If targets and echogram disagree in ping count or grid
    """
    directory = Path(directory)
    if targets.n_pings != echogram.n_pings or not np.array_equal(targets.depths, echogram.depths):
        raise AlignmentError(ErrorMessages.GRID_MISMATCH)

    n_shards = math.ceil(echogram.n_pings / shard_length)
    manifest = ShardManifest(
        source_id=source_id or directory.name,
        orientation=echogram.orientation,
        n_pings=echogram.n_pings,
        shard_length=shard_length,
        n_shards=n_shards,
        depths=[float(d) for d in echogram.depths],
        timestamps=[float(t) for t in echogram.timestamps],
    )

    directory.mkdir(parents=True, exist_ok=True)
    for index in range(n_shards):
        start, stop = manifest.shard_bounds(index)
        shard_dir = _shard_dir(directory, index)
        shard_dir.mkdir(exist_ok=True)
        _write_array(shard_dir / "sv.f4", echogram.sv[start:stop])
        _write_array(shard_dir / "presence.f4", echogram.presence[start:stop])
        for name in LINE_FIELDS + PING_FLAG_FIELDS + PIXEL_FIELDS:
            _write_array(shard_dir / f"{name}.f4", getattr(targets, name)[start:stop])

    (directory / MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2))
    logger.info(f"Wrote {n_shards} shards for {manifest.source_id} to {directory}")
    return manifest


def read_manifest(directory: Union[str, Path]) -> ShardManifest:
    """
    Load the manifest of a shard store.

    Raises:
        ManifestMissingError: If the directory has no manifest
    """
    path = Path(directory) / MANIFEST_NAME
    if not path.is_file():
        raise ManifestMissingError(ErrorMessages.MANIFEST_MISSING.format(directory=directory))
    return ShardManifest.model_validate_json(path.read_text())


def read_shard(directory: Union[str, Path], index: int) -> Shard:
    """
    Load one shard.

    Raises:
        ManifestMissingError: If the directory has no manifest
        ShardIndexError: If ``index`` is outside ``[0, n_shards)``
    """
    directory = Path(directory)
    manifest = read_manifest(directory)
    if not 0 <= index < manifest.n_shards:
        raise ShardIndexError(
            ErrorMessages.SHARD_OUT_OF_RANGE.format(index=index, count=manifest.n_shards - 1),
            details={"index": index, "count": manifest.n_shards},
        )

    start, stop = manifest.shard_bounds(index)
    n_pings, n_depths = stop - start, len(manifest.depths)
    shard_dir = _shard_dir(directory, index)
    depths = np.array(manifest.depths, dtype=float)

    arrays = {}
    for name in LINE_FIELDS:
        arrays[name] = _read_array(shard_dir / f"{name}.f4", (n_pings,)).astype(float)
    for name in PING_FLAG_FIELDS:
        arrays[name] = _read_array(shard_dir / f"{name}.f4", (n_pings,)) != 0
    for name in PIXEL_FIELDS:
        arrays[name] = _read_array(shard_dir / f"{name}.f4", (n_pings, n_depths)) != 0

    return Shard(
        index=index,
        source_id=manifest.source_id,
        offset=start,
        timestamps=np.array(manifest.timestamps[start:stop], dtype=float),
        depths=depths,
        sv=_read_array(shard_dir / "sv.f4", (n_pings, n_depths)),
        presence=_read_array(shard_dir / "presence.f4", (n_pings, n_depths)) != 0,
        targets=SegmentationTargets(depths=depths, orientation=manifest.orientation, **arrays),
    )


def iter_shards(directory: Union[str, Path]) -> Iterator[Shard]:
    """Yield every shard of a store in order."""
    manifest = read_manifest(directory)
    for index in range(manifest.n_shards):
        yield read_shard(directory, index)


def find_stores(root: Union[str, Path]) -> list[Path]:
    """Shard store directories (those holding a manifest) at or below ``root``."""
    root = Path(root)
    return sorted(path.parent for path in root.rglob(MANIFEST_NAME))
