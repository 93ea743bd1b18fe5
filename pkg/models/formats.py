"""
Pydantic models for the external file formats: Sv CSV exports, EVL line files,
EVR region files and the training shard store.
"""

from datetime import datetime, timedelta, timezone
from enum import Enum, IntEnum
from pathlib import Path
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from constants.defaults import CHECKPOINT_FORMAT_VERSION, SHARD_FORMAT_VERSION, SHARD_LENGTH
from models.echogram import ArrayModel, Orientation, SegmentationTargets
from models.network import ModelConfig

EVL_VERSION = "EVBD 3 10.0.270.37090"
EVR_VERSION = "EVRG 7 10.0.270.37090"


def quantize_timestamp(value: datetime) -> datetime:
    """Round to the 0.1 ms resolution of the EVL/EVR time field, in UTC."""
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    value = value.astimezone(timezone.utc)
    tenth_ms = round(value.microsecond / 100)
    return value.replace(microsecond=0) + timedelta(microseconds=tenth_ms * 100)


class SvCsvRecording(ArrayModel):
    """Contents of an Sv CSV export. Missing cells are tracked by ``presence``."""

    ping_index: np.ndarray = Field(..., description="Ping index per ping")
    timestamps: np.ndarray = Field(..., description="Seconds since epoch, microsecond precision")
    range_start: np.ndarray = Field(..., description="Range of the first sample (m)")
    range_stop: np.ndarray = Field(..., description="Range of the last sample (m)")
    samples: list[np.ndarray] = Field(..., description="Sv samples per ping, NaN where missing")
    presence: list[np.ndarray] = Field(..., description="True where a sample was recorded")

    @model_validator(mode="after")
    def _check_pings(self) -> "SvCsvRecording":
        n = len(self.ping_index)
        lengths = {len(self.timestamps), len(self.range_start), len(self.range_stop),
                   len(self.samples), len(self.presence)}
        if lengths != {n}:
            raise ValueError("Per-ping fields must all have one entry per ping")
        return self

    @property
    def n_pings(self) -> int:
        return len(self.ping_index)

    @property
    def sample_counts(self) -> np.ndarray:
        return np.array([len(s) for s in self.samples], dtype=int)

    def ping_depths(self, ping: int) -> np.ndarray:
        """Sample depths of one ping, evenly spaced from range_start to range_stop."""
        return np.linspace(self.range_start[ping], self.range_stop[ping], len(self.samples[ping]))


class LineStatus(IntEnum):
    """Status code of an EVL point."""

    NONE = 0
    UNVERIFIED = 1
    BAD = 2
    GOOD = 3


class LinePoint(BaseModel):
    """One EVL record."""

    timestamp: datetime = Field(..., description="UTC time of the point (0.1 ms resolution)")
    depth: float = Field(..., description="Depth (m)")
    status: LineStatus = Field(LineStatus.GOOD, description="Point status")

    @field_validator("timestamp")
    @classmethod
    def _quantize(cls, value: datetime) -> datetime:
        return quantize_timestamp(value)


class LineFile(BaseModel):
    """An EVL line file."""

    version: str = Field(EVL_VERSION, description="Version tag written on the first line")
    points: list[LinePoint] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_order(self) -> "LineFile":
        times = [p.timestamp for p in self.points]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("Line timestamps must be non-decreasing")
        return self

    @property
    def count(self) -> int:
        return len(self.points)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (timestamps in epoch seconds, depths, status codes)."""
        times = np.array([p.timestamp.timestamp() for p in self.points], dtype=float)
        depths = np.array([p.depth for p in self.points], dtype=float)
        status = np.array([int(p.status) for p in self.points], dtype=int)
        return times, depths, status

    @classmethod
    def from_arrays(
        cls,
        timestamps: np.ndarray,
        depths: np.ndarray,
        status: Optional[np.ndarray] = None,
    ) -> "LineFile":
        if status is None:
            status = np.full(len(depths), int(LineStatus.GOOD))
        points = [
            LinePoint(
                timestamp=datetime.fromtimestamp(float(t), timezone.utc),
                depth=float(d),
                status=LineStatus(int(s)),
            )
            for t, d, s in zip(timestamps, depths, status)
        ]
        return cls(points=points)


class RegionClass(str, Enum):
    """Classification of an EVR region."""

    PASSIVE = "passive"
    BAD_PERIOD = "bad-period"
    BAD_PATCH = "bad-patch"


class RegionVertex(BaseModel):
    """A polygon vertex of a region."""

    timestamp: datetime
    depth: float

    @field_validator("timestamp")
    @classmethod
    def _quantize(cls, value: datetime) -> datetime:
        return quantize_timestamp(value)


class Region(BaseModel):
    """One EVR region."""

    id: int = Field(..., ge=1, description="Region id, unique within a file")
    classification: RegionClass
    name: str = Field("", description="Region name (no newlines)")
    vertices: list[RegionVertex] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _check_extent(self) -> "Region":
        if self.end_time <= self.start_time:
            raise ValueError(f"Region {self.id} is empty in time")
        if "\n" in self.name:
            raise ValueError("Region names cannot contain newlines")
        return self

    @property
    def start_time(self) -> datetime:
        return min(v.timestamp for v in self.vertices)

    @property
    def end_time(self) -> datetime:
        return max(v.timestamp for v in self.vertices)

    @property
    def depth_top(self) -> float:
        return min(v.depth for v in self.vertices)

    @property
    def depth_bottom(self) -> float:
        return max(v.depth for v in self.vertices)

    @classmethod
    def rectangle(
        cls,
        region_id: int,
        classification: RegionClass,
        start: datetime,
        end: datetime,
        depth_top: float,
        depth_bottom: float,
        name: str = "",
    ) -> "Region":
        corners = [(start, depth_top), (start, depth_bottom), (end, depth_bottom), (end, depth_top)]
        return cls(
            id=region_id,
            classification=classification,
            name=name,
            vertices=[RegionVertex(timestamp=t, depth=d) for t, d in corners],
        )


class RegionFile(BaseModel):
    """An EVR region file."""

    version: str = Field(EVR_VERSION, description="Version tag written on the first line")
    regions: list[Region] = Field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.regions)


class ShardManifest(BaseModel):
    """Plain-text (JSON) manifest of a shard store."""

    version: int = Field(SHARD_FORMAT_VERSION, description="Shard store format version")
    source_id: str = Field(..., description="Identifier of the source recording")
    orientation: Orientation
    n_pings: int = Field(..., ge=1)
    shard_length: int = Field(SHARD_LENGTH, ge=1)
    n_shards: int = Field(..., ge=1)
    depths: list[float] = Field(..., description="Depth grid shared by all shards (m)")
    timestamps: list[float] = Field(..., description="Ping timestamps of the full recording")

    def shard_bounds(self, index: int) -> tuple[int, int]:
        start = index * self.shard_length
        return start, min(start + self.shard_length, self.n_pings)


class Shard(ArrayModel):
    """A contiguous window of at most 128 pings with aligned targets."""

    index: int
    source_id: str
    offset: int = Field(..., description="Index of the first ping within the source recording")
    timestamps: np.ndarray
    depths: np.ndarray
    sv: np.ndarray = Field(..., description="Sv (float32), NaN where missing")
    presence: np.ndarray
    targets: SegmentationTargets

    @property
    def n_pings(self) -> int:
        return len(self.timestamps)


class TensorEntry(BaseModel):
    """Location of one tensor within a checkpoint payload."""

    key: str = Field(..., description="State-dict key")
    shape: list[int]
    dtype: str = Field(..., description="torch dtype name, e.g. 'float32'")


class CheckpointManifest(BaseModel):
    """JSON manifest of a model checkpoint."""

    version: int = Field(CHECKPOINT_FORMAT_VERSION, description="Checkpoint format version")
    model_id: str = Field(..., description="Identifier written into annotation provenance")
    network: ModelConfig = Field(..., description="Architecture of the saved model")
    tensors: list[TensorEntry] = Field(default_factory=list)
    metadata: dict[str, Any] = Field(default_factory=dict, description="Training provenance")

    model_config = ConfigDict(protected_namespaces=())


class RecordingPaths(BaseModel):
    """
    Files of one recording in a corpus directory.

    A recording ``<name>`` consists of the raw export ``<name>.csv``, an optional
    cleaned export ``<name>.clean.csv``, annotated lines ``<name>.<kind>.evl`` and
    regions ``<name>.evr``. Annotations produced by a model or algorithm carry its
    tag: ``<name>.<kind>.<tag>.evl`` and ``<name>.<tag>.evr``.
    """

    name: str
    directory: str
    orientation: Orientation = Orientation.DOWNFACING

    def _path(self, suffix: str) -> str:
        return str(Path(self.directory) / f"{self.name}{suffix}")

    @property
    def raw_csv(self) -> str:
        return self._path(".csv")

    @property
    def clean_csv(self) -> str:
        return self._path(".clean.csv")

    def line(self, kind: str, tag: Optional[str] = None) -> str:
        return self._path(f".{kind}.{tag}.evl" if tag else f".{kind}.evl")

    def regions(self, tag: Optional[str] = None) -> str:
        return self._path(f".{tag}.evr" if tag else ".evr")
