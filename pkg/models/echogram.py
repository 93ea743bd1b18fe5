"""
Pydantic models for echograms, boundary lines, segmentation targets and regions.

Array-valued fields hold numpy arrays. Axis 0 is always the ping (time) axis and
axis 1 the depth axis.
"""

from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class Orientation(str, Enum):
    """Echosounder orientation."""

    UPFACING = "upfacing"
    DOWNFACING = "downfacing"


class ArrayModel(BaseModel):
    """Base for models carrying numpy arrays."""

    model_config = ConfigDict(arbitrary_types_allowed=True)


class Echogram(ArrayModel):
    """Ping-by-depth Sv matrix on a uniform depth grid."""

    timestamps: np.ndarray = Field(..., description="Seconds since epoch, one per ping")
    depths: np.ndarray = Field(..., description="Depth of each sample (m), strictly monotonic")
    sv: np.ndarray = Field(..., description="Sv (dB re 1 m^-1), NaN where missing")
    presence: np.ndarray = Field(..., description="True where a sample was recorded")
    orientation: Orientation = Field(Orientation.DOWNFACING, description="Echosounder orientation")
    flipped: bool = Field(
        False, description="True once an upfacing echogram has been reordered to increasing depth"
    )

    @model_validator(mode="after")
    def _check_shapes(self) -> "Echogram":
        n_pings, n_depths = len(self.timestamps), len(self.depths)
        if self.sv.shape != (n_pings, n_depths) or self.presence.shape != (n_pings, n_depths):
            raise ValueError(
                f"sv/presence shape {self.sv.shape} does not match ({n_pings}, {n_depths})"
            )
        return self

    @property
    def n_pings(self) -> int:
        return len(self.timestamps)

    @property
    def n_depths(self) -> int:
        return len(self.depths)

    @property
    def resolution(self) -> float:
        """Absolute depth step between samples (m)."""
        if self.n_depths < 2:
            return 0.0
        return float(abs(self.depths[1] - self.depths[0]))

    @property
    def transducer_at_top(self) -> bool:
        """Whether index 0 of the depth axis is the sample nearest the transducer."""
        return not (self.orientation == Orientation.UPFACING and self.flipped)

    def slice_pings(self, start: int, stop: int) -> "Echogram":
        """Return pings ``start:stop`` (half-open) as a new echogram."""
        return self.model_copy(
            update={
                "timestamps": self.timestamps[start:stop],
                "sv": self.sv[start:stop],
                "presence": self.presence[start:stop],
            }
        )


class BoundaryLine(ArrayModel):
    """Per-ping depth of a boundary, with validity flags."""

    depths: np.ndarray = Field(..., description="Boundary depth per ping (m)")
    valid: np.ndarray = Field(..., description="Per-ping validity flag")

    @model_validator(mode="after")
    def _check_shapes(self) -> "BoundaryLine":
        if self.depths.shape != self.valid.shape:
            raise ValueError("depths and valid must have the same shape")
        return self

    @classmethod
    def from_depths(cls, depths: np.ndarray, valid: Optional[np.ndarray] = None) -> "BoundaryLine":
        depths = np.asarray(depths, dtype=float)
        if valid is None:
            valid = np.isfinite(depths)
        return cls(depths=depths, valid=np.asarray(valid, dtype=bool))

    def __len__(self) -> int:
        return len(self.depths)


LINE_FIELDS = ("air", "air_original", "seafloor", "seafloor_original", "surface")
PING_FLAG_FIELDS = ("surface_valid", "passive", "bad_period")
PIXEL_FIELDS = ("patches", "patches_original", "patches_mixed", "mask")


def excluded_above(depths: np.ndarray, line: np.ndarray) -> np.ndarray:
    """Pixels strictly shallower than ``line`` at each ping (pings x depths)."""
    return depths[None, :] < np.asarray(line)[:, None]


def excluded_below(depths: np.ndarray, line: np.ndarray) -> np.ndarray:
    """Pixels strictly deeper than ``line`` at each ping (pings x depths)."""
    return depths[None, :] > np.asarray(line)[:, None]


class SegmentationTargets(ArrayModel):
    """
    Training targets for one echogram.

    Lines are per-ping depths on the host echogram's (increasing) depth grid. A pixel
    is excluded by the entrained-air line when it is shallower than the line, and by
    the seafloor line when it is deeper. Upfacing recordings have no seafloor, so
    their seafloor lines sit at the deepest sample and exclude nothing.
    """

    depths: np.ndarray = Field(..., description="Host depth grid (m)")
    orientation: Orientation = Field(..., description="Echosounder orientation")
    air: np.ndarray = Field(..., description="Entrained-air line, deepest of line and mask extent")
    air_original: np.ndarray = Field(..., description="Entrained-air line as annotated")
    seafloor: np.ndarray = Field(..., description="Seafloor line including adjacent masked area")
    seafloor_original: np.ndarray = Field(..., description="Seafloor line as annotated")
    surface: np.ndarray = Field(..., description="Surface line")
    surface_valid: np.ndarray = Field(..., description="False where the surface was anomalous")
    passive: np.ndarray = Field(..., description="Per-ping passive flag")
    bad_period: np.ndarray = Field(..., description="Per-ping bad-data period flag")
    patches: np.ndarray = Field(..., description="Bad-data patches given air and seafloor")
    patches_original: np.ndarray = Field(
        ..., description="Bad-data patches given the original air and seafloor lines"
    )
    patches_mixed: np.ndarray = Field(
        ..., description="Bad-data patches given the original seafloor and expanded air lines"
    )
    mask: np.ndarray = Field(..., description="Overall good-data mask")

    @property
    def n_pings(self) -> int:
        return len(self.air)

    def excluded_by_lines(self, air: np.ndarray, seafloor: np.ndarray) -> np.ndarray:
        """Pixels explained by the given lines together with passive and bad periods."""
        excluded = excluded_above(self.depths, air)
        if self.orientation == Orientation.DOWNFACING:
            excluded |= excluded_below(self.depths, seafloor)
        excluded |= (self.passive | self.bad_period)[:, None]
        return excluded

    def reconstruct_mask(self) -> np.ndarray:
        """Rebuild the good-data mask from lines, periods and patches."""
        return ~(self.excluded_by_lines(self.air, self.seafloor) | self.patches)

    def slice_pings(self, start: int, stop: int) -> "SegmentationTargets":
        """Return pings ``start:stop`` (half-open) as a new target set."""
        update = {}
        for name, value in self:
            if isinstance(value, np.ndarray) and name != "depths":
                update[name] = value[start:stop]
        return self.model_copy(update=update)


class RegionSet(ArrayModel):
    """Passive periods, bad-data periods (inclusive ping intervals) and patches."""

    passive_periods: list[tuple[int, int]] = Field(default_factory=list)
    bad_periods: list[tuple[int, int]] = Field(default_factory=list)
    patch_mask: np.ndarray = Field(..., description="Pixel mask of bad-data patches")
    depths: np.ndarray = Field(..., description="Depth grid of patch_mask (m)")

    @property
    def depth_resolution(self) -> float:
        if len(self.depths) < 2:
            return 1.0
        return float(abs(self.depths[1] - self.depths[0]))
