"""
Pydantic models for inference configs and annotation results
"""

from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from constants.defaults import (
    AUTOZOOM_THRESHOLD,
    INPUT_WIDTH,
    LINE_OFFSET_M,
    NEARFIELD_M,
    PATCH_MIN_AREA_PING_METRES,
    REGION_MERGE_GAP_PINGS,
    REGION_MIN_LENGTH_PINGS,
    ZOOM_MARGIN_M,
    ZOOM_SPREAD_SIGMAS,
)
from models.echogram import ArrayModel, BoundaryLine, Orientation, RegionSet


class InferenceConfig(BaseModel):
    """Post-processing and zoom settings for annotating a recording"""

    autozoom_threshold: float = Field(
        AUTOZOOM_THRESHOLD, ge=0, description="Cropped fraction above which a second pass runs"
    )
    zoom_margin: float = Field(ZOOM_MARGIN_M, ge=0, description="Margin beyond the zoom limit (m)")
    zoom_spread: float = Field(
        ZOOM_SPREAD_SIGMAS, ge=0, description="Robust standard deviations around the line mean"
    )
    merge_gap: int = Field(REGION_MERGE_GAP_PINGS, ge=0, description="Merge periods closer than this")
    min_region_length: int = Field(
        REGION_MIN_LENGTH_PINGS, ge=0, description="Drop periods shorter than this (pings)"
    )
    min_patch_area: float = Field(
        PATCH_MIN_AREA_PING_METRES, ge=0, description="Drop patches smaller than this (ping-metres)"
    )
    line_offset: float = Field(LINE_OFFSET_M, ge=0, description="Offset applied to every line (m)")
    nearfield: float = Field(NEARFIELD_M, ge=0, description="Range of the transducer nearfield (m)")
    smoothing_sigma: float = Field(0.0, ge=0, description="Gaussian smoothing of the logits (0 = off)")
    drop_bad_data: bool = Field(False, description="Discard bad-data periods and patches")
    conditioned: bool = Field(True, description="Use the orientation-conditioned planes if present")
    window_pings: int = Field(INPUT_WIDTH, ge=1, description="Pings per network window")

    @model_validator(mode="after")
    def _check_thresholds(self) -> "InferenceConfig":
        for name in ("autozoom_threshold", "zoom_margin", "min_patch_area", "line_offset", "nearfield"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        return self


class DepthWindow(BaseModel):
    """A closed depth interval (m)."""

    lo: float
    hi: float

    @model_validator(mode="after")
    def _check_order(self) -> "DepthWindow":
        if self.hi < self.lo:
            raise ValueError(f"Depth window [{self.lo}, {self.hi}] is empty")
        return self

    @property
    def span(self) -> float:
        return self.hi - self.lo


class Provenance(BaseModel):
    """Where an annotation came from."""

    model_id: str = Field(..., description="Checkpoint or algorithm identifier")
    config: InferenceConfig
    passes: int = Field(..., ge=1, le=2, description="1 for a single pass, 2 with zoom+repeat")
    zoom_window: Optional[DepthWindow] = None


class AnnotationResult(ArrayModel):
    """Lines and regions predicted for one recording, in increasing-depth coordinates."""

    timestamps: np.ndarray
    orientation: Orientation
    air: BoundaryLine
    surface: BoundaryLine
    seafloor: BoundaryLine
    air_offset: BoundaryLine
    surface_offset: BoundaryLine
    seafloor_offset: BoundaryLine
    nearfield: BoundaryLine
    regions: RegionSet
    provenance: Provenance
