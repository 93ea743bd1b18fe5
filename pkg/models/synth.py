"""
Pydantic model for the synthetic echogram generator
"""

from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from models.echogram import ArrayModel, Echogram, Orientation


class SynthConfig(BaseModel):
    """Parameters of one synthetic recording"""

    seed: int = Field(0, ge=0, description="Random seed")
    orientation: Orientation = Field(Orientation.DOWNFACING)
    n_pings: int = Field(512, ge=2, description="Number of pings")
    depth_min: float = Field(0.0, ge=0, description="Shallowest sample (m)")
    depth_max: float = Field(50.0, gt=0, description="Deepest sample (m)")
    resolution: float = Field(0.1, gt=0, description="Depth step (m)")
    start_time: float = Field(1.6e9, description="Timestamp of the first ping (s since epoch)")
    ping_interval: float = Field(1.0, gt=0, description="Seconds between pings")

    tide_period: float = Field(2000.0, gt=0, description="Tidal period (pings)")
    air_base: float = Field(0.3, description="Mean air penetration, fraction of the water column")
    air_amplitude: float = Field(0.1, ge=0, description="Tidal air-penetration amplitude (fraction)")
    roughness: float = Field(0.5, ge=0, description="Standard deviation of boundary noise (m)")
    roughness_smoothing: float = Field(4.0, ge=0, description="Smoothing of boundary noise (pings)")

    air_sv: float = Field(-50.0, description="Mean Sv of entrained air (dB)")
    air_sv_std: float = Field(5.0, ge=0, description="Sv spread of entrained air (dB)")
    air_porosity: float = Field(
        0.5, ge=0, lt=1, description="Dropout probability of air returns at the boundary"
    )
    water_sv: float = Field(-85.0, description="Background Sv of clear water (dB)")
    water_sv_std: float = Field(2.0, ge=0, description="Background Sv spread (dB)")
    seafloor_sv: float = Field(-30.0, description="Sv below the seafloor (dB)")
    surface_sv: float = Field(-30.0, description="Sv above the surface, upfacing only (dB)")
    fish_sv: float = Field(-60.0, description="Sv of fish blobs (dB)")
    fish_rate: float = Field(2.0, ge=0, description="Fish blobs per 100 pings")

    seafloor_fraction: float = Field(
        0.8, gt=0, le=1, description="Mean seafloor depth as a fraction of the depth range"
    )
    seafloor_slope: float = Field(0.05, description="Seafloor ramp (fraction of range over the recording)")
    surface_depth: float = Field(2.0, ge=0, description="Mean surface depth, upfacing only (m)")
    surface_tide: float = Field(1.0, ge=0, description="Tidal surface amplitude, upfacing only (m)")
    empty_range_fraction: float = Field(
        0.0, ge=0, lt=1, description="Share of the range outside the water column"
    )

    passive_attenuation: float = Field(60.0, ge=0, description="Attenuation of passive pings (dB)")
    passive_periods: list[tuple[int, int]] = Field(
        default_factory=list, description="Inclusive passive ping intervals"
    )
    passive_rate: float = Field(0.0, ge=0, description="Random passive periods per 1000 pings")
    bad_period_rate: float = Field(0.0, ge=0, description="Bad-data periods per 1000 pings")
    patch_rate: float = Field(0.0, ge=0, description="Bad-data patches per 1000 pings")

    @model_validator(mode="after")
    def _check_ranges(self) -> "SynthConfig":
        if not 0 < self.air_base < 0.9:
            raise ValueError("air_base must lie in (0, 0.9)")
        if not 0 < self.air_base + self.air_amplitude < 0.9:
            raise ValueError("air_base + air_amplitude must lie in (0, 0.9)")
        if self.depth_max <= self.depth_min + 2 * self.resolution:
            raise ValueError("depth range must span at least three samples")
        for start, stop in self.passive_periods:
            if not 0 <= start <= stop < self.n_pings:
                raise ValueError(f"Passive period ({start}, {stop}) outside the recording")
        return self

    @property
    def n_depths(self) -> int:
        return int(round((self.depth_max - self.depth_min) / self.resolution)) + 1


class SyntheticRecording(ArrayModel):
    """A generated recording with its exact ground truth, in increasing-depth coordinates."""

    name: str = Field("synthetic", description="Recording name used for exported files")
    raw: Echogram = Field(..., description="Echogram as recorded")
    clean: Echogram = Field(..., description="Echogram with every bad cell removed")
    air: np.ndarray = Field(..., description="Entrained-air boundary per ping (m)")
    seafloor: Optional[np.ndarray] = Field(None, description="Seafloor per ping (downfacing)")
    surface: Optional[np.ndarray] = Field(None, description="Sea surface per ping (upfacing)")
    passive_periods: list[tuple[int, int]] = Field(default_factory=list)
    bad_periods: list[tuple[int, int]] = Field(default_factory=list)
    patch_mask: np.ndarray = Field(..., description="Pixels of injected bad-data patches")

    @property
    def mask(self) -> np.ndarray:
        """Good-data mask as constructed by the generator."""
        return self.clean.presence
