"""
Pydantic model for the classical line-picking baselines
"""

from pydantic import BaseModel, Field, field_validator

from constants.defaults import (
    BACKSTEP_DB,
    BLUR_KERNEL,
    BLUR_SIGMA,
    DISCRIMINATION_DB,
    GOOD_PICK_DB,
    GOOD_PICK_RUN,
    INVERT_GAIN,
    INVERT_OFFSET,
    LAYER_MEDIAN_DB,
    SEAFLOOR_BOTTOM_OFFSET_M,
    SURFACE_BACKSTEP_DB,
    THRESHOLD_OFFSET_MIN_DB,
)


class BaselineConfig(BaseModel):
    """Operator settings of the threshold-offset and best-bottom-candidate pickers"""

    blur_kernel: int = Field(BLUR_KERNEL, ge=1, description="Side of the square blur kernel")
    blur_sigma: float = Field(BLUR_SIGMA, gt=0, description="Blur standard deviation (samples)")
    blur_wrap: bool = Field(False, description="Wrap at the borders instead of renormalising")
    min_db: float = Field(THRESHOLD_OFFSET_MIN_DB, description="Threshold-offset minimum (dB)")
    invert_gain: float = Field(INVERT_GAIN, description="Gain of the inversion transform")
    invert_offset: float = Field(INVERT_OFFSET, description="Offset of the inversion transform (dB)")
    good_pick_db: float = Field(GOOD_PICK_DB, description="Minimum Sv of a good pick (dB)")
    discrimination_db: float = Field(
        DISCRIMINATION_DB, description="Maximum Sv of the weak signal above a pick (dB)"
    )
    backstep_db: float = Field(BACKSTEP_DB, description="Backstep discrimination level (dB)")
    surface_backstep_db: float = Field(
        SURFACE_BACKSTEP_DB, description="Backstep discrimination for surface picks (dB)"
    )
    good_pick_run: int = Field(GOOD_PICK_RUN, ge=1, description="Consecutive samples of a good pick")
    layer_db: float = Field(
        LAYER_MEDIAN_DB, description="Minimum median Sv of a seafloor or surface layer (dB)"
    )
    bottom_offset: float = Field(
        SEAFLOOR_BOTTOM_OFFSET_M, ge=0, description="Seafloor picks are raised by this much (m)"
    )

    @field_validator("blur_kernel")
    @classmethod
    def _odd_kernel(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("blur_kernel must be odd")
        return value
