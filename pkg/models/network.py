"""
Pydantic models describing the segmentation network and its output planes
"""

from enum import Enum, IntEnum

from pydantic import BaseModel, Field, model_validator

from constants.defaults import INPUT_HEIGHT, INPUT_WIDTH, N_PLANES


class Plane(IntEnum):
    """Index of each output plane within a plane group."""

    AIR = 0
    AIR_ORIGINAL = 1
    SEAFLOOR = 2
    SEAFLOOR_ORIGINAL = 3
    SURFACE = 4
    PASSIVE = 5
    BAD_PERIOD = 6
    PATCH = 7
    PATCH_ORIGINAL = 8
    PATCH_MIXED = 9


class PlaneGroup(IntEnum):
    """Plane groups of a conditional (Bifacing) model, in output order."""

    UNCONDITIONAL = 0
    DOWNFACING = 1
    UPFACING = 2


class ModelVariant(str, Enum):
    """Named output layouts."""

    UPFACING = "upfacing"
    BIFACING = "bifacing"


class ModelConfig(BaseModel):
    """Architecture of the segmentation U-Net"""

    width: int = Field(32, ge=1, description="Backbone width C")
    depth: int = Field(6, ge=1, description="Number of encoder (and decoder) blocks")
    kernel_size: int = Field(5, ge=1, description="Depthwise and stem kernel size")
    expansion: int = Field(6, ge=1, description="Expansion factor of the inverted residual blocks")
    first_expansion: int = Field(1, ge=1, description="Expansion factor of the first encoder block")
    se_reduction: int = Field(2, ge=1, description="Squeeze-and-excite reduction factor")
    n_planes: int = Field(N_PLANES, ge=1, description="Output planes per group")
    conditional: bool = Field(True, description="Triplicate the planes into orientation groups")
    bottleneck: bool = Field(True, description="Extra block at the deepest resolution")
    input_width: int = Field(INPUT_WIDTH, ge=1, description="Pings per input (W)")
    input_height: int = Field(INPUT_HEIGHT, ge=1, description="Depth bins per input (H)")

    @model_validator(mode="after")
    def _check_divisibility(self) -> "ModelConfig":
        if self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd")
        if self.input_height % self.depth_factor:
            raise ValueError(
                f"input_height {self.input_height} must be divisible by {self.depth_factor}"
            )
        if self.input_width % self.time_factor:
            raise ValueError(
                f"input_width {self.input_width} must be divisible by {self.time_factor}"
            )
        return self

    @property
    def depth_factor(self) -> int:
        """Total downsampling of the depth axis."""
        return 2 ** self.depth

    @property
    def time_factor(self) -> int:
        """Total downsampling of the ping axis (every second block pools time)."""
        return 2 ** (self.depth // 2)

    @property
    def groups(self) -> int:
        return 3 if self.conditional else 1

    @property
    def out_channels(self) -> int:
        return self.n_planes * self.groups

    @classmethod
    def for_variant(cls, variant: ModelVariant, **overrides) -> "ModelConfig":
        return cls(conditional=variant == ModelVariant.BIFACING, **overrides)
