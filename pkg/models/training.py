"""
Pydantic models for training: configs, augmentation records, views and losses
"""

from enum import Enum
from typing import Optional

import numpy as np
import torch
from pydantic import BaseModel, Field, field_validator, model_validator

from models.echogram import ArrayModel, Orientation, SegmentationTargets


class DatasetSpec(BaseModel):
    """A shard store used for training."""

    name: str = Field(..., description="Dataset name used in logs")
    path: str = Field(..., description="Directory holding one shard store per recording")
    upsample: int = Field(1, ge=1, description="Times the dataset is drawn from per epoch")


class TrainConfig(BaseModel):
    """Hyperparameters of the training loop"""

    batch_size: int = Field(12, ge=1, description="Views per batch")
    weight_decay: float = Field(1e-5, ge=0, description="Decoupled weight decay")
    beta2: float = Field(0.999, gt=0, lt=1, description="Second-moment decay")
    beta1_min: float = Field(0.92, gt=0, lt=1, description="beta1 during the plateau")
    beta1_max: float = Field(0.98, gt=0, lt=1, description="beta1 at the start and end of a cycle")
    max_lr: float = Field(0.012, gt=0, description="Peak learning rate of the first cycle")
    epochs: int = Field(100, ge=1, description="Epochs in the first cycle")
    cycles: int = Field(1, ge=1, description="Number of cycles; each doubles epochs and halves lr")
    warmup: float = Field(0.1, ge=0, le=1, description="Fraction of a cycle spent warming up")
    hold: float = Field(0.4, ge=0, le=1, description="Fraction of a cycle held at max_lr")
    warmdown: float = Field(0.5, ge=0, le=1, description="Fraction of a cycle spent annealing")
    lookahead_k: int = Field(6, ge=1, description="Lookahead synchronisation period")
    lookahead_alpha: float = Field(0.5, gt=0, le=1, description="Lookahead interpolation factor")
    steps_per_epoch: Optional[int] = Field(
        None, ge=1, description="Cap on steps per epoch (defaults to one pass over the batches)"
    )
    augment: bool = Field(True, description="Apply training-time augmentations")
    seed: int = Field(0, description="Seed for batch order, augmentations and initialisation")
    datasets: list[DatasetSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_fractions(self) -> "TrainConfig":
        if abs(self.warmup + self.hold + self.warmdown - 1.0) > 1e-9:
            raise ValueError("warmup + hold + warmdown must equal 1")
        if self.beta1_min > self.beta1_max:
            raise ValueError("beta1_min must not exceed beta1_max")
        return self

    def cycle_max_lr(self, cycle: int) -> float:
        return self.max_lr / 2 ** cycle

    def cycle_epochs(self, cycle: int) -> int:
        return self.epochs * 2 ** cycle


class JitterOrder(str, Enum):
    """Order of the brightness and contrast adjustments."""

    BRIGHTNESS_FIRST = "brightness_first"
    CONTRAST_FIRST = "contrast_first"


class CropBranch(int, Enum):
    """Depth-crop strategy."""

    FULL = 0
    OPTIMAL = 1
    NEAR_OPTIMAL = 2
    UNIFORM = 3


class AugmentationRecord(BaseModel):
    """Every random draw made while building one training view."""

    reflect: bool = Field(False, description="Reverse the ping axis")
    stretch: float = Field(1.0, gt=0, description="Ping-axis stretch factor")
    crop_branch: CropBranch = Field(CropBranch.FULL)
    crop_window: Optional[tuple[float, float]] = Field(
        None, description="Depth window (m) kept by the crop"
    )
    offset: float = Field(0.0, description="Brightness offset")
    gain: float = Field(1.0, description="Contrast gain")
    jitter_order: JitterOrder = Field(JitterOrder.BRIGHTNESS_FIRST)
    elastic: bool = Field(False, description="Apply the elastic deformation")
    elastic_order: int = Field(1, ge=1, le=3, description="Spline order of the deformation")
    elastic_seed: int = Field(0, ge=0, description="Seed of the displacement noise")


class View(ArrayModel):
    """An echogram window mid-way through augmentation, in depth coordinates."""

    image: np.ndarray = Field(..., description="Pings x depths image (Sv or normalised Sv)")
    presence: np.ndarray = Field(..., description="True where a sample was recorded")
    depths: np.ndarray = Field(..., description="Increasing depth of each column (m)")
    targets: SegmentationTargets

    @model_validator(mode="after")
    def _check_shapes(self) -> "View":
        if self.image.shape != (self.targets.n_pings, len(self.depths)):
            raise ValueError("image shape does not match targets and depths")
        return self

    @property
    def orientation(self) -> Orientation:
        return self.targets.orientation


class TrainingView(ArrayModel):
    """A fixed-size model input with targets in bin coordinates."""

    image: np.ndarray = Field(..., description="Normalised image, float32 (W, H)")
    depths: np.ndarray = Field(..., description="Depth (m) of each of the H bins")
    orientation: Orientation
    air: np.ndarray = Field(..., description="Bin index of the expanded entrained-air line")
    air_original: np.ndarray
    seafloor: np.ndarray
    seafloor_original: np.ndarray
    surface: np.ndarray
    surface_valid: np.ndarray
    passive: np.ndarray
    bad_period: np.ndarray
    patches: np.ndarray
    patches_original: np.ndarray
    patches_mixed: np.ndarray
    record: AugmentationRecord = Field(default_factory=AugmentationRecord)

    @field_validator("image")
    @classmethod
    def _float32(cls, value: np.ndarray) -> np.ndarray:
        return np.asarray(value, dtype=np.float32)


class LossBreakdown(ArrayModel):
    """Per-term losses of one batch; ``total`` is the sum of ``terms``."""

    terms: dict[str, torch.Tensor] = Field(..., description="Loss per output, summed over groups")
    group_terms: dict[str, dict[str, torch.Tensor]] = Field(
        default_factory=dict, description="Loss per output for each plane group"
    )
    total: torch.Tensor

    def as_floats(self) -> dict[str, float]:
        values = {name: float(term.detach()) for name, term in self.terms.items()}
        values["total"] = float(self.total.detach())
        return values


class ShardRef(BaseModel):
    """One shard of one shard store."""

    store: str = Field(..., description="Shard store directory")
    index: int = Field(..., ge=0, description="Shard index within the store")
    orientation: Orientation


class IndexedDataset(BaseModel):
    """A dataset with every shard enumerated."""

    name: str
    shards: list[ShardRef] = Field(default_factory=list)
    upsample: int = Field(1, ge=1)
