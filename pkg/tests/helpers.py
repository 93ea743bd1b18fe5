"""Builders shared by the test modules."""

from typing import Optional

import numpy as np
import torch

from models.echogram import Echogram, Orientation


def make_echogram(
    sv: np.ndarray,
    depths: Optional[np.ndarray] = None,
    orientation: Orientation = Orientation.DOWNFACING,
    flipped: bool = False,
    start: float = 1.6e9,
) -> Echogram:
    """Echogram from an Sv matrix with one ping per second; NaN cells are missing."""
    sv = np.asarray(sv, dtype=float)
    n_pings, n_depths = sv.shape
    if depths is None:
        depths = np.arange(n_depths, dtype=float)
    return Echogram(
        timestamps=start + np.arange(n_pings, dtype=float),
        depths=np.asarray(depths, dtype=float),
        sv=sv,
        presence=np.isfinite(sv),
        orientation=orientation,
        flipped=flipped,
    )


def random_loss_batch(n_samples: int, width: int, height: int, seed: int = 0) -> dict:
    """Targets for ``composite_loss`` with alternating orientations."""
    generator = torch.Generator().manual_seed(seed)

    def lines() -> torch.Tensor:
        return torch.randint(0, height, (n_samples, width), generator=generator)

    def flags(*shape: int) -> torch.Tensor:
        return torch.rand(*shape, generator=generator) > 0.5

    return {
        "air": lines(),
        "air_original": lines(),
        "seafloor": lines(),
        "seafloor_original": lines(),
        "surface": lines(),
        "surface_valid": torch.ones(n_samples, width, dtype=torch.bool),
        "passive": flags(n_samples, width),
        "bad_period": flags(n_samples, width),
        "patches": flags(n_samples, width, height),
        "patches_original": flags(n_samples, width, height),
        "patches_mixed": flags(n_samples, width, height),
        "upfacing": torch.arange(n_samples) % 2 == 1,
    }
