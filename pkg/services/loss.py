"""
Loss Service
Composite training objective over every output plane

Line planes are scored with a categorical cross-entropy over depth for each ping.
Passive and bad-period planes are collapsed over depth with log-avg-exp and scored
with a binary cross-entropy per ping. Patch planes are scored per pixel. Every term
is a mean over pings (and depths), then over the batch.
"""

import logging
import math
from typing import Union

import numpy as np
import torch
import torch.nn.functional as F

from core.exceptions import DomainError
from models.network import ModelConfig, Plane, PlaneGroup
from models.training import LossBreakdown
from nnet.unet import split_planes

logger = logging.getLogger(__name__)

LINE_TARGETS = {
    Plane.AIR: "air",
    Plane.AIR_ORIGINAL: "air_original",
    Plane.SEAFLOOR: "seafloor",
    Plane.SEAFLOOR_ORIGINAL: "seafloor_original",
    Plane.SURFACE: "surface",
}
PERIOD_TARGETS = {
    Plane.PASSIVE: "passive",
    Plane.BAD_PERIOD: "bad_period",
}
PIXEL_TARGETS = {
    Plane.PATCH: "patches",
    Plane.PATCH_ORIGINAL: "patches_original",
    Plane.PATCH_MIXED: "patches_mixed",
}


def term_name(plane: Plane) -> str:
    return plane.name.lower()


def log_avg_exp(values: Union[torch.Tensor, np.ndarray, list], dim: int = -1) -> torch.Tensor:
    """
    Log of the mean of exponentials along ``dim``.

    Computed as ``logsumexp - log(n)``, which subtracts the maximum internally.

    Raises:
        DomainError: If there are no values along ``dim``
    """
    if not torch.is_tensor(values):
        values = torch.as_tensor(np.asarray(values, dtype=float))
    if values.dim() == 0 or values.shape[dim] == 0:
        raise DomainError("log_avg_exp needs at least one value")
    return torch.logsumexp(values, dim=dim) - math.log(values.shape[dim])


def _line_loss(plane: torch.Tensor, target: torch.Tensor, valid: torch.Tensor) -> torch.Tensor:
    """Per-sample mean over valid pings of the depth cross-entropy, (N,)."""
    n, w, h = plane.shape
    per_ping = F.cross_entropy(plane.reshape(n * w, h), target.reshape(n * w).long(), reduction="none")
    per_ping = per_ping.view(n, w) * valid
    return per_ping.sum(dim=1) / valid.sum(dim=1).clamp(min=1)


def _period_loss(plane: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    collapsed = log_avg_exp(plane, dim=-1)
    per_ping = F.binary_cross_entropy_with_logits(collapsed, target.to(plane.dtype), reduction="none")
    return per_ping.mean(dim=1)


def _pixel_loss(plane: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    per_pixel = F.binary_cross_entropy_with_logits(plane, target.to(plane.dtype), reduction="none")
    return per_pixel.mean(dim=(1, 2))


def _group_weights(group: PlaneGroup, upfacing: torch.Tensor, dtype: torch.dtype) -> torch.Tensor:
    if group == PlaneGroup.DOWNFACING:
        return (~upfacing).to(dtype)
    if group == PlaneGroup.UPFACING:
        return upfacing.to(dtype)
    return torch.ones_like(upfacing, dtype=dtype)


def composite_loss(
    logits: torch.Tensor,
    batch: dict[str, torch.Tensor],
    config: ModelConfig,
) -> LossBreakdown:
    """
    Compute the training loss of a batch.

    Args:
        logits: Network output, (N, out_channels, W, H)
        batch: Targets keyed by name; lines are depth-bin indices (N, W), flags
            are (N, W) booleans, patches are (N, W, H) booleans and ``upfacing``
            is an (N,) boolean
        config: Architecture that produced ``logits``

    Returns:
        Per-output terms summed over plane groups, the per-group terms and the total.
        Orientation-conditioned groups only count samples of their orientation;
        with conditioning the total is halved since every sample is seen twice.
    """
    groups = split_planes(logits, config)
    n_samples = logits.shape[0]
    upfacing = batch["upfacing"].bool().to(logits.device)
    all_pings = torch.ones(batch["air"].shape, dtype=logits.dtype, device=logits.device)
    surface_valid = batch["surface_valid"].to(logits.dtype)

    terms: dict[str, torch.Tensor] = {}
    group_terms: dict[str, dict[str, torch.Tensor]] = {}
    for group, planes in groups.items():
        weights = _group_weights(group, upfacing, logits.dtype)
        if weights.sum() > 0 and (surface_valid * weights[:, None]).sum() == 0:
            logger.warning(f"Every surface ping is masked for the {group.name.lower()} planes")

        per_sample: dict[str, torch.Tensor] = {}
        for plane, key in LINE_TARGETS.items():
            valid = surface_valid if plane == Plane.SURFACE else all_pings
            per_sample[term_name(plane)] = _line_loss(planes[:, plane], batch[key], valid)
        for plane, key in PERIOD_TARGETS.items():
            per_sample[term_name(plane)] = _period_loss(planes[:, plane], batch[key])
        for plane, key in PIXEL_TARGETS.items():
            per_sample[term_name(plane)] = _pixel_loss(planes[:, plane], batch[key])

        group_terms[group.name.lower()] = {
            name: (values * weights).sum() / n_samples for name, values in per_sample.items()
        }

    scale = 0.5 if config.groups > 1 else 1.0
    for plane in Plane:
        name = term_name(plane)
        terms[name] = scale * sum(group[name] for group in group_terms.values())
    total = sum(terms.values())
    return LossBreakdown(terms=terms, group_terms=group_terms, total=total)
