"""
Echogram U-Net
Encoder/decoder segmentation network emitting the output planes

Tensors are laid out (N, C, W, H) with W the ping axis and H the depth axis.
The encoder halves depth after every block and time after every second block,
so a (128, 512) input reaches the bottleneck at (16, 8).
"""

import logging
from typing import Optional, Sequence, Union

import torch
import torch.nn.functional as F
from torch import nn

from core.exceptions import StructuralError
from models.echogram import Orientation
from models.network import ModelConfig, PlaneGroup
from nnet.blocks import MBConv

logger = logging.getLogger(__name__)


class EchogramUNet(nn.Module):
    """U-Net of MBConv blocks with one skip connection per resolution."""

    def __init__(self, config: Optional[ModelConfig] = None):
        super().__init__()
        self.config = config or ModelConfig()
        cfg = self.config
        width = cfg.width

        self.stem = nn.Sequential(
            nn.Conv2d(1, width, kernel_size=cfg.kernel_size, padding=cfg.kernel_size // 2, bias=False),
            nn.BatchNorm2d(width),
            nn.ReLU(inplace=True),
        )

        self.down = nn.ModuleList()
        self.pools = nn.ModuleList()
        for block in range(1, cfg.depth + 1):
            expansion = cfg.first_expansion if block == 1 else cfg.expansion
            self.down.append(MBConv(width, width, expansion, cfg.kernel_size, cfg.se_reduction))
            # odd blocks pool depth only, even blocks pool time and depth
            kernel = (1, 2) if block % 2 else (2, 2)
            self.pools.append(nn.MaxPool2d(kernel_size=kernel, stride=kernel))

        if cfg.bottleneck:
            self.bottleneck = MBConv(width, width, cfg.expansion, cfg.kernel_size, cfg.se_reduction)
        else:
            self.bottleneck = nn.Identity()

        self.up = nn.ModuleList(
            MBConv(2 * width, width, cfg.expansion, cfg.kernel_size, cfg.se_reduction)
            for _ in range(cfg.depth)
        )
        self.head = nn.Conv2d(width, cfg.out_channels, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """
        Compute output logits.

        Args:
            x: Normalised echograms, (N, 1, W, H)

        Returns:
            Logits, (N, out_channels, W, H)

        Raises:
            StructuralError: If the input shape cannot be pooled down to the bottleneck
        """
        self.check_input(x)

        x = self.stem(x)
        skips = []
        for block, pool in zip(self.down, self.pools):
            x = block(x)
            skips.append(x)
            x = pool(x)

        x = self.bottleneck(x)

        for block, skip in zip(self.up, reversed(skips)):
            x = F.interpolate(x, size=skip.shape[-2:], mode="bilinear", align_corners=False)
            x = block(torch.cat([x, skip], dim=1))

        return self.head(x)

    def check_input(self, x: torch.Tensor) -> None:
        cfg = self.config
        if x.dim() != 4 or x.shape[1] != 1:
            raise StructuralError(f"Expected input of shape (N, 1, W, H), got {tuple(x.shape)}")
        width, height = x.shape[-2:]
        if width % cfg.time_factor or height % cfg.depth_factor:
            raise StructuralError(
                f"Input ({width}, {height}) is not divisible by ({cfg.time_factor}, {cfg.depth_factor})"
            )

    def bottleneck_shape(self, width: int, height: int) -> tuple[int, int]:
        return width // self.config.time_factor, height // self.config.depth_factor


# ----------------------------------------------------------------------------
# Parameter accounting
# ----------------------------------------------------------------------------

def param_count(model_or_config: Union[nn.Module, ModelConfig]) -> int:
    """Number of trainable scalars of a model (or of the model a config builds)."""
    if isinstance(model_or_config, ModelConfig):
        model_or_config = EchogramUNet(model_or_config)
    return sum(p.numel() for p in model_or_config.parameters() if p.requires_grad)


# ----------------------------------------------------------------------------
# Output planes
# ----------------------------------------------------------------------------

def split_planes(logits: torch.Tensor, config: ModelConfig) -> dict[PlaneGroup, torch.Tensor]:
    """
    Split logits into plane groups.

    Returns:
        Mapping of group to (N, n_planes, W, H) logits; an unconditional model has
        only :attr:`PlaneGroup.UNCONDITIONAL`
    """
    if logits.shape[1] != config.out_channels:
        raise StructuralError(
            f"Expected {config.out_channels} output planes, got {logits.shape[1]}"
        )
    chunks = torch.split(logits, config.n_planes, dim=1)
    return {PlaneGroup(index): chunk for index, chunk in enumerate(chunks)}


def select_group(
    logits: torch.Tensor,
    config: ModelConfig,
    orientations: Union[Orientation, Sequence[Orientation]],
    conditioned: bool = True,
) -> torch.Tensor:
    """
    Pick the planes used to annotate each sample.

    With ``conditioned`` a conditional model answers with the group matching each
    sample's orientation; otherwise (or for an unconditional model) the
    unconditional group is used.
    """
    groups = split_planes(logits, config)
    if not conditioned or len(groups) == 1:
        return groups[PlaneGroup.UNCONDITIONAL]

    if isinstance(orientations, Orientation):
        orientations = [orientations] * logits.shape[0]
    upfacing = torch.tensor(
        [Orientation(o) == Orientation.UPFACING for o in orientations], device=logits.device
    ).view(-1, 1, 1, 1)
    return torch.where(upfacing, groups[PlaneGroup.UPFACING], groups[PlaneGroup.DOWNFACING])
