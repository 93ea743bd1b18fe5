"""
Network Blocks
Squeeze-and-excite attention and the inverted residual (MBConv) block
"""

import torch
from torch import nn

from core.exceptions import StructuralError


class SqueezeExcite(nn.Module):
    """
    Channel attention: global average, bottleneck MLP, sigmoid gates.

    The hidden width is ``channels // reduction`` (at least one channel).
    """

    def __init__(self, channels: int, reduction: int = 2):
        super().__init__()
        hidden = max(1, channels // reduction)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.reduce = nn.Conv2d(channels, hidden, kernel_size=1)
        self.expand = nn.Conv2d(hidden, channels, kernel_size=1)

    def gates(self, x: torch.Tensor) -> torch.Tensor:
        """Per-sample, per-channel gates in (0, 1), shaped (N, C, 1, 1)."""
        squeezed = torch.relu(self.reduce(self.pool(x)))
        return torch.sigmoid(self.expand(squeezed))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x * self.gates(x)


class MBConv(nn.Module):
    """
    Inverted residual block.

    Pointwise expansion (skipped for an expansion factor of 1), depthwise
    ``kernel_size`` convolution with same padding, squeeze-and-excite, then a
    pointwise projection. The result is added to a residual branch which is the
    identity, or a pointwise convolution when the channel count changes.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        expansion: int = 6,
        kernel_size: int = 5,
        se_reduction: int = 2,
    ):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        hidden = in_channels * expansion

        if expansion == 1:
            self.expand = nn.Identity()
        else:
            self.expand = nn.Sequential(
                nn.Conv2d(in_channels, hidden, kernel_size=1, bias=False),
                nn.BatchNorm2d(hidden),
                nn.ReLU(inplace=True),
            )
        self.depthwise = nn.Sequential(
            nn.Conv2d(
                hidden,
                hidden,
                kernel_size=kernel_size,
                padding=kernel_size // 2,
                groups=hidden,
                bias=False,
            ),
            nn.BatchNorm2d(hidden),
            nn.ReLU(inplace=True),
        )
        self.se = SqueezeExcite(hidden, se_reduction)
        self.project = nn.Sequential(
            nn.Conv2d(hidden, out_channels, kernel_size=1, bias=False),
            nn.BatchNorm2d(out_channels),
        )
        if in_channels == out_channels:
            self.residual = nn.Identity()
        else:
            self.residual = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, kernel_size=1, bias=False),
                nn.BatchNorm2d(out_channels),
            )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or x.shape[1] != self.in_channels:
            raise StructuralError(
                f"MBConv expects (N, {self.in_channels}, W, H) input, got {tuple(x.shape)}"
            )
        y = self.project(self.se(self.depthwise(self.expand(x))))
        return y + self.residual(x)
