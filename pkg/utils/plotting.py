"""
PNG plots of echograms with line overlays and of error distributions.

Uses the non-interactive Agg backend so plotting works without a display.
"""

import logging
from pathlib import Path
from typing import Optional, Union

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib import pyplot as plt

from constants.messages import SuccessMessages
from models.echogram import BoundaryLine, Echogram, RegionSet

logger = logging.getLogger(__name__)
logging.getLogger("matplotlib").setLevel(logging.WARNING)

SV_LIMITS_DB = (-90.0, -30.0)
LINE_COLOURS = {"air": "tab:cyan", "seafloor": "tab:orange", "surface": "tab:green"}


def plot_echogram(
    echogram: Echogram,
    path: Union[str, Path],
    lines: Optional[dict[str, Union[BoundaryLine, np.ndarray]]] = None,
    regions: Optional[RegionSet] = None,
    title: Optional[str] = None,
) -> Path:
    """
    Draw Sv (pings across, depth down) with optional lines and shaded regions.

    Args:
        echogram: Standardised echogram
        path: Output PNG path
        lines: Lines keyed by label; labels starting with a known kind get its colour
        regions: Periods shaded and patches outlined
        title: Figure title
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pings = np.arange(echogram.n_pings)

    fig, ax = plt.subplots(figsize=(10, 4))
    sv = np.where(echogram.presence, echogram.sv, np.nan)
    mesh = ax.pcolormesh(
        pings, echogram.depths, sv.T, cmap="viridis", vmin=SV_LIMITS_DB[0], vmax=SV_LIMITS_DB[1], shading="nearest"
    )
    fig.colorbar(mesh, ax=ax, label="Sv (dB)")

    for label, line in (lines or {}).items():
        depths = line.depths if isinstance(line, BoundaryLine) else np.asarray(line, dtype=float)
        colour = next((c for kind, c in LINE_COLOURS.items() if label.startswith(kind)), None)
        ax.plot(pings, depths, lw=1, color=colour, label=label)

    if regions is not None:
        for start, stop in regions.passive_periods:
            ax.axvspan(start - 0.5, stop + 0.5, color="grey", alpha=0.4)
        for start, stop in regions.bad_periods:
            ax.axvspan(start - 0.5, stop + 0.5, color="red", alpha=0.3)
        if regions.patch_mask.any():
            ax.contour(pings, regions.depths, regions.patch_mask.T.astype(float), levels=[0.5], colors="red")

    ax.invert_yaxis()
    ax.set_xlabel("Ping")
    ax.set_ylabel("Depth (m)")
    if lines:
        ax.legend(loc="lower right", fontsize="small")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    logger.info(SuccessMessages.PLOT_WRITTEN.format(path=path))
    return path


def plot_error_cdf(
    curves: dict[str, list[tuple[float, float]]],
    path: Union[str, Path],
    title: Optional[str] = None,
) -> Path:
    """Step plot of the cumulative distribution of absolute line errors, one curve per label."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, curve in curves.items():
        if not curve:
            continue
        errors, fractions = zip(*curve)
        ax.step(errors, np.asarray(fractions) * 100, where="post", label=label)
    ax.set_xlabel("Absolute error (m)")
    ax.set_ylabel("Pings within error (%)")
    ax.set_ylim(0, 100)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    logger.info(SuccessMessages.PLOT_WRITTEN.format(path=path))
    return path
