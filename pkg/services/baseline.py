"""
Baseline Service
Classical line pickers used as a benchmark for the network

- Gaussian blur with mask-weighted renormalisation
- Threshold-offset picking below the surface line (stationary entrained air)
- Best-bottom-candidate picking (seafloor, sea surface and, on the inverted
  echogram, mobile entrained air)

Pickers take standardised echograms (depth increasing along axis 1) and return
lines in the same coordinates.
"""

import logging
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from constants.messages import SuccessMessages
from core.exceptions import ValidationError
from models.baseline import BaselineConfig
from models.echogram import BoundaryLine, Echogram, Orientation
from services.formats.evl import write_evl
from services.formats.sv_csv import read_sv_csv
from services.inference import line_file
from services.preprocessing import regrid_depth, standardize_orientation

logger = logging.getLogger(__name__)


# ----------------------------------------------------------------------------
# Blur
# ----------------------------------------------------------------------------

def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """Normalised ``size`` x ``size`` Gaussian stencil."""
    if size % 2 == 0:
        raise ValidationError(f"Kernel size must be odd, got {size}")
    offsets = np.arange(size) - size // 2
    profile = np.exp(-0.5 * (offsets / sigma) ** 2)
    kernel = np.outer(profile, profile)
    return kernel / kernel.sum()


def gaussian_blur_2d(
    echogram: Echogram,
    kernel: int = 13,
    sigma: float = 2.0,
    wrap: bool = False,
) -> Echogram:
    """
    Blur Sv over pings and depth samples.

    Missing cells carry no weight: the blurred value is the kernel-weighted mean
    of the present cells in the neighbourhood. Cells with no present neighbour
    stay missing.

    Args:
        echogram: Echogram to blur
        kernel: Odd side of the square kernel (samples)
        sigma: Standard deviation in both directions (samples)
        wrap: Wrap around the borders instead of renormalising there
    """
    stencil = gaussian_kernel(kernel, sigma)
    mode = "wrap" if wrap else "constant"
    present = echogram.presence & np.isfinite(echogram.sv)
    weighted = ndimage.correlate(np.where(present, echogram.sv, 0.0), stencil, mode=mode, cval=0.0)
    weights = ndimage.correlate(present.astype(float), stencil, mode=mode, cval=0.0)

    covered = weights > 1e-12
    sv = np.full(echogram.sv.shape, np.nan)
    sv[covered] = weighted[covered] / weights[covered]
    return echogram.model_copy(update={"sv": sv, "presence": covered})


# ----------------------------------------------------------------------------
# Pickers
# ----------------------------------------------------------------------------

def _as_depths(line: Union[BoundaryLine, np.ndarray, float], n_pings: int) -> np.ndarray:
    if isinstance(line, BoundaryLine):
        return line.depths
    return np.broadcast_to(np.asarray(line, dtype=float), (n_pings,))


def threshold_offset_pick(
    echogram: Echogram,
    surface: Union[BoundaryLine, np.ndarray, float],
    min_db: float = -80.0,
) -> BoundaryLine:
    """
    First sample at or below the surface line whose Sv falls under ``min_db``.

    Args:
        echogram: Standardised (usually blurred) echogram
        surface: Surface line per ping (m)
        min_db: Threshold marking the end of the entrained-air return

    Returns:
        Entrained-air line; pings without a crossing sit at the deepest sample
        and are flagged invalid
    """
    surface = _as_depths(surface, echogram.n_pings)
    below = echogram.depths[None, :] >= surface[:, None]
    quiet = below & (echogram.sv < min_db)
    found = quiet.any(axis=1)
    index = np.where(found, np.argmax(quiet, axis=1), echogram.n_depths - 1)
    if not found.all():
        logger.debug(f"Threshold offset: {int((~found).sum())} pings without a crossing")
    return BoundaryLine(depths=echogram.depths[index], valid=found)


def _candidate_indices(
    sv: np.ndarray,
    good_pick_db: float,
    discrimination_db: float,
    backstep_db: float,
    run: int = 3,
    layer_db: Optional[float] = None,
) -> np.ndarray:
    """
    Sample index of the first strong layer beneath weak signal, per ping.

    Samples are ordered outward from where the search starts. A candidate is the
    first sample that begins ``run`` consecutive samples above ``good_pick_db``
    and directly follows a sample at or below ``discrimination_db``. With
    ``layer_db``, the median of the strong layer must also reach it. From the
    candidate the pick steps back while the previous sample is at least
    ``backstep_db``.

    Returns:
        Index per ping, -1 where there is no candidate
    """
    n_pings, n_samples = sv.shape
    picks = np.full(n_pings, -1, dtype=int)
    if n_samples <= run:
        return picks

    strong = sv > good_pick_db
    weak = sv <= discrimination_db
    sustained = sliding_window_view(strong, run, axis=1).all(axis=2)
    onset = np.zeros_like(strong)
    onset[:, 1:sustained.shape[1]] = sustained[:, 1:] & weak[:, :sustained.shape[1] - 1]

    for ping in np.flatnonzero(onset.any(axis=1)):
        column = sv[ping]
        for start in np.flatnonzero(onset[ping]):
            if layer_db is not None:
                end = start
                while end < n_samples and strong[ping, end]:
                    end += 1
                if np.median(column[start:end]) < layer_db:
                    continue
            pick = start
            while pick > 0 and column[pick - 1] >= backstep_db:
                pick -= 1
            picks[ping] = pick
            break
    return picks


def invert_sv(sv: np.ndarray, gain: float = -1.0, offset: float = -150.0) -> np.ndarray:
    """Swap strong and weak: ``gain * Sv + offset``."""
    return gain * sv + offset


def best_bottom_candidate(
    echogram: Echogram,
    good_pick_db: float = -70.0,
    discrimination_db: float = -70.0,
    backstep_db: float = -50.0,
    invert: bool = False,
    from_deepest: bool = False,
    run: int = 3,
    layer_db: Optional[float] = None,
    gain: float = -1.0,
    offset: float = -150.0,
) -> BoundaryLine:
    """
    Best-bottom-candidate line of a standardised echogram.

    Args:
        echogram: Standardised echogram
        good_pick_db: Minimum Sv of a good pick
        discrimination_db: Maximum Sv of the weak signal before a pick
        backstep_db: The pick retreats toward the start while Sv stays at least this
        invert: Search ``gain * Sv + offset`` instead of Sv
        from_deepest: Search from the deepest sample upward
        run: Consecutive strong samples of a good pick
        layer_db: Minimum median Sv of the strong layer, if any

    Returns:
        Picked line; pings without a candidate sit at the search start and are
        flagged invalid
    """
    sv = invert_sv(echogram.sv, gain, offset) if invert else echogram.sv
    if from_deepest:
        sv = sv[:, ::-1]
    picks = _candidate_indices(sv, good_pick_db, discrimination_db, backstep_db, run, layer_db)
    valid = picks >= 0
    if from_deepest:
        picks = echogram.n_depths - 1 - picks
        fallback = echogram.depths[-1]
    else:
        fallback = echogram.depths[0]
    values = np.where(valid, echogram.depths[np.clip(picks, 0, echogram.n_depths - 1)], fallback)
    if not valid.all():
        logger.debug(f"Best bottom candidate: {int((~valid).sum())} pings without a pick")
    return BoundaryLine(depths=values.astype(float), valid=valid)


def _require(echogram: Echogram, orientation: Orientation, picker: str) -> None:
    if echogram.orientation != orientation:
        raise ValidationError(f"{picker} needs a {orientation.value} echogram")


def pick_seafloor(echogram: Echogram, config: Optional[BaselineConfig] = None) -> BoundaryLine:
    """Seafloor of a downfacing echogram, raised by the bottom offset."""
    config = config or BaselineConfig()
    _require(echogram, Orientation.DOWNFACING, "Seafloor picking")
    line = best_bottom_candidate(
        echogram,
        config.good_pick_db,
        config.discrimination_db,
        config.backstep_db,
        run=config.good_pick_run,
        layer_db=config.layer_db,
    )
    raised = np.maximum(line.depths - config.bottom_offset, echogram.depths[0])
    return BoundaryLine(
        depths=np.where(line.valid, raised, echogram.depths[-1]), valid=line.valid
    )


def pick_surface(echogram: Echogram, config: Optional[BaselineConfig] = None) -> BoundaryLine:
    """Sea surface of an upfacing echogram, searching up from the transducer."""
    config = config or BaselineConfig()
    _require(echogram, Orientation.UPFACING, "Surface picking")
    # standardised upfacing echograms have the transducer at the deepest sample
    line = best_bottom_candidate(
        echogram,
        config.good_pick_db,
        config.discrimination_db,
        config.surface_backstep_db,
        from_deepest=True,
        run=config.good_pick_run,
        layer_db=config.layer_db,
    )
    return BoundaryLine(depths=np.where(line.valid, line.depths, echogram.depths[0]), valid=line.valid)


def pick_entrained_air_stationary(
    echogram: Echogram,
    config: Optional[BaselineConfig] = None,
    surface: Optional[BoundaryLine] = None,
) -> BoundaryLine:
    """
    Blur then threshold-offset entrained-air picking below the surface line.

    The surface defaults to :func:`pick_surface` for upfacing echograms and the
    top of the recording otherwise.
    """
    config = config or BaselineConfig()
    if surface is None:
        if echogram.orientation == Orientation.UPFACING:
            surface = pick_surface(echogram, config)
        else:
            surface = BoundaryLine.from_depths(np.full(echogram.n_pings, echogram.depths[0]))
    blurred = gaussian_blur_2d(echogram, config.blur_kernel, config.blur_sigma, config.blur_wrap)
    return threshold_offset_pick(blurred, surface, config.min_db)


def pick_entrained_air_mobile(
    echogram: Echogram, config: Optional[BaselineConfig] = None
) -> BoundaryLine:
    """Best bottom candidate on the inverted echogram, where the water column is the strong layer."""
    config = config or BaselineConfig()
    return best_bottom_candidate(
        echogram,
        config.good_pick_db,
        config.discrimination_db,
        config.backstep_db,
        invert=True,
        run=config.good_pick_run,
        gain=config.invert_gain,
        offset=config.invert_offset,
    )


# ----------------------------------------------------------------------------
# Running and export
# ----------------------------------------------------------------------------

class BaselineAlgorithm(str, Enum):
    THRESHOLD_OFFSET = "threshold-offset"
    BBC_AIR = "bbc-air"
    BBC_SEAFLOOR = "bbc-seafloor"
    BBC_SURFACE = "bbc-surface"


# Line kind each algorithm produces
ALGORITHM_KINDS = {
    BaselineAlgorithm.THRESHOLD_OFFSET: "air",
    BaselineAlgorithm.BBC_AIR: "air",
    BaselineAlgorithm.BBC_SEAFLOOR: "seafloor",
    BaselineAlgorithm.BBC_SURFACE: "surface",
}


def run_baselines(
    echogram: Echogram, config: Optional[BaselineConfig] = None
) -> dict[BaselineAlgorithm, BoundaryLine]:
    """
    Every baseline applicable to the echogram's orientation.

    Seafloor picking runs on downfacing recordings and surface picking on upfacing
    ones. The stationary entrained-air picker searches below the picked surface.
    """
    config = config or BaselineConfig()
    if echogram.orientation == Orientation.UPFACING and not echogram.flipped:
        raise ValidationError("Baselines need a standardised echogram")

    lines = {}
    surface = None
    if echogram.orientation == Orientation.UPFACING:
        surface = pick_surface(echogram, config)
        lines[BaselineAlgorithm.BBC_SURFACE] = surface
    else:
        lines[BaselineAlgorithm.BBC_SEAFLOOR] = pick_seafloor(echogram, config)
    lines[BaselineAlgorithm.THRESHOLD_OFFSET] = pick_entrained_air_stationary(echogram, config, surface)
    lines[BaselineAlgorithm.BBC_AIR] = pick_entrained_air_mobile(echogram, config)
    for algorithm, line in lines.items():
        logger.info(f"{algorithm.value}: {int(line.valid.sum())}/{len(line)} pings picked")
    return lines


def write_baseline_lines(
    echogram: Echogram,
    lines: dict[BaselineAlgorithm, BoundaryLine],
    output_dir: Union[str, Path],
    stem: str,
) -> list[Path]:
    """Write each line as ``<stem>.<kind>.<algorithm>.evl`` in native coordinates."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for algorithm, line in lines.items():
        path = output_dir / f"{stem}.{ALGORITHM_KINDS[algorithm]}.{algorithm.value}.evl"
        write_evl(line_file(echogram.timestamps, line, echogram.depths, echogram.orientation), path)
        written.append(path)
    return written


def baseline_csv(
    path: Union[str, Path],
    output_dir: Union[str, Path],
    orientation: Orientation = Orientation.DOWNFACING,
    config: Optional[BaselineConfig] = None,
) -> dict[BaselineAlgorithm, BoundaryLine]:
    """Read an Sv CSV export, run every applicable baseline and write the lines."""
    path = Path(path)
    echogram = standardize_orientation(regrid_depth(read_sv_csv(path), orientation))
    lines = run_baselines(echogram, config)
    write_baseline_lines(echogram, lines, output_dir, path.stem)
    logger.info(SuccessMessages.ANNOTATION_WRITTEN.format(path=path))
    return lines
