"""
Synthetic Recording Service
Generates echograms with exact ground truth for desk-scale training and evaluation

The entrained-air boundary follows a tidal cycle with smoothed roughness. Entrained
air is loud and porous near its boundary, clear water is quiet with sparse fish,
and the seafloor (downfacing) or sea surface (upfacing) closes the water column.
Passive periods are attenuated in the raw echogram; bad-data periods and patches are
removed from the clean one.
"""

import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.ndimage import gaussian_filter1d

from constants.messages import SuccessMessages
from models.echogram import (
    BoundaryLine,
    Echogram,
    Orientation,
    RegionSet,
    SegmentationTargets,
    excluded_above,
    excluded_below,
)
from models.formats import RecordingPaths
from models.synth import SynthConfig, SyntheticRecording
from services.formats.evl import write_evl
from services.formats.evr import write_evr
from services.formats.sv_csv import write_sv_csv
from services.inference import line_file, region_file
from services.preprocessing import build_targets, recording_from_echogram
from utils.parallel import map_jobs
from utils.runs import runs_to_flags

logger = logging.getLogger(__name__)

# Depth over which air returns thin out towards the boundary (m)
POROSITY_SCALE_M = 1.0
FISH_SIZE_PINGS = 2.0
FISH_SIZE_M = 0.4
FISH_REACH_PINGS = 8
PERIOD_LENGTH_PINGS = (5, 20)
PATCH_WIDTH_PINGS = (5, 20)
PATCH_HEIGHT_M = (1.0, 3.0)


def smoothed_noise(rng: np.random.Generator, n: int, std: float, smoothing: float) -> np.ndarray:
    """Gaussian noise smoothed over ``smoothing`` samples and rescaled to ``std``."""
    if std == 0 or n < 2:
        return np.zeros(n)
    noise = rng.standard_normal(n)
    if smoothing > 0:
        noise = gaussian_filter1d(noise, smoothing, mode="nearest")
    spread = noise.std()
    return noise / spread * std if spread > 0 else np.zeros(n)


def random_periods(
    rng: np.random.Generator,
    n_pings: int,
    rate: float,
    taken: np.ndarray,
    length: tuple[int, int] = PERIOD_LENGTH_PINGS,
) -> list[tuple[int, int]]:
    """
    Random inclusive ping intervals, ``rate`` per 1000 pings on average.

    Intervals keep at least one free ping between each other and any ping already
    in ``taken``, which is updated in place.
    """
    periods = []
    for _ in range(rng.poisson(rate * n_pings / 1000)):
        size = int(rng.integers(length[0], length[1] + 1))
        if size >= n_pings - 2:
            continue
        start = int(rng.integers(1, n_pings - size))
        stop = start + size - 1
        if taken[max(start - 1, 0):stop + 2].any():
            continue
        taken[start:stop + 1] = True
        periods.append((start, stop))
    return sorted(periods)


def _boundaries(config: SynthConfig, rng: np.random.Generator):
    """Air line, seafloor, surface and the top and bottom of the water column."""
    n = config.n_pings
    t = np.arange(n)
    span = config.depth_max - config.depth_min
    usable = span * (1 - config.empty_range_fraction)
    fraction = config.air_base + config.air_amplitude * np.abs(np.sin(2 * np.pi * t / config.tide_period))
    roughness = smoothed_noise(rng, n, config.roughness, config.roughness_smoothing)

    seafloor = surface = None
    if config.orientation == Orientation.DOWNFACING:
        ramp = config.seafloor_slope * usable * (t / max(n - 1, 1) - 0.5)
        seafloor = config.depth_min + config.seafloor_fraction * usable + ramp
        seafloor = np.clip(seafloor, config.depth_min + 0.2 * usable, config.depth_max)
        top, bottom = np.full(n, config.depth_min), seafloor
    else:
        tide = config.surface_tide * np.sin(2 * np.pi * t / config.tide_period)
        surface = config.depth_min + span * config.empty_range_fraction + config.surface_depth + tide
        surface = np.clip(surface, config.depth_min, config.depth_max - 0.2 * usable)
        top, bottom = surface, np.full(n, config.depth_max)

    air = top + fraction * (bottom - top) + roughness
    air = np.clip(air, top, bottom - 2 * config.resolution)
    return air, seafloor, surface, top, bottom


def _add_fish(
    sv: np.ndarray,
    rng: np.random.Generator,
    config: SynthConfig,
    depths: np.ndarray,
    air: np.ndarray,
    bottom: np.ndarray,
) -> None:
    n = config.n_pings
    for _ in range(rng.poisson(config.fish_rate * n / 100)):
        centre = int(rng.integers(0, n))
        depth = rng.uniform(air[centre], bottom[centre])
        pings = np.arange(max(centre - FISH_REACH_PINGS, 0), min(centre + FISH_REACH_PINGS + 1, n))
        distance = ((pings[:, None] - centre) / FISH_SIZE_PINGS) ** 2 + ((depths[None, :] - depth) / FISH_SIZE_M) ** 2
        sv[pings] = np.maximum(sv[pings], config.fish_sv - 3.0 * distance)


def _patches(
    rng: np.random.Generator,
    config: SynthConfig,
    depths: np.ndarray,
    water: np.ndarray,
    blocked: np.ndarray,
) -> np.ndarray:
    """Elliptical bad-data patches inside the water column of unblocked pings."""
    n = config.n_pings
    mask = np.zeros((n, len(depths)), dtype=bool)
    for _ in range(rng.poisson(config.patch_rate * n / 1000)):
        centre = int(rng.integers(0, n))
        column = np.flatnonzero(water[centre])
        if column.size == 0:
            continue
        depth = depths[column[rng.integers(0, column.size)]]
        half_width = rng.uniform(*PATCH_WIDTH_PINGS) / 2
        half_height = rng.uniform(*PATCH_HEIGHT_M) / 2
        pings = np.arange(n)[:, None]
        inside = ((pings - centre) / half_width) ** 2 + ((depths[None, :] - depth) / half_height) ** 2 <= 1
        mask |= inside
    return mask & water & ~blocked[:, None]


def synthesize(config: SynthConfig, name: str = "synthetic") -> SyntheticRecording:
    """
    Generate one recording with its ground truth.

    The result is a deterministic function of ``config`` (including its seed).
    Everything is produced in increasing-depth coordinates; upfacing recordings
    are marked as standardised.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_pings
    depths = np.linspace(config.depth_min, config.depth_max, config.n_depths)
    timestamps = config.start_time + config.ping_interval * np.arange(n)
    grid = depths[None, :]

    air, seafloor, surface, top, bottom = _boundaries(config, rng)

    sv = rng.normal(config.water_sv, config.water_sv_std, (n, len(depths)))
    _add_fish(sv, rng, config, depths, air, bottom)

    in_air = (grid < air[:, None]) & (grid >= top[:, None])
    dropout = config.air_porosity * np.exp(-(air[:, None] - grid) / POROSITY_SCALE_M)
    loud = rng.normal(config.air_sv, config.air_sv_std, sv.shape)
    sv = np.where(in_air & (rng.random(sv.shape) >= dropout), loud, sv)

    if seafloor is not None:
        below = grid > seafloor[:, None]
        floor = config.seafloor_sv - 0.5 * (grid - seafloor[:, None]) + rng.normal(0, 2.0, sv.shape)
        sv = np.where(below, floor, sv)
    if surface is not None:
        above = grid < surface[:, None]
        reverberation = np.maximum(config.surface_sv - 3.0 * (surface[:, None] - grid), config.water_sv)
        sv = np.where(above, reverberation + rng.normal(0, config.water_sv_std, sv.shape), sv)

    taken = np.zeros(n, dtype=bool)
    for start, stop in config.passive_periods:
        taken[start:stop + 1] = True
    passive_periods = sorted(
        [tuple(p) for p in config.passive_periods] + random_periods(rng, n, config.passive_rate, taken)
    )
    bad_periods = random_periods(rng, n, config.bad_period_rate, taken)
    passive = runs_to_flags(passive_periods, n)
    bad = runs_to_flags(bad_periods, n)
    sv[passive] -= config.passive_attenuation

    water = ~excluded_above(depths, air)
    if seafloor is not None:
        water &= ~excluded_below(depths, seafloor)
    patch_mask = _patches(rng, config, depths, water, passive | bad)
    mask = water & ~(passive | bad)[:, None] & ~patch_mask

    raw = Echogram(
        timestamps=timestamps,
        depths=depths,
        sv=sv,
        presence=np.ones(sv.shape, dtype=bool),
        orientation=config.orientation,
        flipped=config.orientation == Orientation.UPFACING,
    )
    clean = raw.model_copy(update={"sv": np.where(mask, sv, np.nan), "presence": mask})
    logger.debug(
        f"Synthesised {name}: {n} pings, {len(passive_periods)} passive, "
        f"{len(bad_periods)} bad periods, {int(patch_mask.sum())} patch pixels"
    )
    return SyntheticRecording(
        name=name,
        raw=raw,
        clean=clean,
        air=air,
        seafloor=seafloor,
        surface=surface,
        passive_periods=passive_periods,
        bad_periods=bad_periods,
        patch_mask=patch_mask,
    )


def recording_targets(recording: SyntheticRecording) -> SegmentationTargets:
    """Targets of a synthetic recording built from its raw/clean pair and lines."""
    return build_targets(
        recording.raw,
        recording.clean,
        air=recording.air,
        seafloor=recording.seafloor,
        surface=recording.surface,
        passive_schedule=recording.passive_periods,
    )


def generate_recording(config: SynthConfig) -> tuple[Echogram, SegmentationTargets]:
    """Generate a recording and its segmentation targets."""
    recording = synthesize(config)
    return recording.raw, recording_targets(recording)


# ----------------------------------------------------------------------------
# Export
# ----------------------------------------------------------------------------

def render_exports(recording: SyntheticRecording, directory: Union[str, Path]) -> RecordingPaths:
    """
    Write a recording as a real export would look: raw and clean Sv CSV files,
    EVL lines and an EVR region file, all in native coordinates.
    """
    raw = recording.raw
    paths = RecordingPaths(name=recording.name, directory=str(directory), orientation=raw.orientation)
    Path(directory).mkdir(parents=True, exist_ok=True)

    write_sv_csv(recording_from_echogram(raw), paths.raw_csv)
    write_sv_csv(recording_from_echogram(recording.clean), paths.clean_csv)

    lines = {"air": recording.air, "seafloor": recording.seafloor, "surface": recording.surface}
    for kind, values in lines.items():
        if values is None:
            continue
        line = line_file(raw.timestamps, BoundaryLine.from_depths(values), raw.depths, raw.orientation)
        write_evl(line, paths.line(kind))

    regions = RegionSet(
        passive_periods=recording.passive_periods,
        bad_periods=recording.bad_periods,
        patch_mask=recording.patch_mask,
        depths=raw.depths,
    )
    write_evr(region_file(raw.timestamps, regions, raw.orientation), paths.regions())
    return paths


def generate_corpus(
    config: SynthConfig,
    count: int,
    directory: Union[str, Path],
    prefix: str = "synth",
    jobs: int = 1,
    configs: Optional[list[SynthConfig]] = None,
) -> list[RecordingPaths]:
    """
    Write ``count`` recordings seeded ``config.seed``, ``config.seed + 1``, ...

    Args:
        config: Template configuration
        count: Number of recordings
        directory: Output corpus directory
        prefix: Recording names are ``<prefix><index:03d>``
        jobs: Worker count
        configs: Explicit per-recording configurations overriding the template
    """
    configs = configs or [config.model_copy(update={"seed": config.seed + i}) for i in range(count)]

    def render(item: tuple[int, SynthConfig]) -> RecordingPaths:
        index, item_config = item
        return render_exports(synthesize(item_config, f"{prefix}{index:03d}"), directory)

    written = map_jobs(render, list(enumerate(configs)), jobs)
    logger.info(SuccessMessages.CORPUS_WRITTEN.format(count=len(written), directory=directory))
    return written
