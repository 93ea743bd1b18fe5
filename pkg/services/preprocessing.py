"""
Preprocessing Service
Turns Sv exports and annotated lines into echograms and segmentation targets

All echograms leave this module on a uniform depth grid with depth increasing
along axis 1, whatever the echosounder orientation.
"""

import logging
import warnings
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np
from matplotlib.path import Path as MplPath

from constants.defaults import (
    PASSIVE_SAMPLES,
    PASSIVE_THRESHOLD_DB,
    SURFACE_COARSE_KERNEL,
    SURFACE_COARSE_THRESHOLD,
    SURFACE_FINE_KERNEL,
    SURFACE_FINE_THRESHOLD,
)
from constants.messages import ErrorMessages
from core.exceptions import AlignmentError, DegenerateLineError, InterpolationError
from models.echogram import (
    BoundaryLine,
    Echogram,
    Orientation,
    RegionSet,
    SegmentationTargets,
    excluded_above,
    excluded_below,
)
from models.formats import LineFile, RecordingPaths, RegionClass, RegionFile, SvCsvRecording
from services.formats.evl import read_evl
from services.formats.sv_csv import read_sv_csv
from utils.robust import flag_outliers, rolling_median, sigma_from_idr, sigma_from_iqr
from utils.runs import find_runs, runs_to_flags

logger = logging.getLogger(__name__)


# ----------------------------------------------------------------------------
# Grids and orientation
# ----------------------------------------------------------------------------

def modal_resolution(recording: SvCsvRecording) -> float:
    """
    Most common depth step across pings (finest step on ties).

    Raises:
        InterpolationError: If any ping has a single sample
    """
    counts = recording.sample_counts
    single = np.flatnonzero(counts < 2)
    if single.size:
        raise InterpolationError(
            ErrorMessages.INTERPOLATION_IMPOSSIBLE.format(ping=int(single[0])),
            details={"ping": int(single[0])},
        )
    steps = (recording.range_stop - recording.range_start) / (counts - 1)
    values, occurrences = np.unique(np.round(steps, 9), return_counts=True)
    return float(values[np.flatnonzero(occurrences == occurrences.max())[0]])


def regrid_depth(
    recording: SvCsvRecording,
    orientation: Orientation = Orientation.DOWNFACING,
    resolution: Optional[float] = None,
) -> Echogram:
    """
    Interpolate every ping onto one uniform depth grid.

    The grid spans the union of the ping ranges at the modal resolution. Pings whose
    samples already coincide with the grid are copied unchanged; the others are
    linearly interpolated between present samples. Grid points outside a ping's
    range, or closer to missing than to present samples, are missing.

    Args:
        recording: Parsed Sv export
        orientation: Echosounder orientation of the recording
        resolution: Force a grid step instead of the modal one

    Returns:
        Echogram in native sample order (not yet orientation-standardised)

    Raises:
        InterpolationError: If any ping has a single sample
    """
    step = modal_resolution(recording) if resolution is None else float(resolution)
    lo = float(np.min(recording.range_start))
    hi = float(np.max(recording.range_stop))
    n_depths = int(round((hi - lo) / step)) + 1
    depths = np.linspace(lo, hi, n_depths)

    sv = np.full((recording.n_pings, n_depths), np.nan)
    presence = np.zeros((recording.n_pings, n_depths), dtype=bool)
    n_interpolated = 0
    for i in range(recording.n_pings):
        values = recording.samples[i]
        present = recording.presence[i]
        if len(values) == n_depths and recording.range_start[i] == lo and recording.range_stop[i] == hi:
            sv[i] = values
            presence[i] = present
            continue

        n_interpolated += 1
        ping_depths = recording.ping_depths(i)
        inside = (depths >= ping_depths[0]) & (depths <= ping_depths[-1])
        if not present.any():
            continue
        weight = np.interp(depths, ping_depths, present.astype(float))
        row_present = inside & (weight > 0.5)
        sv[i, row_present] = np.interp(
            depths[row_present], ping_depths[present], values[present]
        )
        presence[i] = row_present

    if n_interpolated:
        logger.debug(f"Interpolated {n_interpolated} of {recording.n_pings} pings onto a {step} m grid")

    return Echogram(
        timestamps=np.asarray(recording.timestamps, dtype=float),
        depths=depths,
        sv=sv,
        presence=presence,
        orientation=orientation,
    )


def reflect_depths(values: np.ndarray, depths: np.ndarray) -> np.ndarray:
    """Map depths through ``d -> min + max - d`` of the grid ``depths``."""
    return float(np.min(depths)) + float(np.max(depths)) - np.asarray(values, dtype=float)


def standardize_orientation(echogram: Echogram) -> Echogram:
    """
    Reorder an upfacing echogram so that depth increases along axis 1.

    The depth axis is reversed and relabelled through ``d -> min + max - d``, so
    the returned depths increase. Applying the operation twice restores the
    original sample order. Downfacing echograms are returned unchanged.
    """
    if echogram.orientation != Orientation.UPFACING:
        return echogram
    return echogram.model_copy(
        update={
            "depths": reflect_depths(echogram.depths[::-1], echogram.depths),
            "sv": echogram.sv[:, ::-1].copy(),
            "presence": echogram.presence[:, ::-1].copy(),
            "flipped": not echogram.flipped,
        }
    )


def recording_from_echogram(echogram: Echogram, first_ping_index: int = 0) -> SvCsvRecording:
    """
    Export an echogram as a recording in native sample order.

    Standardised upfacing echograms are flipped back first so that sample 0 is the
    sample nearest the transducer, as in a real export.
    """
    if echogram.flipped:
        echogram = standardize_orientation(echogram)
    start, stop = float(echogram.depths[0]), float(echogram.depths[-1])
    return SvCsvRecording(
        ping_index=np.arange(first_ping_index, first_ping_index + echogram.n_pings, dtype=np.int64),
        timestamps=np.asarray(echogram.timestamps, dtype=float),
        range_start=np.full(echogram.n_pings, start),
        range_stop=np.full(echogram.n_pings, stop),
        samples=[np.where(p, row, np.nan) for row, p in zip(echogram.sv, echogram.presence)],
        presence=[p.copy() for p in echogram.presence],
    )


# ----------------------------------------------------------------------------
# Lines
# ----------------------------------------------------------------------------

def line_to_pings(line: LineFile, timestamps: np.ndarray) -> np.ndarray:
    """Interpolate an EVL line onto ping timestamps (NaN if the line is empty)."""
    times, depths, _ = line.as_arrays()
    keep = np.isfinite(depths)
    if not keep.any():
        return np.full(len(timestamps), np.nan)
    return np.interp(timestamps, times[keep], depths[keep])


def remove_line_offset(
    line: np.ndarray, offset: float, kind: str, orientation: Orientation
) -> np.ndarray:
    """
    Undo an offset that was applied to a line before it was exported.

    Offsets push each boundary into the analysable water: entrained-air and surface
    lines deeper, seafloor lines shallower. Lines are in increasing-depth
    coordinates.
    """
    if offset == 0:
        return np.asarray(line, dtype=float)
    if kind == "seafloor":
        return np.asarray(line, dtype=float) + offset
    if kind == "surface" and orientation == Orientation.DOWNFACING:
        return np.asarray(line, dtype=float)
    return np.asarray(line, dtype=float) - offset


def line_on_grid(
    line: LineFile,
    echogram: Echogram,
    kind: str,
    line_offset: float = 0.0,
) -> np.ndarray:
    """
    An EVL line in native coordinates as increasing-depth values per ping.

    ``line_offset`` is removed from lines that were exported with it applied.
    """
    values = line_to_pings(line, echogram.timestamps)
    if echogram.orientation == Orientation.UPFACING:
        values = reflect_depths(values, echogram.depths)
    return remove_line_offset(values, line_offset, kind, echogram.orientation)


def regions_on_grid(regions: Optional[RegionFile], echogram: Echogram) -> RegionSet:
    """
    Rasterise EVR regions onto the pings and depth grid of a standardised echogram.

    Periods cover the pings whose timestamps fall within the region's time extent.
    Patches cover the pixels whose centres lie inside the region polygon.
    """
    shape = (echogram.n_pings, echogram.n_depths)
    patch_mask = np.zeros(shape, dtype=bool)
    passive = np.zeros(echogram.n_pings, dtype=bool)
    bad = np.zeros(echogram.n_pings, dtype=bool)
    if regions is None:
        return RegionSet(patch_mask=patch_mask, depths=echogram.depths)

    times = echogram.timestamps
    for region in regions.regions:
        inside = (times >= region.start_time.timestamp()) & (times <= region.end_time.timestamp())
        if region.classification == RegionClass.PASSIVE:
            passive |= inside
        elif region.classification == RegionClass.BAD_PERIOD:
            bad |= inside
        elif inside.any():
            vertices = np.array([(v.timestamp.timestamp(), v.depth) for v in region.vertices])
            if echogram.orientation == Orientation.UPFACING:
                vertices[:, 1] = reflect_depths(vertices[:, 1], echogram.depths)
            pings = np.flatnonzero(inside)
            grid_t, grid_d = np.meshgrid(times[pings], echogram.depths, indexing="ij")
            points = np.column_stack([grid_t.ravel(), grid_d.ravel()])
            hit = MplPath(vertices).contains_points(points).reshape(len(pings), echogram.n_depths)
            patch_mask[pings] |= hit

    return RegionSet(
        passive_periods=find_runs(passive),
        bad_periods=find_runs(bad),
        patch_mask=patch_mask,
        depths=echogram.depths,
    )


def clean_surface_line(
    line: BoundaryLine,
    air: Optional[np.ndarray] = None,
    orientation: Orientation = Orientation.UPFACING,
) -> BoundaryLine:
    """
    Remove anomalies from an annotated surface line.

    Pass 1 replaces points further than 5 sigma (iqr/1.35) from a 201-point running
    median with the median. Pass 2 repeatedly marks points further than 4 sigma
    (idr/2.56) from a 31-point running median of the remaining points as invalid,
    until none are flagged; invalid points are filled by interpolation. The result
    is clamped so that it is never deeper than ``air``. Downfacing recordings have
    the transducer at the surface, so their surface is 0 m everywhere.

    Args:
        line: Surface line in increasing-depth coordinates
        air: Entrained-air line to clamp against (optional)
        orientation: Echosounder orientation

    Returns:
        Cleaned line; ``valid`` is False at points removed by pass 2

    Raises:
        DegenerateLineError: If the line has no valid points, or every point is removed
    """
    n = len(line)
    if orientation == Orientation.DOWNFACING:
        return BoundaryLine(depths=np.zeros(n), valid=np.ones(n, dtype=bool))

    valid = line.valid & np.isfinite(line.depths)
    if not valid.any():
        raise DegenerateLineError(ErrorMessages.DEGENERATE_LINE)

    index = np.arange(n)
    values = np.interp(index, index[valid], line.depths[valid])

    median = rolling_median(values, SURFACE_COARSE_KERNEL)
    residuals = values - median
    replaced = flag_outliers(residuals, sigma_from_iqr(residuals), SURFACE_COARSE_THRESHOLD)
    values[replaced] = median[replaced]

    keep = valid.copy()
    while True:
        kept = np.flatnonzero(keep)
        residuals = values[kept] - rolling_median(values[kept], SURFACE_FINE_KERNEL)
        flagged = flag_outliers(residuals, sigma_from_idr(residuals), SURFACE_FINE_THRESHOLD)
        if not flagged.any():
            break
        keep[kept[flagged]] = False
        if not keep.any():
            raise DegenerateLineError(ErrorMessages.DEGENERATE_LINE)

    if not keep.all():
        values[~keep] = np.interp(index[~keep], index[keep], values[keep])
        logger.debug(f"Surface line: {int((~keep).sum())} anomalous points removed")

    if air is not None:
        values = np.minimum(values, air)

    return BoundaryLine(depths=values, valid=keep)


# ----------------------------------------------------------------------------
# Passive and bad data
# ----------------------------------------------------------------------------

def detect_passive_periods(
    echogram: Echogram,
    schedule: Optional[Iterable[tuple[int, int]]] = None,
) -> list[tuple[int, int]]:
    """
    Find passive (listen-only) periods from jumps in Sv near the transducer.

    For each pair of consecutive pings the Sv difference is taken over the 38
    samples nearest the transducer and its median computed. A median below -25 dB
    opens a passive period at the later ping; one above +25 dB closes it at the
    earlier ping.

    Args:
        echogram: Regridded echogram (native or standardised order)
        schedule: Known passive intervals; when given, detection is skipped

    Returns:
        Inclusive ``(first, last)`` ping intervals
    """
    if schedule is not None:
        last = echogram.n_pings - 1
        return sorted((max(int(a), 0), min(int(b), last)) for a, b in schedule if a <= last)
    if echogram.n_pings < 2:
        return []

    n_samples = PASSIVE_SAMPLES
    if echogram.n_depths < PASSIVE_SAMPLES:
        n_samples = echogram.n_depths
        logger.warning(
            f"Only {echogram.n_depths} depth samples; passive detection uses all of them"
        )
    columns = echogram.sv[:, :n_samples] if echogram.transducer_at_top else echogram.sv[:, -n_samples:]

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        medians = np.nanmedian(np.diff(columns, axis=0), axis=1)

    intervals = []
    start = None
    for i in np.flatnonzero(np.abs(np.nan_to_num(medians)) > PASSIVE_THRESHOLD_DB):
        if medians[i] < 0:
            if start is None:
                start = int(i) + 1
        elif start is not None:
            intervals.append((start, int(i)))
            start = None
        elif not intervals:
            # Recording began mid-way through a passive period
            intervals.append((0, int(i)))
    if start is not None:
        intervals.append((start, echogram.n_pings - 1))
    return intervals


def detect_bad_regions(
    targets: SegmentationTargets,
    echogram: Echogram,
) -> tuple[list[tuple[int, int]], np.ndarray]:
    """
    Derive bad-data periods and patches from the good-data mask.

    Bad periods are runs of fully masked pings outside passive periods, except
    runs where the entrained-air line lies at or below the seafloor line
    throughout. Patches are masked pixels not explained by the lines, passive
    periods or bad periods.

    Args:
        targets: Targets with mask, lines and passive flags filled in
        echogram: Host echogram (for the depth grid)

    Returns:
        Bad periods as inclusive ping intervals, and the patch mask
    """
    if not np.array_equal(targets.depths, echogram.depths):
        raise AlignmentError(ErrorMessages.GRID_MISMATCH)

    fully_masked = ~targets.mask.any(axis=1) & ~targets.passive
    closed = targets.air >= targets.seafloor
    periods = [
        (start, stop)
        for start, stop in find_runs(fully_masked)
        if not closed[start:stop + 1].all()
    ]
    bad = runs_to_flags(periods, targets.n_pings)
    explained = targets.excluded_by_lines(targets.air, targets.seafloor) | bad[:, None]
    patches = ~targets.mask & ~explained
    return periods, patches


# ----------------------------------------------------------------------------
# Targets
# ----------------------------------------------------------------------------

def build_targets(
    raw: Echogram,
    clean: Echogram,
    air: np.ndarray,
    seafloor: Optional[np.ndarray] = None,
    surface: Optional[np.ndarray] = None,
    passive_schedule: Optional[Iterable[tuple[int, int]]] = None,
) -> SegmentationTargets:
    """
    Build segmentation targets from a raw/clean echogram pair and annotated lines.

    The good-data mask is the presence mask of ``clean``. The entrained-air target
    is the deeper of the annotated line and the top of the mask; the aggressive
    seafloor is the shallower of the annotated line and the bottom of the mask.

    Args:
        raw: Standardised echogram of the raw export
        clean: Standardised echogram of the cleaned export (same grid and pings)
        air: Entrained-air line per ping (m)
        seafloor: Seafloor line per ping (downfacing only)
        surface: Surface line per ping (upfacing only)
        passive_schedule: Known passive intervals overriding detection

    Returns:
        Targets aligned with ``raw``

    Raises:
        AlignmentError: If the echograms do not share grid and ping count
    """
    if (
        raw.n_pings != clean.n_pings
        or raw.n_depths != clean.n_depths
        or not np.allclose(raw.depths, clean.depths)
    ):
        raise AlignmentError(
            ErrorMessages.GRID_MISMATCH,
            details={"raw": raw.sv.shape, "clean": clean.sv.shape},
        )

    depths = raw.depths
    n_pings = raw.n_pings
    mask = clean.presence.copy()
    has_data = mask.any(axis=1)
    top = depths[np.argmax(mask, axis=1)]
    bottom = depths[mask.shape[1] - 1 - np.argmax(mask[:, ::-1], axis=1)]

    air_original = np.asarray(air, dtype=float)
    air_target = np.where(has_data, np.maximum(air_original, top), air_original)

    if raw.orientation == Orientation.DOWNFACING:
        seafloor_original = (
            np.full(n_pings, depths[-1]) if seafloor is None else np.asarray(seafloor, dtype=float)
        )
        seafloor_target = np.where(
            has_data, np.minimum(seafloor_original, bottom), seafloor_original
        )
    else:
        seafloor_original = np.full(n_pings, depths[-1])
        seafloor_target = seafloor_original.copy()

    if raw.orientation == Orientation.DOWNFACING:
        surface_line = clean_surface_line(
            BoundaryLine.from_depths(np.zeros(n_pings)), orientation=raw.orientation
        )
    elif surface is None or not np.isfinite(surface).any():
        surface_line = BoundaryLine(depths=np.full(n_pings, depths[0]), valid=np.zeros(n_pings, dtype=bool))
    else:
        surface_line = clean_surface_line(
            BoundaryLine.from_depths(surface), air=air_target, orientation=raw.orientation
        )

    passive = runs_to_flags(detect_passive_periods(raw, passive_schedule), n_pings)
    empty = np.zeros((n_pings, len(depths)), dtype=bool)
    targets = SegmentationTargets(
        depths=depths,
        orientation=raw.orientation,
        air=air_target,
        air_original=air_original,
        seafloor=seafloor_target,
        seafloor_original=seafloor_original,
        surface=surface_line.depths,
        surface_valid=surface_line.valid,
        passive=passive,
        bad_period=np.zeros(n_pings, dtype=bool),
        patches=empty,
        patches_original=empty,
        patches_mixed=empty,
        mask=mask,
    )

    periods, patches = detect_bad_regions(targets, raw)
    bad = runs_to_flags(periods, n_pings)
    periodic = (passive | bad)[:, None]

    def unexplained(air_line: np.ndarray, seafloor_line: np.ndarray) -> np.ndarray:
        excluded = excluded_above(depths, air_line) | periodic
        if raw.orientation == Orientation.DOWNFACING:
            excluded |= excluded_below(depths, seafloor_line)
        return ~mask & ~excluded

    return targets.model_copy(
        update={
            "bad_period": bad,
            "patches": patches,
            "patches_original": unexplained(air_original, seafloor_original),
            "patches_mixed": unexplained(air_target, seafloor_original),
        }
    )


def load_recording(
    raw_csv: Union[str, Path],
    clean_csv: Optional[Union[str, Path]] = None,
    air_evl: Optional[Union[str, Path]] = None,
    seafloor_evl: Optional[Union[str, Path]] = None,
    surface_evl: Optional[Union[str, Path]] = None,
    orientation: Orientation = Orientation.DOWNFACING,
    passive_schedule: Optional[Iterable[tuple[int, int]]] = None,
    line_offset: float = 0.0,
) -> tuple[Echogram, SegmentationTargets]:
    """
    Read, regrid and standardise a recording and build its targets.

    Lines are read in native coordinates, interpolated onto the ping timestamps and
    mapped to increasing-depth coordinates. ``line_offset`` is removed from lines
    that were exported with an offset already applied.
    """
    raw = regrid_depth(read_sv_csv(raw_csv), orientation)
    if clean_csv is None:
        clean = raw
    else:
        clean = regrid_depth(read_sv_csv(clean_csv), orientation, resolution=raw.resolution)

    raw = standardize_orientation(raw)
    clean = standardize_orientation(clean)

    def load_line(path: Optional[Union[str, Path]], kind: str) -> Optional[np.ndarray]:
        if path is None:
            return None
        return line_on_grid(read_evl(path), raw, kind, line_offset)

    air = load_line(air_evl, "air")
    if air is None:
        air = np.full(raw.n_pings, raw.depths[0])
    targets = build_targets(
        raw,
        clean,
        air=air,
        seafloor=load_line(seafloor_evl, "seafloor"),
        surface=load_line(surface_evl, "surface"),
        passive_schedule=passive_schedule,
    )
    logger.info(
        f"Loaded {Path(raw_csv).name}: {raw.n_pings} pings x {raw.n_depths} depths, "
        f"{orientation.value}"
    )
    return raw, targets


def load_corpus_recording(
    paths: RecordingPaths,
    passive_schedule: Optional[Iterable[tuple[int, int]]] = None,
    line_offset: float = 0.0,
) -> tuple[Echogram, SegmentationTargets]:
    """:func:`load_recording` for a recording laid out as in a corpus directory."""

    def existing(path: str) -> Optional[str]:
        return path if Path(path).is_file() else None

    return load_recording(
        paths.raw_csv,
        clean_csv=existing(paths.clean_csv),
        air_evl=existing(paths.line("air")),
        seafloor_evl=existing(paths.line("seafloor")),
        surface_evl=existing(paths.line("surface")),
        orientation=paths.orientation,
        passive_schedule=passive_schedule,
        line_offset=line_offset,
    )
