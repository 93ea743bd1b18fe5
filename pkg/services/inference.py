"""
Inference Service
Turns network logits into boundary lines and regions

A recording is annotated in increasing-depth coordinates: the depth extent is
resampled to the network height, windows of pings are normalised exactly as in
training, and the resulting logits are converted into lines (cumulative
probability crossing 0.5), periods (log-avg-exp over depth) and patches. When the
first pass shows that much of the recording lies beyond the water column, the
recording is presented again zoomed in on it.
"""

import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Union

import numpy as np
import torch
from scipy import ndimage, special

from constants.defaults import MISSING_FILL_VALUE
from constants.messages import SuccessMessages
from core.exceptions import DomainError
from models.echogram import BoundaryLine, Echogram, Orientation, RegionSet
from models.formats import CheckpointManifest, LineFile, Region, RegionClass, RegionFile
from models.inference import AnnotationResult, DepthWindow, InferenceConfig, Provenance
from models.network import Plane
from nnet.unet import EchogramUNet, select_group
from services.augmentation import nearest_index, normalize_sv
from services.formats.checkpoint import load_checkpoint
from services.formats.evl import write_evl
from services.formats.evr import write_evr
from services.formats.sv_csv import read_sv_csv
from services.preprocessing import reflect_depths, regrid_depth, standardize_orientation
from utils.robust import sigma_from_idr
from utils.runs import find_runs

logger = logging.getLogger(__name__)

LINE_PLANES = {"air": Plane.AIR, "surface": Plane.SURFACE, "seafloor": Plane.SEAFLOOR}
INFERENCE_BATCH = 8


# ----------------------------------------------------------------------------
# Model loading and forward passes
# ----------------------------------------------------------------------------

def load_model(path: Union[str, Path]) -> tuple[EchogramUNet, CheckpointManifest]:
    """Build a network from a checkpoint directory, in inference mode."""
    manifest, state_dict = load_checkpoint(path)
    model = EchogramUNet(manifest.network)
    model.load_state_dict(state_dict)
    model.eval()
    logger.info(f"Loaded model {manifest.model_id} from {path}")
    return model, manifest


def _window_columns(depths: np.ndarray, window: DepthWindow) -> np.ndarray:
    columns = np.flatnonzero((depths >= window.lo) & (depths <= window.hi))
    if columns.size == 0:
        columns = np.array([int(np.argmin(np.abs(depths - window.lo)))])
    return columns


def _prepare_window(sv: np.ndarray, presence: np.ndarray, height: int) -> np.ndarray:
    """Normalise one ping window and resample its depth axis to ``height``."""
    cols = nearest_index(sv.shape[1], height)
    if presence.any():
        image = normalize_sv(sv, presence)
    else:
        image = np.full(sv.shape, MISSING_FILL_VALUE)
    return image[:, cols]


def predict_logits(
    model: EchogramUNet,
    echogram: Echogram,
    window: DepthWindow,
    config: InferenceConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Run the network over a standardised echogram restricted to a depth window.

    Returns:
        Logits shaped (n_planes, n_pings, height) and the depth of each output bin
    """
    width = config.window_pings
    height = model.config.input_height
    columns = _window_columns(echogram.depths, window)
    out_depths = echogram.depths[columns][nearest_index(columns.size, height)]

    images = []
    for start in range(0, echogram.n_pings, width):
        # the final window is padded by repeating its last ping
        rows = np.minimum(np.arange(start, start + width), echogram.n_pings - 1)
        sv = echogram.sv[np.ix_(rows, columns)]
        presence = echogram.presence[np.ix_(rows, columns)]
        images.append(_prepare_window(sv, presence, height))
    inputs = torch.from_numpy(np.stack(images).astype(np.float32))[:, None]

    outputs = []
    model.eval()
    with torch.no_grad():
        for batch in torch.split(inputs, INFERENCE_BATCH):
            logits = model(batch)
            planes = select_group(logits, model.config, echogram.orientation, config.conditioned)
            outputs.append(planes.double().cpu().numpy())

    # (windows, planes, width, height) -> (planes, pings, height)
    stacked = np.concatenate(outputs)
    logits = np.concatenate(list(stacked), axis=1)[:, :echogram.n_pings]
    return logits, out_depths


# ----------------------------------------------------------------------------
# Lines
# ----------------------------------------------------------------------------

def line_bins(plane: np.ndarray) -> np.ndarray:
    """First depth bin at which the cumulative softmax exceeds 0.5, per ping."""
    probabilities = special.softmax(np.asarray(plane, dtype=float), axis=1)
    cumulative = np.cumsum(probabilities, axis=1)
    return np.argmax(cumulative > 0.5, axis=1)


def extract_line(plane: np.ndarray, depths: np.ndarray) -> BoundaryLine:
    """
    Convert a line plane (pings x depth bins) into a boundary line.

    Args:
        plane: Logits of one line plane
        depths: Depth (m) of each bin

    Returns:
        Line at the depth of the bin where the cumulative probability first exceeds 0.5
    """
    return BoundaryLine.from_depths(np.asarray(depths, dtype=float)[line_bins(plane)])


def compute_zoom_window(
    line: BoundaryLine,
    orientation: Orientation,
    depths: np.ndarray,
    config: Optional[InferenceConfig] = None,
) -> DepthWindow:
    """
    Depth window that keeps the water column.

    The limit is the mean of the line plus (downfacing) or minus (upfacing)
    ``zoom_spread`` robust standard deviations, or the furthest point of the line,
    whichever is nearer the transducer. The window runs from the transducer end of
    the recording to the limit, plus ``zoom_margin``.

    Args:
        line: First-pass seafloor (downfacing) or surface (upfacing) line
        orientation: Echosounder orientation
        depths: Depth grid of the recording (increasing)
        config: Margin and spread settings

    Returns:
        The zoom window; the full extent if the line has no valid point
    """
    config = config or InferenceConfig()
    full = DepthWindow(lo=float(depths[0]), hi=float(depths[-1]))
    values = line.depths[line.valid & np.isfinite(line.depths)]
    if values.size == 0:
        logger.warning("Zoom line has no valid point; using the full depth extent")
        return full

    mean = float(np.mean(values))
    sigma = sigma_from_idr(values)
    if orientation == Orientation.UPFACING:
        limit = max(mean - config.zoom_spread * sigma, float(values.min()))
        lo = min(max(limit - config.zoom_margin, full.lo), full.hi)
        return DepthWindow(lo=lo, hi=full.hi)

    limit = min(mean + config.zoom_spread * sigma, float(values.max()))
    hi = max(min(limit + config.zoom_margin, full.hi), full.lo)
    return DepthWindow(lo=full.lo, hi=hi)


def cropped_fraction(window: DepthWindow, depths: np.ndarray) -> float:
    """Share of the recording's depth extent outside ``window``."""
    span = float(depths[-1] - depths[0])
    if span <= 0:
        return 0.0
    return 1.0 - window.span / span


def smooth_logits(planes: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian-smooth every plane of a (planes, pings, depths) array; sigma 0 is a no-op."""
    if sigma < 0:
        raise DomainError(f"Smoothing sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return planes
    return np.stack(
        [ndimage.gaussian_filter(plane, sigma=sigma, mode="nearest") for plane in planes]
    )


def apply_offsets(
    lines: dict[str, BoundaryLine],
    offset: float,
    orientation: Orientation,
    depths: Optional[np.ndarray] = None,
) -> dict[str, BoundaryLine]:
    """
    Shift lines into the analysable water by ``offset`` metres.

    The entrained-air line moves deeper and the seafloor line shallower. The
    surface line moves deeper for upfacing recordings and is left alone for
    downfacing ones. Lines are clamped to ``depths`` when given.

    Raises:
        DomainError: If ``offset`` is negative
    """
    if offset < 0:
        raise DomainError(f"Line offset must be non-negative, got {offset}")

    signs = {"air": 1.0, "seafloor": -1.0, "surface": 1.0 if orientation == Orientation.UPFACING else 0.0}
    shifted = {}
    for kind, line in lines.items():
        values = line.depths + signs.get(kind, 0.0) * offset
        if depths is not None:
            lo, hi = float(depths[0]), float(depths[-1])
            outside = (values < lo) | (values > hi)
            if outside.any():
                logger.warning(
                    f"Offset pushed {int(outside.sum())} points of the {kind} line outside the "
                    f"recording; clamped"
                )
                values = np.clip(values, lo, hi)
        shifted[kind] = BoundaryLine(depths=values, valid=line.valid.copy())
    return shifted


def nearfield_line(depths: np.ndarray, orientation: Orientation, n_pings: int, distance: float) -> BoundaryLine:
    """
    Constant-range line bounding the transducer nearfield, in increasing-depth coordinates.

    The transducer sits at the shallowest depth of a downfacing recording and at the
    deepest depth of a standardised upfacing one. The line is clamped to ``depths``.
    """
    if orientation == Orientation.UPFACING:
        value = max(float(depths[-1]) - distance, float(depths[0]))
    else:
        value = min(float(depths[0]) + distance, float(depths[-1]))
    return BoundaryLine(depths=np.full(n_pings, value), valid=np.ones(n_pings, dtype=bool))


# ----------------------------------------------------------------------------
# Regions
# ----------------------------------------------------------------------------

def merge_periods(periods: list[tuple[int, int]], gap: int) -> list[tuple[int, int]]:
    """Merge inclusive intervals separated by fewer than ``gap`` pings."""
    merged: list[tuple[int, int]] = []
    for start, stop in sorted(periods):
        if merged and start - merged[-1][1] < gap:
            merged[-1] = (merged[-1][0], max(merged[-1][1], stop))
        else:
            merged.append((start, stop))
    return merged


def drop_short_periods(periods: list[tuple[int, int]], min_length: int) -> list[tuple[int, int]]:
    return [(start, stop) for start, stop in periods if stop - start + 1 >= min_length]


def drop_small_patches(mask: np.ndarray, min_area: float, depth_resolution: float) -> np.ndarray:
    """Remove connected patches smaller than ``min_area`` ping-metres."""
    labels, n_patches = ndimage.label(mask)
    if n_patches == 0:
        return mask.copy()
    areas = np.bincount(labels.ravel())[1:] * depth_resolution
    keep = np.concatenate(([False], areas >= min_area))
    return keep[labels]


def postprocess_regions(regions: RegionSet, config: Optional[InferenceConfig] = None) -> RegionSet:
    """
    Merge, filter and optionally drop predicted regions.

    Same-class periods separated by fewer than ``merge_gap`` pings are merged, and
    periods shorter than ``min_region_length`` pings are dropped. Patches with an
    area below ``min_patch_area`` ping-metres are dropped. With ``drop_bad_data``
    every bad period and patch is removed; passive periods are kept.
    """
    config = config or InferenceConfig()

    def clean(periods: list[tuple[int, int]]) -> list[tuple[int, int]]:
        return drop_short_periods(merge_periods(periods, config.merge_gap), config.min_region_length)

    if config.drop_bad_data:
        bad_periods, patches = [], np.zeros_like(regions.patch_mask, dtype=bool)
    else:
        bad_periods = clean(regions.bad_periods)
        patches = drop_small_patches(regions.patch_mask, config.min_patch_area, regions.depth_resolution)

    return RegionSet(
        passive_periods=clean(regions.passive_periods),
        bad_periods=bad_periods,
        patch_mask=patches,
        depths=regions.depths,
    )


def _period_flags(plane: np.ndarray) -> np.ndarray:
    """Per-ping flag from a period plane: log-avg-exp over depth is positive."""
    collapsed = special.logsumexp(plane, axis=1) - np.log(plane.shape[1])
    return collapsed > 0


def _patches_on_grid(
    plane: np.ndarray, out_depths: np.ndarray, depths: np.ndarray, window: DepthWindow
) -> np.ndarray:
    """Map a patch plane from the network grid onto the recording grid."""
    mask = np.zeros((plane.shape[0], len(depths)), dtype=bool)
    inside = np.flatnonzero((depths >= window.lo) & (depths <= window.hi))
    if inside.size:
        bins = np.clip(np.searchsorted(out_depths, depths[inside]), 0, len(out_depths) - 1)
        mask[:, inside] = plane[:, bins] > 0
    return mask


# ----------------------------------------------------------------------------
# Annotation
# ----------------------------------------------------------------------------

def infer_recording(
    echogram: Echogram,
    model: EchogramUNet,
    config: Optional[InferenceConfig] = None,
    model_id: str = "model",
) -> AnnotationResult:
    """
    Annotate one recording.

    Args:
        echogram: Regridded echogram (standardised here if needed)
        model: Trained network
        config: Zoom, post-processing and offset settings
        model_id: Identifier recorded in the provenance

    Returns:
        Lines with and without offsets, post-processed regions and provenance

    Raises:
        DomainError: If the recording has no pings
    """
    if echogram.n_pings < 1:
        raise DomainError("Cannot annotate a recording with no pings")
    config = config or InferenceConfig()
    if echogram.orientation == Orientation.UPFACING and not echogram.flipped:
        echogram = standardize_orientation(echogram)
    depths = echogram.depths
    downfacing = echogram.orientation == Orientation.DOWNFACING

    def run(window: DepthWindow) -> tuple[np.ndarray, np.ndarray]:
        logits, out_depths = predict_logits(model, echogram, window, config)
        return smooth_logits(logits, config.smoothing_sigma), out_depths

    window = DepthWindow(lo=float(depths[0]), hi=float(depths[-1]))
    logits, out_depths = run(window)
    passes, zoom = 1, None

    zoom_line = extract_line(logits[Plane.SEAFLOOR if downfacing else Plane.SURFACE], out_depths)
    candidate = compute_zoom_window(zoom_line, echogram.orientation, depths, config)
    fraction = cropped_fraction(candidate, depths)
    if config.autozoom_threshold <= 0 or fraction > config.autozoom_threshold:
        logger.info(f"Cropping {fraction:.0%} of the depth extent; repeating zoomed in")
        window = candidate
        logits, out_depths = run(window)
        passes, zoom = 2, window

    lines = {kind: extract_line(logits[plane], out_depths) for kind, plane in LINE_PLANES.items()}
    if not downfacing:
        lines["seafloor"] = BoundaryLine(
            depths=np.full(echogram.n_pings, depths[-1]), valid=np.zeros(echogram.n_pings, dtype=bool)
        )

    nearfield = nearfield_line(depths, echogram.orientation, echogram.n_pings, config.nearfield)
    bottom = lines["seafloor"].depths if downfacing else nearfield.depths
    closed = lines["air"].depths >= bottom
    bad = _period_flags(logits[Plane.BAD_PERIOD]) | closed
    regions = RegionSet(
        passive_periods=find_runs(_period_flags(logits[Plane.PASSIVE])),
        bad_periods=find_runs(bad),
        patch_mask=_patches_on_grid(logits[Plane.PATCH], out_depths, depths, window),
        depths=depths,
    )
    regions = postprocess_regions(regions, config)
    offset = apply_offsets(lines, config.line_offset, echogram.orientation, depths)

    return AnnotationResult(
        timestamps=echogram.timestamps,
        orientation=echogram.orientation,
        air=lines["air"],
        surface=lines["surface"],
        seafloor=lines["seafloor"],
        air_offset=offset["air"],
        surface_offset=offset["surface"],
        seafloor_offset=offset["seafloor"],
        nearfield=nearfield,
        regions=regions,
        provenance=Provenance(model_id=model_id, config=config, passes=passes, zoom_window=zoom),
    )


# ----------------------------------------------------------------------------
# Export
# ----------------------------------------------------------------------------

def to_native_depths(values: np.ndarray, depths: np.ndarray, orientation: Orientation) -> np.ndarray:
    """Map increasing-depth coordinates back to the recording's own coordinates."""
    if orientation == Orientation.UPFACING:
        return reflect_depths(values, depths)
    return np.asarray(values, dtype=float)


def exported_line_kinds(orientation: Orientation) -> tuple[str, ...]:
    if orientation == Orientation.UPFACING:
        return ("air", "surface")
    return ("air", "seafloor")


def line_file(
    timestamps: np.ndarray,
    line: BoundaryLine,
    depths: np.ndarray,
    orientation: Orientation,
) -> LineFile:
    """EVL line in native coordinates; invalid points get the ``bad`` status."""
    status = np.where(line.valid, 3, 2)
    return LineFile.from_arrays(timestamps, to_native_depths(line.depths, depths, orientation), status)


def _period_times(timestamps: np.ndarray, start: int, stop: int) -> tuple[datetime, datetime]:
    """Times spanning pings ``start..stop`` including half a ping interval either side."""
    step = float(np.median(np.diff(timestamps))) if len(timestamps) > 1 else 1.0
    begin = float(timestamps[start]) - step / 2
    end = float(timestamps[stop]) + step / 2
    return datetime.fromtimestamp(begin, timezone.utc), datetime.fromtimestamp(end, timezone.utc)


def region_file(
    timestamps: np.ndarray,
    regions: RegionSet,
    orientation: Orientation,
    name: str = "",
) -> RegionFile:
    """
    EVR regions for passive periods, bad periods and patches.

    Periods cover the full depth extent; each connected patch becomes its bounding
    rectangle.
    """
    depths = regions.depths
    native = to_native_depths(np.array([depths[0], depths[-1]]), depths, orientation)
    top, bottom = float(native.min()), float(native.max())
    half_bin = regions.depth_resolution / 2

    items: list[Region] = []

    def add(classification: RegionClass, start: int, stop: int, lo: float, hi: float) -> None:
        begin, end = _period_times(timestamps, start, stop)
        label = f"{name} {classification.value}".strip()
        items.append(Region.rectangle(len(items) + 1, classification, begin, end, lo, hi, label))

    for start, stop in regions.passive_periods:
        add(RegionClass.PASSIVE, start, stop, top, bottom)
    for start, stop in regions.bad_periods:
        add(RegionClass.BAD_PERIOD, start, stop, top, bottom)

    labels, _ = ndimage.label(regions.patch_mask)
    for pings, columns in ndimage.find_objects(labels):
        edges = np.array([depths[columns.start] - half_bin, depths[columns.stop - 1] + half_bin])
        edges = to_native_depths(edges, depths, orientation)
        add(RegionClass.BAD_PATCH, pings.start, pings.stop - 1, float(edges.min()), float(edges.max()))

    return RegionFile(regions=items)


def write_annotation(
    result: AnnotationResult,
    depths: np.ndarray,
    output_dir: Union[str, Path],
    stem: str,
) -> list[Path]:
    """
    Write lines (with offsets) and regions of an annotation.

    Files are ``<stem>.<kind>.<model>.evl``, ``<stem>.nearfield.<model>.evl`` and
    ``<stem>.<model>.evr``.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    tag = Path(result.provenance.model_id).name
    written = []
    for kind in exported_line_kinds(result.orientation):
        path = output_dir / f"{stem}.{kind}.{tag}.evl"
        write_evl(
            line_file(result.timestamps, getattr(result, f"{kind}_offset"), depths, result.orientation),
            path,
        )
        written.append(path)

    path = output_dir / f"{stem}.nearfield.{tag}.evl"
    write_evl(line_file(result.timestamps, result.nearfield, depths, result.orientation), path)
    written.append(path)

    path = output_dir / f"{stem}.{tag}.evr"
    write_evr(region_file(result.timestamps, result.regions, result.orientation, tag), path)
    written.append(path)
    return written


def annotate_csv(
    path: Union[str, Path],
    model: EchogramUNet,
    output_dir: Union[str, Path],
    orientation: Orientation = Orientation.DOWNFACING,
    config: Optional[InferenceConfig] = None,
    model_id: str = "model",
) -> AnnotationResult:
    """Read an Sv CSV export, annotate it and write EVL/EVR files next to ``output_dir``."""
    path = Path(path)
    echogram = standardize_orientation(regrid_depth(read_sv_csv(path), orientation))
    result = infer_recording(echogram, model, config, model_id)
    write_annotation(result, echogram.depths, output_dir, path.stem)
    logger.info(SuccessMessages.ANNOTATION_WRITTEN.format(path=path))
    return result

