"""
Augmentation Service
Normalises echogram windows and applies training-time augmentations

A window travels through the pipeline as a :class:`View` in depth coordinates
(lines in metres, one depth label per column). Augmentations are applied in the
order reflect, stretch, crop, normalise, jitter, elastic, and the result is
resampled by :func:`finalize_view` into a fixed-size :class:`TrainingView`.
Every random draw is kept in an :class:`AugmentationRecord`, so a view can be
rebuilt exactly from its record.
"""

import logging
from typing import Optional

import numpy as np
from scipy import ndimage

from constants.defaults import (
    BRIGHTNESS_RANGE,
    CONTRAST_RANGE,
    CROP_BRANCH_PROBABILITIES,
    CROP_MAX_AIR_REMOVED,
    CROP_MAX_SEAFLOOR_REMOVED,
    CROP_NEAR_OPTIMAL_SPREAD,
    ELASTIC_ALPHA,
    ELASTIC_PROBABILITY,
    ELASTIC_SIGMA_DEPTH,
    ELASTIC_SIGMA_TIME,
    INPUT_HEIGHT,
    INPUT_WIDTH,
    MISSING_FILL_VALUE,
    REFLECT_PROBABILITY,
    STRETCH_RANGE,
)
from core.exceptions import DomainError
from models.echogram import (
    LINE_FIELDS,
    PING_FLAG_FIELDS,
    PIXEL_FIELDS,
    Orientation,
)
from models.formats import Shard
from models.inference import DepthWindow
from models.training import AugmentationRecord, CropBranch, JitterOrder, TrainingView, View
from utils.robust import sigma_from_idr

logger = logging.getLogger(__name__)

NEAR_OPTIMAL_ATTEMPTS = 10


# ----------------------------------------------------------------------------
# Views
# ----------------------------------------------------------------------------

def view_from_shard(shard: Shard) -> View:
    """Wrap a shard as a view of raw Sv."""
    return View(
        image=shard.sv.astype(float),
        presence=shard.presence.copy(),
        depths=shard.depths.copy(),
        targets=shard.targets,
    )


def _take_pings(view: View, index: np.ndarray) -> View:
    """Resample the ping axis: output ping ``i`` is input ping ``index[i]``."""
    update = {}
    for name in LINE_FIELDS + PING_FLAG_FIELDS + PIXEL_FIELDS:
        update[name] = getattr(view.targets, name)[index]
    return View(
        image=view.image[index],
        presence=view.presence[index],
        depths=view.depths,
        targets=view.targets.model_copy(update=update),
    )


def _take_depths(view: View, columns: np.ndarray) -> View:
    """Keep the given depth columns; lines stay in metres."""
    update = {"depths": view.depths[columns]}
    for name in PIXEL_FIELDS:
        update[name] = getattr(view.targets, name)[:, columns]
    return View(
        image=view.image[:, columns],
        presence=view.presence[:, columns],
        depths=view.depths[columns],
        targets=view.targets.model_copy(update=update),
    )


def nearest_index(n_in: int, n_out: int) -> np.ndarray:
    """Nearest-neighbour index map from ``n_out`` output cells onto ``n_in`` input cells."""
    index = np.floor((np.arange(n_out) + 0.5) * n_in / n_out).astype(int)
    return np.clip(index, 0, n_in - 1)


# ----------------------------------------------------------------------------
# Normalisation
# ----------------------------------------------------------------------------

def normalize_sv(image: np.ndarray, presence: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Centre Sv on its median and scale by a robust standard deviation.

    The divisor is idr/2.56 of the present values, falling back to 1 when that is
    zero. Missing values are set to -3 after normalisation.

    Raises:
        DomainError: If no value is present
    """
    image = np.asarray(image, dtype=float)
    present = np.isfinite(image)
    if presence is not None:
        present &= presence
    if not present.any():
        raise DomainError("Cannot normalise an image with no present values")

    values = image[present]
    sigma = sigma_from_idr(values)
    if not np.isfinite(sigma) or sigma == 0:
        sigma = 1.0
    normalized = (image - np.median(values)) / sigma
    normalized[~present] = MISSING_FILL_VALUE
    return normalized


# ----------------------------------------------------------------------------
# Geometric augmentations
# ----------------------------------------------------------------------------

def reflect_time(view: View) -> View:
    """Reverse the ping axis of image and targets."""
    return _take_pings(view, np.arange(view.targets.n_pings)[::-1])


def draw_stretch(rng: np.random.Generator) -> float:
    """Stretch factor drawn log-uniformly from [0.5, 2]."""
    lo, hi = STRETCH_RANGE
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def stretch_time(view: View, factor: float) -> View:
    """
    Resample the ping axis to ``round(n_pings * factor)`` pings (nearest neighbour).

    Raises:
        DomainError: If ``factor`` is not positive
    """
    if not factor > 0:
        raise DomainError(f"Stretch factor must be positive, got {factor}")
    n_in = view.targets.n_pings
    n_out = max(1, int(round(n_in * factor)))
    return _take_pings(view, nearest_index(n_in, n_out))


def optimal_window(view: View) -> DepthWindow:
    """From the shallowest surface depth to the deepest seafloor depth, within the view."""
    targets = view.targets
    lo_full, hi_full = float(view.depths[0]), float(view.depths[-1])
    if targets.orientation == Orientation.UPFACING:
        surface = targets.surface[targets.surface_valid] if targets.surface_valid.any() else targets.surface
        lo = float(np.nanmin(surface)) if surface.size else lo_full
        hi = hi_full
    else:
        lo = 0.0
        hi = float(np.nanmax(targets.seafloor))
    lo = min(max(lo, lo_full), hi_full)
    hi = max(min(hi, hi_full), lo)
    return DepthWindow(lo=lo, hi=hi)


def choose_crop_branch(rng: np.random.Generator) -> CropBranch:
    """Crop strategy with probabilities 0.1 full, 0.1 optimal, 0.4 near-optimal, 0.4 uniform."""
    return CropBranch(int(rng.choice(len(CROP_BRANCH_PROBABILITIES), p=CROP_BRANCH_PROBABILITIES)))


def _removed_fraction(line: np.ndarray, window: DepthWindow, full: DepthWindow) -> float:
    """Share of pings whose line lies inside the full extent but outside ``window``."""
    inside_full = (line >= full.lo) & (line <= full.hi)
    if not inside_full.any():
        return 0.0
    outside = (line < window.lo) | (line > window.hi)
    return float((outside & inside_full).sum() / inside_full.sum())


def _snap_to_bin(window: DepthWindow, depths: np.ndarray) -> DepthWindow:
    """Widen a window that contains no depth bin to the bin nearest its centre."""
    if ((depths >= window.lo) & (depths <= window.hi)).any():
        return window
    centre = depths[np.argmin(np.abs(depths - (window.lo + window.hi) / 2))]
    return DepthWindow(lo=float(centre), hi=float(centre))


def depth_crop_window(
    view: View,
    rng: np.random.Generator,
    branch: Optional[CropBranch] = None,
) -> DepthWindow:
    """
    Draw the depth window kept by the crop augmentation.

    Args:
        view: View to crop
        rng: Random generator
        branch: Force a crop strategy instead of drawing one

    Returns:
        Window containing at least one depth bin of ``view``
    """
    if branch is None:
        branch = choose_crop_branch(rng)
    full = DepthWindow(lo=float(view.depths[0]), hi=float(view.depths[-1]))
    optimal = optimal_window(view)

    if branch == CropBranch.FULL:
        window = full
    elif branch == CropBranch.OPTIMAL:
        window = optimal
    elif branch == CropBranch.NEAR_OPTIMAL:
        window = optimal
        span = optimal.span or full.span
        for _ in range(NEAR_OPTIMAL_ATTEMPTS):
            lo = optimal.lo + rng.uniform(-CROP_NEAR_OPTIMAL_SPREAD, CROP_NEAR_OPTIMAL_SPREAD) * span
            hi = optimal.hi + rng.uniform(-CROP_NEAR_OPTIMAL_SPREAD, CROP_NEAR_OPTIMAL_SPREAD) * span
            lo, hi = max(lo, full.lo), min(hi, full.hi)
            if hi < lo:
                continue
            candidate = DepthWindow(lo=lo, hi=hi)
            air_removed = _removed_fraction(view.targets.air, candidate, full)
            seafloor_removed = 0.0
            if view.orientation == Orientation.DOWNFACING:
                seafloor_removed = _removed_fraction(view.targets.seafloor, candidate, full)
            if air_removed <= CROP_MAX_AIR_REMOVED and seafloor_removed <= CROP_MAX_SEAFLOOR_REMOVED:
                window = candidate
                break
    else:
        lo = rng.uniform(full.lo, optimal.lo) if optimal.lo > full.lo else full.lo
        hi = rng.uniform(optimal.hi, full.hi) if full.hi > optimal.hi else full.hi
        window = DepthWindow(lo=lo, hi=hi)

    return _snap_to_bin(window, view.depths)


def crop_depth(view: View, window: DepthWindow) -> View:
    """Keep the depth columns inside ``window``."""
    columns = np.flatnonzero((view.depths >= window.lo) & (view.depths <= window.hi))
    if columns.size == 0:
        columns = np.array([int(np.argmin(np.abs(view.depths - window.lo)))])
    return _take_depths(view, columns)


# ----------------------------------------------------------------------------
# Photometric augmentations
# ----------------------------------------------------------------------------

def color_jitter(view: View, offset: float, gain: float, order: JitterOrder) -> View:
    """
    Apply one brightness offset and one contrast gain to every pixel.

    ``brightness_first`` computes ``(x + offset) * gain``; ``contrast_first``
    computes ``x * gain + offset``.
    """
    if JitterOrder(order) == JitterOrder.BRIGHTNESS_FIRST:
        image = (view.image + offset) * gain
    else:
        image = view.image * gain + offset
    return view.model_copy(update={"image": image})


# ----------------------------------------------------------------------------
# Elastic deformation
# ----------------------------------------------------------------------------

def displacement_field(
    length: int, sigma: float, alpha: float, rng: np.random.Generator
) -> np.ndarray:
    """Unit-normal noise, Gaussian-smoothed and scaled by ``alpha * length``."""
    noise = rng.standard_normal(length)
    return ndimage.gaussian_filter1d(noise, sigma, mode="nearest") * alpha * length


def apply_displacement(
    view: View,
    time_shift: np.ndarray,
    depth_shift: np.ndarray,
    order: int = 1,
) -> View:
    """
    Sample the view at displaced coordinates.

    Output ping ``i`` is read from input ping ``i + time_shift[i]`` and output
    column ``j`` from input column ``j + depth_shift[j]``, so whole ping columns move
    together. Depth coordinates are made non-decreasing and the column labels are
    moved with them, keeping lines (in metres) aligned with the image.
    """
    n_pings, n_depths = view.image.shape
    time_coords = np.clip(np.arange(n_pings) + time_shift, 0, n_pings - 1)
    depth_coords = np.clip(np.arange(n_depths) + depth_shift, 0, n_depths - 1)
    depth_coords = np.maximum.accumulate(depth_coords)

    grid_t, grid_d = np.meshgrid(time_coords, depth_coords, indexing="ij")
    image = ndimage.map_coordinates(view.image, [grid_t, grid_d], order=order, mode="nearest")

    nearest_t = np.rint(time_coords).astype(int)
    nearest_d = np.rint(depth_coords).astype(int)
    ping_index = np.arange(n_pings)
    update = {"depths": np.interp(depth_coords, np.arange(n_depths), view.depths)}
    for name in LINE_FIELDS:
        update[name] = np.interp(time_coords, ping_index, getattr(view.targets, name))
    for name in PING_FLAG_FIELDS:
        update[name] = getattr(view.targets, name)[nearest_t]
    for name in PIXEL_FIELDS:
        update[name] = getattr(view.targets, name)[np.ix_(nearest_t, nearest_d)]

    return View(
        image=image,
        presence=view.presence[np.ix_(nearest_t, nearest_d)],
        depths=update["depths"],
        targets=view.targets.model_copy(update=update),
    )


def elastic_deform(
    view: View,
    sigma_time: float = ELASTIC_SIGMA_TIME,
    sigma_depth: float = ELASTIC_SIGMA_DEPTH,
    alpha: float = ELASTIC_ALPHA,
    order: int = 1,
    seed: int = 0,
) -> View:
    """
    Axis-separable elastic deformation.

    One 1-D displacement field per axis is drawn from ``seed``; see
    :func:`displacement_field` and :func:`apply_displacement`.
    """
    if order not in (1, 2, 3):
        raise DomainError(f"Interpolation order must be 1, 2 or 3, got {order}")
    rng = np.random.default_rng(seed)
    n_pings, n_depths = view.image.shape
    time_shift = displacement_field(n_pings, sigma_time, alpha, rng)
    depth_shift = displacement_field(n_depths, sigma_depth, alpha, rng)
    return apply_displacement(view, time_shift, depth_shift, order)


# ----------------------------------------------------------------------------
# Finalisation
# ----------------------------------------------------------------------------

def line_to_bins(line: np.ndarray, depths: np.ndarray) -> np.ndarray:
    """Index of the first bin at or below each line depth, clipped to the bins."""
    bins = np.searchsorted(depths, np.nan_to_num(line, nan=depths[0]), side="left")
    return np.clip(bins, 0, len(depths) - 1).astype(np.int64)


def finalize_view(
    view: View,
    record: Optional[AugmentationRecord] = None,
    width: int = INPUT_WIDTH,
    height: int = INPUT_HEIGHT,
) -> TrainingView:
    """
    Rescale a view to ``(width, height)`` with nearest-neighbour sampling.

    Lines become depth-bin indices of the rescaled view.

    Raises:
        DomainError: If the view has no pings or no depths
    """
    n_pings, n_depths = view.image.shape
    if n_pings == 0 or n_depths == 0:
        raise DomainError("Cannot finalise an empty view")

    rows = nearest_index(n_pings, width)
    cols = nearest_index(n_depths, height)
    targets = view.targets
    depths = view.depths[cols]

    lines = {name: line_to_bins(getattr(targets, name)[rows], depths) for name in LINE_FIELDS}
    flags = {name: getattr(targets, name)[rows].astype(bool) for name in PING_FLAG_FIELDS}
    pixels = {
        name: getattr(targets, name)[np.ix_(rows, cols)].astype(bool)
        for name in ("patches", "patches_original", "patches_mixed")
    }
    return TrainingView(
        image=view.image[np.ix_(rows, cols)],
        depths=depths,
        orientation=targets.orientation,
        record=record or AugmentationRecord(),
        **lines,
        **flags,
        **pixels,
    )


# ----------------------------------------------------------------------------
# Records
# ----------------------------------------------------------------------------

def draw_augmentations(view: View, rng: np.random.Generator) -> AugmentationRecord:
    """Draw every random parameter needed to augment ``view``."""
    reflect = bool(rng.random() < REFLECT_PROBABILITY)
    stretch = draw_stretch(rng)
    branch = choose_crop_branch(rng)
    window = depth_crop_window(view, rng, branch)
    offset = float(rng.uniform(*BRIGHTNESS_RANGE))
    gain = float(rng.uniform(*CONTRAST_RANGE))
    jitter_order = JitterOrder.BRIGHTNESS_FIRST if rng.random() < 0.5 else JitterOrder.CONTRAST_FIRST
    elastic = bool(rng.random() < ELASTIC_PROBABILITY)
    elastic_order = int(rng.integers(1, 4))
    elastic_seed = int(rng.integers(0, 2**31 - 1))
    return AugmentationRecord(
        reflect=reflect,
        stretch=stretch,
        crop_branch=branch,
        crop_window=(window.lo, window.hi),
        offset=offset,
        gain=gain,
        jitter_order=jitter_order,
        elastic=elastic,
        elastic_order=elastic_order,
        elastic_seed=elastic_seed,
    )


def apply_augmentations(view: View, record: AugmentationRecord) -> View:
    """Apply a record's augmentations and normalise; deterministic given the record."""
    if record.reflect:
        view = reflect_time(view)
    if record.stretch != 1.0:
        view = stretch_time(view, record.stretch)
    if record.crop_window is not None:
        view = crop_depth(view, DepthWindow(lo=record.crop_window[0], hi=record.crop_window[1]))
    if (view.presence & np.isfinite(view.image)).any():
        image = normalize_sv(view.image, view.presence)
    else:
        logger.debug("Augmented view has no present samples; filled")
        image = np.full(view.image.shape, MISSING_FILL_VALUE)
    view = view.model_copy(update={"image": image})
    if record.offset != 0.0 or record.gain != 1.0:
        view = color_jitter(view, record.offset, record.gain, record.jitter_order)
    if record.elastic:
        view = elastic_deform(view, order=record.elastic_order, seed=record.elastic_seed)
    return view


def build_training_view(
    view: View,
    rng: Optional[np.random.Generator] = None,
    augment: bool = True,
    width: int = INPUT_WIDTH,
    height: int = INPUT_HEIGHT,
) -> TrainingView:
    """
    Build a model input from a raw-Sv view.

    With ``augment`` the augmentations are drawn from ``rng``; otherwise the view is
    only normalised and rescaled to ``(width, height)``.
    """
    if augment:
        if rng is None:
            rng = np.random.default_rng()
        record = draw_augmentations(view, rng)
    else:
        record = AugmentationRecord()
    return finalize_view(apply_augmentations(view, record), record, width, height)


def replay_training_view(
    view: View,
    record: AugmentationRecord,
    width: int = INPUT_WIDTH,
    height: int = INPUT_HEIGHT,
) -> TrainingView:
    """Rebuild a training view from its augmentation record."""
    return finalize_view(apply_augmentations(view, record), record, width, height)
