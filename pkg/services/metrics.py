"""
Metrics Service
Evaluation of predicted masks and lines against targets

Per-recording counts and errors are collected in :class:`FileStats` and combined by
:func:`aggregate` in one of two ways:

- pooled: intersections and unions are summed over recordings before dividing,
  and line errors of all pings are pooled
- per-file: each recording's statistic is computed first and the values averaged

Standard errors always come from the per-file distribution.
"""

import logging
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats

from constants.defaults import CDF_MAX_M, CDF_STEP_M, ERROR_THRESHOLDS_M, LINE_OFFSET_M
from constants.messages import ErrorMessages, SuccessMessages
from core.exceptions import DataIOError, UndefinedStatisticError, ValidationError
from models.echogram import (
    Orientation,
    RegionSet,
    SegmentationTargets,
    excluded_above,
    excluded_below,
)
from models.evaluation import (
    DatasetMode,
    FileStats,
    LineErrorStats,
    LineSummary,
    MetricsReport,
    PairedTest,
    Statistic,
)
from models.formats import RecordingPaths
from services.baseline import BaselineAlgorithm
from services.formats.corpus import find_recordings, read_lines_for_recording, read_regions_for_recording
from services.preprocessing import line_on_grid, load_corpus_recording, regions_on_grid
from utils.parallel import map_jobs

logger = logging.getLogger(__name__)

OUTPUTS = ("overall", "air", "seafloor", "surface", "passive", "bad_period", "patches")


# ----------------------------------------------------------------------------
# Masks
# ----------------------------------------------------------------------------

class Overlap(NamedTuple):
    """Pixel counts of a target/prediction pair."""

    intersection: int
    union: int
    target_size: int

    @property
    def both_empty(self) -> bool:
        return self.union == 0

    @property
    def iou(self) -> float:
        # Both empty counts as a perfect match; callers see both_empty
        return 1.0 if self.union == 0 else self.intersection / self.union


def overlap(target: np.ndarray, predicted: np.ndarray) -> Overlap:
    """
    Intersection, union and target size of two boolean masks.

    Raises:
        ValidationError: If the shapes differ
    """
    target = np.asarray(target, dtype=bool)
    predicted = np.asarray(predicted, dtype=bool)
    if target.shape != predicted.shape:
        raise ValidationError(ErrorMessages.SHAPE_MISMATCH.format(a=target.shape, b=predicted.shape))
    return Overlap(
        intersection=int(np.count_nonzero(target & predicted)),
        union=int(np.count_nonzero(target | predicted)),
        target_size=int(np.count_nonzero(target)),
    )


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    return overlap(a, b).iou


def line_layers(
    depths: np.ndarray,
    orientation: Orientation,
    air: np.ndarray,
    seafloor: Optional[np.ndarray] = None,
    surface: Optional[np.ndarray] = None,
    air_extent: Optional[np.ndarray] = None,
) -> dict[str, np.ndarray]:
    """
    Masks scored for the line outputs, on a standardised depth grid.

    - air: from the entrained-air line down to ``air_extent`` (the target seafloor)
      for downfacing recordings, or down to the echosounder for upfacing ones
    - seafloor (downfacing): from the echosounder down to the seafloor line
    - surface (upfacing): from the surface line down to the echosounder
    """
    layers = {"air": ~excluded_above(depths, air)}
    if orientation == Orientation.DOWNFACING:
        if air_extent is not None:
            layers["air"] &= ~excluded_below(depths, air_extent)
        if seafloor is not None:
            layers["seafloor"] = ~excluded_below(depths, seafloor)
    elif surface is not None:
        layers["surface"] = ~excluded_above(depths, surface)
    return layers


def target_layers(targets: SegmentationTargets) -> dict[str, np.ndarray]:
    """Target masks of every evaluated output."""
    layers = {
        "overall": targets.mask,
        "passive": targets.passive,
        "bad_period": targets.bad_period,
        "patches": targets.patches,
    }
    layers.update(
        line_layers(
            targets.depths,
            targets.orientation,
            targets.air,
            seafloor=targets.seafloor,
            surface=targets.surface,
            air_extent=targets.seafloor,
        )
    )
    return layers


def predicted_layers(
    depths: np.ndarray,
    orientation: Orientation,
    air: np.ndarray,
    seafloor: Optional[np.ndarray],
    regions: RegionSet,
    surface: Optional[np.ndarray] = None,
    air_extent: Optional[np.ndarray] = None,
) -> dict[str, np.ndarray]:
    """
    Predicted masks of every evaluated output.

    The overall mask keeps what is left after removing everything above the
    entrained-air line, below the seafloor, the passive and bad periods and the
    patches. ``air_extent`` is the target seafloor bounding the scored air area.
    """
    n_pings = len(air)
    passive = np.zeros(n_pings, dtype=bool)
    for start, stop in regions.passive_periods:
        passive[start:stop + 1] = True
    bad = np.zeros(n_pings, dtype=bool)
    for start, stop in regions.bad_periods:
        bad[start:stop + 1] = True

    downfacing = orientation == Orientation.DOWNFACING
    if downfacing and seafloor is None:
        seafloor = np.full(n_pings, depths[-1])
    layers = line_layers(depths, orientation, air, seafloor, surface, air_extent)
    layers.update(passive=passive, bad_period=bad, patches=regions.patch_mask)

    removed = excluded_above(depths, air) | regions.patch_mask | (passive | bad)[:, None]
    if downfacing:
        removed |= excluded_below(depths, seafloor)
    layers["overall"] = ~removed
    return layers


# ----------------------------------------------------------------------------
# Lines
# ----------------------------------------------------------------------------

def line_error_stats(
    target: np.ndarray,
    predicted: np.ndarray,
    excluded: Optional[np.ndarray] = None,
    thresholds: Sequence[float] = ERROR_THRESHOLDS_M,
) -> LineErrorStats:
    """
    MAE, RMSE and within-threshold fractions of a predicted line.

    Args:
        target: Target depth per ping (m)
        predicted: Predicted depth per ping (m)
        excluded: Pings left out (passive and bad periods)
        thresholds: Error thresholds (m); a ping is within a threshold when its
            error is strictly below it

    Raises:
        ValidationError: If the lines differ in length
        UndefinedStatisticError: If no ping remains
    """
    target = np.asarray(target, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if target.shape != predicted.shape:
        raise ValidationError(ErrorMessages.SHAPE_MISMATCH.format(a=target.shape, b=predicted.shape))
    included = np.isfinite(target) & np.isfinite(predicted)
    if excluded is not None:
        included &= ~np.asarray(excluded, dtype=bool)
    if not included.any():
        raise UndefinedStatisticError(ErrorMessages.NO_INCLUDED_PINGS)

    errors = np.abs(predicted[included] - target[included])
    return LineErrorStats(
        errors=errors,
        mae=float(np.mean(errors)),
        rmse=float(np.sqrt(np.mean(errors ** 2))),
        within={float(t): float(np.mean(errors < t)) for t in thresholds},
    )


def error_cdf(errors: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Fraction of absolute errors at or below each threshold."""
    errors = np.sort(np.asarray(errors, dtype=float))
    if errors.size == 0:
        return np.zeros(len(thresholds))
    return np.searchsorted(errors, np.asarray(thresholds, dtype=float), side="right") / errors.size


def area_above_cdf(errors: np.ndarray) -> float:
    """
    Area between 1 and the empirical CDF of the absolute errors.

    Integrates the step function exactly; the result equals the mean absolute error.
    """
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise UndefinedStatisticError(ErrorMessages.NO_INCLUDED_PINGS)
    steps, counts = np.unique(errors, return_counts=True)
    below = np.concatenate(([0.0], np.cumsum(counts)[:-1] / errors.size))
    widths = np.diff(np.concatenate(([0.0], steps)))
    return float(np.sum(widths * (1.0 - below)))


def cdf_grid() -> np.ndarray:
    return np.round(np.arange(0.0, CDF_MAX_M + CDF_STEP_M / 2, CDF_STEP_M), 6)


# ----------------------------------------------------------------------------
# Per-recording statistics
# ----------------------------------------------------------------------------

def file_stats(
    name: str,
    targets: SegmentationTargets,
    layers: dict[str, np.ndarray],
    lines: dict[str, np.ndarray],
    thresholds: Sequence[float] = ERROR_THRESHOLDS_M,
    surface_range: Optional[tuple[float, float]] = None,
) -> FileStats:
    """
    Counts and line errors of one recording.

    Args:
        name: Recording identifier
        targets: Target masks and lines
        layers: Predicted masks keyed by output (see :func:`predicted_layers`)
        lines: Predicted lines keyed by kind (air, seafloor, surface)
        thresholds: Error thresholds (m)
        surface_range: Plausible depth range of the target surface; recordings
            whose median target surface lies outside it are not scored on the
            surface line
    """
    truth = target_layers(targets)
    record = FileStats(name=name)
    for output in OUTPUTS:
        if output not in truth or output not in layers:
            continue
        counts = overlap(truth[output], layers[output])
        record.intersections[output] = counts.intersection
        record.unions[output] = counts.union
        record.target_sizes[output] = counts.target_size

    excluded = targets.passive | targets.bad_period
    target_lines = {"air": (targets.air, excluded)}
    if targets.orientation == Orientation.DOWNFACING:
        target_lines["seafloor"] = (targets.seafloor, excluded)
    else:
        plausible = True
        if surface_range is not None and targets.surface_valid.any():
            median = float(np.median(targets.surface[targets.surface_valid]))
            plausible = surface_range[0] <= median <= surface_range[1]
            if not plausible:
                logger.info(f"{name}: target surface at {median:.2f} m outside {surface_range}, skipped")
        if plausible:
            target_lines["surface"] = (targets.surface, excluded | ~targets.surface_valid)

    for kind, (target, skip) in target_lines.items():
        if kind not in lines:
            continue
        try:
            record.line_errors[kind] = line_error_stats(target, lines[kind], skip, thresholds).errors
        except UndefinedStatisticError:
            logger.warning(f"{name}: no included pings for the {kind} line")
    return record


# ----------------------------------------------------------------------------
# Aggregation
# ----------------------------------------------------------------------------

def _sem(values: Sequence[float]) -> Optional[float]:
    if len(values) < 2:
        return None
    return float(np.std(values, ddof=1) / np.sqrt(len(values)))


def _aggregate_output(files: Sequence[FileStats], output: str, mode: DatasetMode) -> tuple[Statistic, int]:
    present = [f for f in files if output in f.unions]
    per_file = [Overlap(f.intersections[output], f.unions[output], f.target_sizes[output]) for f in present]
    both_empty = sum(o.both_empty for o in per_file)
    if mode == DatasetMode.POOLED:
        union = sum(o.union for o in per_file)
        value = 1.0 if union == 0 else sum(o.intersection for o in per_file) / union
    else:
        value = float(np.mean([o.iou for o in per_file]))
    # Recordings with an empty target carry no information about spread
    sem = _sem([o.iou for o in per_file if o.target_size > 0])
    return Statistic(value=value, sem=sem), both_empty


def _aggregate_line(
    files: Sequence[FileStats],
    kind: str,
    mode: DatasetMode,
    thresholds: Sequence[float],
) -> Optional[LineSummary]:
    per_file = [f.line_errors[kind] for f in files if kind in f.line_errors and len(f.line_errors[kind])]
    if not per_file:
        return None
    pooled = np.concatenate(per_file)
    maes = [float(np.mean(e)) for e in per_file]
    mses = [float(np.mean(e ** 2)) for e in per_file]
    withins = {t: [float(np.mean(e < t)) for e in per_file] for t in thresholds}

    if mode == DatasetMode.POOLED:
        mae = float(np.mean(pooled))
        rmse = float(np.sqrt(np.mean(pooled ** 2)))
        within = {t: float(np.mean(pooled < t)) for t in thresholds}
    else:
        mae = float(np.mean(maes))
        rmse = float(np.sqrt(np.mean(mses)))
        within = {t: float(np.mean(v)) for t, v in withins.items()}

    grid = cdf_grid()
    return LineSummary(
        mae=Statistic(value=mae, sem=_sem(maes)),
        rmse=Statistic(value=rmse, sem=_sem(np.sqrt(mses).tolist())),
        within={t: Statistic(value=within[t], sem=_sem(withins[t])) for t in thresholds},
        cdf=list(zip(grid.tolist(), error_cdf(pooled, grid).tolist())),
        n_pings=int(pooled.size),
    )


def aggregate(
    files: Sequence[FileStats],
    mode: DatasetMode = DatasetMode.POOLED,
    thresholds: Sequence[float] = ERROR_THRESHOLDS_M,
) -> MetricsReport:
    """
    Combine per-recording statistics into a report.

    Raises:
        UndefinedStatisticError: If there are no recordings
    """
    if not files:
        raise UndefinedStatisticError(ErrorMessages.NO_FILES)

    report = MetricsReport(mode=mode, n_files=len(files))
    for output in OUTPUTS:
        if any(output in f.unions for f in files):
            report.iou[output], report.both_empty[output] = _aggregate_output(files, output, mode)
    for kind in ("air", "seafloor", "surface"):
        summary = _aggregate_line(files, kind, mode, thresholds)
        if summary is not None:
            report.lines[kind] = summary
    logger.debug(f"Aggregated {len(files)} recordings ({mode.value})")
    return report


def wilcoxon_compare(a: Sequence[float], b: Sequence[float]) -> PairedTest:
    """
    Two-sided Wilcoxon signed-rank test on paired per-file statistics.

    Raises:
        ValidationError: If the samples differ in length or are empty
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size == 0:
        raise ValidationError(ErrorMessages.SHAPE_MISMATCH.format(a=a.shape, b=b.shape))
    differences = a - b
    if not np.any(differences):
        return PairedTest(statistic=0.0, p_value=1.0, n_pairs=a.size, median_difference=0.0)
    result = stats.wilcoxon(a, b, alternative="two-sided")
    return PairedTest(
        statistic=float(result.statistic),
        p_value=float(result.pvalue),
        n_pairs=a.size,
        median_difference=float(np.median(differences)),
    )


# ----------------------------------------------------------------------------
# Corpus evaluation and reports
# ----------------------------------------------------------------------------

def exported_line_offset(tag: Optional[str]) -> float:
    """Offset that annotations tagged ``tag`` were exported with; targets and baselines have none."""
    if tag is None or tag in {algorithm.value for algorithm in BaselineAlgorithm}:
        return 0.0
    return LINE_OFFSET_M


def _evaluate_recording(
    paths: RecordingPaths,
    prediction_dir: Path,
    tag: Optional[str],
    line_offset: float,
    thresholds: Sequence[float],
    surface_range: Optional[tuple[float, float]],
) -> FileStats:
    echogram, targets = load_corpus_recording(paths)
    predicted = paths.model_copy(update={"directory": str(prediction_dir)})
    files = read_lines_for_recording(predicted, tag)
    if "air" not in files:
        raise DataIOError(
            ErrorMessages.MISSING_PREDICTION.format(kind="air", name=paths.name, path=predicted.line("air", tag))
        )
    lines = {kind: line_on_grid(line, echogram, kind, line_offset) for kind, line in files.items()}
    regions = regions_on_grid(read_regions_for_recording(predicted, tag), echogram)
    layers = predicted_layers(
        echogram.depths,
        echogram.orientation,
        lines["air"],
        lines.get("seafloor"),
        regions,
        surface=lines.get("surface"),
        air_extent=targets.seafloor,
    )
    return file_stats(paths.name, targets, layers, lines, thresholds, surface_range)


def evaluate_corpus(
    target_dir: Union[str, Path],
    prediction_dir: Union[str, Path],
    tag: Optional[str] = None,
    orientation: Orientation = Orientation.DOWNFACING,
    mode: DatasetMode = DatasetMode.POOLED,
    line_offset: Optional[float] = None,
    thresholds: Sequence[float] = ERROR_THRESHOLDS_M,
    surface_range: Optional[tuple[float, float]] = None,
    jobs: int = 1,
) -> tuple[MetricsReport, list[FileStats]]:
    """
    Evaluate the annotations tagged ``tag`` in ``prediction_dir`` against a corpus.

    Args:
        target_dir: Corpus directory with exports and target lines
        prediction_dir: Directory with the predicted lines and regions
        tag: Model or algorithm tag of the predictions (None for untagged files)
        orientation: Orientation of every recording in the corpus
        mode: Aggregation mode
        line_offset: Offset applied to the predicted lines when they were exported
            (default: :func:`exported_line_offset` of ``tag``)
        thresholds: Error thresholds (m)
        surface_range: Plausible target surface depths for surface scoring
        jobs: Worker count

    Raises:
        DataIOError: If a directory or a predicted entrained-air line is missing
    """
    if line_offset is None:
        line_offset = exported_line_offset(tag)
    recordings = find_recordings(target_dir, orientation)
    prediction_dir = Path(prediction_dir)
    files = map_jobs(
        lambda paths: _evaluate_recording(paths, prediction_dir, tag, line_offset, thresholds, surface_range),
        recordings,
        jobs,
    )
    return aggregate(files, mode, thresholds), files


def per_file_frame(files: Sequence[FileStats]) -> pd.DataFrame:
    """One row per recording: IoU of each output and MAE of each line."""
    rows = []
    for f in files:
        row = {"file": f.name}
        for output in f.unions:
            row[f"iou_{output}"] = f.iou(output)
        for kind, errors in f.line_errors.items():
            row[f"mae_{kind}"] = float(np.mean(errors)) if len(errors) else np.nan
        rows.append(row)
    return pd.DataFrame(rows)


def format_report(report: MetricsReport) -> str:
    """Aligned plain-text table of a report."""
    frame = report.to_frame()
    header = f"{report.n_files} recordings, {report.mode.value} aggregation"
    body = frame.to_string(index=False, na_rep="-", float_format=lambda v: f"{v:.4f}")
    return f"{header}\n{body}\n"


def write_report(report: MetricsReport, path: Union[str, Path]) -> tuple[Path, Path, Path]:
    """
    Write the report as ``<path>.txt`` (aligned table), ``<path>.csv`` and
    ``<path>.json`` (full report including the error distributions).

    Returns:
        The text, CSV and JSON paths
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text_path = path.with_suffix(".txt")
    csv_path = path.with_suffix(".csv")
    text_path.write_text(format_report(report))
    json_path = path.with_suffix(".json")
    report.to_frame().to_csv(csv_path, index=False)
    json_path.write_text(report.model_dump_json(indent=2))
    logger.info(SuccessMessages.REPORT_WRITTEN.format(path=text_path))
    return text_path, csv_path, json_path


def read_report(path: Union[str, Path]) -> MetricsReport:
    """Read a report written by :func:`write_report` from its JSON file."""
    path = Path(path).with_suffix(".json")
    if not path.is_file():
        raise DataIOError(ErrorMessages.INPUT_NOT_FOUND.format(path=path))
    return MetricsReport.model_validate_json(path.read_text())
