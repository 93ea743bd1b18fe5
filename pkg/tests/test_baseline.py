import numpy as np
import pytest

from core.exceptions import ValidationError
from models.baseline import BaselineConfig
from models.echogram import Orientation
from services.baseline import (
    BaselineAlgorithm,
    _candidate_indices,
    baseline_csv,
    best_bottom_candidate,
    gaussian_blur_2d,
    gaussian_kernel,
    pick_entrained_air_mobile,
    pick_entrained_air_stationary,
    pick_seafloor,
    pick_surface,
    run_baselines,
    threshold_offset_pick,
)
from services.synth import render_exports
from tests.helpers import make_echogram


def _layered(boundaries: list[tuple[int, float]], n_pings: int = 4, n_depths: int = 50) -> np.ndarray:
    """Columns of constant Sv: each (start index, Sv) entry holds until the next one."""
    column = np.empty(n_depths)
    for (start, value), (stop, _) in zip(boundaries, boundaries[1:] + [(n_depths, 0.0)]):
        column[start:stop] = value
    return np.tile(column, (n_pings, 1))


# ----------------------------------------------------------------------------
# Blur
# ----------------------------------------------------------------------------

def test_gaussian_kernel_sums_to_one():
    kernel = gaussian_kernel(5, 1.0)
    assert kernel.sum() == pytest.approx(1.0)
    assert kernel[2, 2] == kernel.max()


def test_gaussian_kernel_must_be_odd():
    with pytest.raises(ValidationError):
        gaussian_kernel(4, 1.0)
    with pytest.raises(ValueError):
        BaselineConfig(blur_kernel=12)


def test_blur_renormalises_over_present_cells():
    sv = np.full((20, 20), -60.0)
    sv[5:8, 5:8] = np.nan
    blurred = gaussian_blur_2d(make_echogram(sv), kernel=5, sigma=1.0)
    assert blurred.presence.all()
    np.testing.assert_allclose(blurred.sv, -60.0)


def test_blur_leaves_isolated_gaps_missing():
    sv = np.full((20, 20), np.nan)
    sv[0, 0] = -60.0
    blurred = gaussian_blur_2d(make_echogram(sv), kernel=5, sigma=1.0)
    assert blurred.presence[2, 2]
    assert not blurred.presence[10, 10]


# ----------------------------------------------------------------------------
# Pickers
# ----------------------------------------------------------------------------

def test_seafloor_is_raised_by_bottom_offset():
    echogram = make_echogram(_layered([(0, -90.0), (30, -30.0)]))
    line = pick_seafloor(echogram)
    assert line.valid.all()
    np.testing.assert_allclose(line.depths, 29.5)


def test_weak_layer_is_not_a_seafloor():
    echogram = make_echogram(_layered([(0, -90.0), (30, -60.0)]))
    line = pick_seafloor(echogram)
    assert not line.valid.any()
    np.testing.assert_allclose(line.depths, echogram.depths[-1])


def test_backstep_retreats_through_strong_tail():
    sv = _layered([(0, -90.0), (27, -45.0), (30, -30.0)])
    line = best_bottom_candidate(make_echogram(sv), good_pick_db=-35.0, discrimination_db=-40.0, backstep_db=-50.0)
    assert line.valid.all()
    np.testing.assert_allclose(line.depths, 27.0)


def test_threshold_offset_picks_first_quiet_sample_below_surface():
    echogram = make_echogram(_layered([(0, -40.0), (8, -90.0)]))
    np.testing.assert_allclose(threshold_offset_pick(echogram, 0.0).depths, 8.0)
    np.testing.assert_allclose(threshold_offset_pick(echogram, 10.0).depths, 10.0)


def test_threshold_offset_without_crossing():
    echogram = make_echogram(np.full((3, 10), -40.0))
    line = threshold_offset_pick(echogram, 0.0)
    assert not line.valid.any()
    np.testing.assert_allclose(line.depths, 9.0)


def test_stationary_air_is_found_after_blurring():
    echogram = make_echogram(_layered([(0, -40.0), (20, -95.0)], n_pings=30))
    line = pick_entrained_air_stationary(echogram)
    assert line.valid.all()
    assert (np.abs(line.depths - 20.0) <= 2.0).all()


def test_mobile_air_picks_the_inverted_water_column():
    echogram = make_echogram(_layered([(0, -40.0), (8, -85.0)]))
    line = pick_entrained_air_mobile(echogram)
    assert line.valid.all()
    np.testing.assert_allclose(line.depths, 8.0)


def test_surface_is_searched_up_from_the_transducer():
    sv = _layered([(0, -20.0), (6, -85.0)])
    echogram = make_echogram(sv, orientation=Orientation.UPFACING, flipped=True)
    line = pick_surface(echogram)
    assert line.valid.all()
    np.testing.assert_allclose(line.depths, 5.0)


def test_candidates_need_enough_samples():
    assert _candidate_indices(np.zeros((2, 3)), -70.0, -70.0, -50.0).tolist() == [-1, -1]


def test_pickers_check_orientation():
    with pytest.raises(ValidationError):
        pick_surface(make_echogram(np.zeros((2, 10))))
    with pytest.raises(ValidationError):
        pick_seafloor(make_echogram(np.zeros((2, 10)), orientation=Orientation.UPFACING, flipped=True))


# ----------------------------------------------------------------------------
# Running
# ----------------------------------------------------------------------------

def test_run_baselines_by_orientation():
    down = run_baselines(make_echogram(_layered([(0, -40.0), (8, -85.0), (30, -30.0)])))
    assert set(down) == {
        BaselineAlgorithm.BBC_SEAFLOOR,
        BaselineAlgorithm.THRESHOLD_OFFSET,
        BaselineAlgorithm.BBC_AIR,
    }
    up = run_baselines(make_echogram(np.full((2, 10), -60.0), orientation=Orientation.UPFACING, flipped=True))
    assert BaselineAlgorithm.BBC_SURFACE in up


def test_run_baselines_needs_standardised_echogram():
    with pytest.raises(ValidationError):
        run_baselines(make_echogram(np.zeros((2, 10)), orientation=Orientation.UPFACING))


def test_baseline_csv_writes_one_file_per_algorithm(tmp_path, downfacing_recording):
    paths = render_exports(downfacing_recording, tmp_path / "corpus")
    lines = baseline_csv(paths.raw_csv, tmp_path / "out")
    assert len(lines) == 3
    for name in ("down.seafloor.bbc-seafloor.evl", "down.air.threshold-offset.evl", "down.air.bbc-air.evl"):
        assert (tmp_path / "out" / name).exists()
