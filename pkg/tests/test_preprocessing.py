from datetime import datetime, timezone

import numpy as np
import pytest

from core.exceptions import AlignmentError, DegenerateLineError, InterpolationError
from models.echogram import BoundaryLine, Orientation
from models.formats import LineFile, Region, RegionClass, RegionFile, SvCsvRecording
from models.synth import SynthConfig
from services.preprocessing import (
    build_targets,
    clean_surface_line,
    detect_passive_periods,
    line_on_grid,
    load_corpus_recording,
    modal_resolution,
    regions_on_grid,
    regrid_depth,
    remove_line_offset,
    standardize_orientation,
)
from services.synth import recording_targets, render_exports, synthesize
from tests.helpers import make_echogram


def _recording(samples, starts, stops) -> SvCsvRecording:
    samples = [np.asarray(s, dtype=float) for s in samples]
    return SvCsvRecording(
        ping_index=np.arange(len(samples)),
        timestamps=1.6e9 + np.arange(len(samples), dtype=float),
        range_start=np.asarray(starts, dtype=float),
        range_stop=np.asarray(stops, dtype=float),
        samples=samples,
        presence=[np.isfinite(s) for s in samples],
    )


# ----------------------------------------------------------------------------
# Regridding and orientation
# ----------------------------------------------------------------------------

def test_regrid_copies_aligned_pings_and_interpolates_short_ones():
    recording = _recording(
        [[-50, -51, -52, -53, -54], [-60, -61, -62, -63, -64], [-70, -71, -72]],
        starts=[0.0, 0.0, 0.0],
        stops=[2.0, 2.0, 1.0],
    )
    echogram = regrid_depth(recording)

    np.testing.assert_allclose(echogram.depths, [0.0, 0.5, 1.0, 1.5, 2.0])
    np.testing.assert_array_equal(echogram.sv[0], [-50, -51, -52, -53, -54])
    np.testing.assert_allclose(echogram.sv[2, :3], [-70, -71, -72])
    assert echogram.presence[2].tolist() == [True, True, True, False, False]
    assert np.isnan(echogram.sv[2, 3:]).all()


def test_regrid_keeps_missing_samples_missing():
    recording = _recording(
        [[-50, -51, -52, -53, -54], [-60, np.nan, -62]],
        starts=[0.0, 0.0],
        stops=[2.0, 1.0],
    )
    echogram = regrid_depth(recording)
    assert echogram.presence[1].tolist() == [True, False, True, False, False]


def test_regrid_stays_within_each_ping_range_of_values():
    rng = np.random.default_rng(4)
    samples, starts, stops = [], [], []
    for i in range(30):
        step = 0.3 if i % 3 == 0 else 0.5
        count = int(rng.integers(5, 40))
        start = 0.5 * int(rng.integers(0, 6))
        values = -80 + 30 * rng.random(count)
        values[rng.random(count) < 0.1] = np.nan
        samples.append(values)
        starts.append(start)
        stops.append(start + step * (count - 1))
    recording = _recording(samples, starts, stops)
    echogram = regrid_depth(recording)

    for i, values in enumerate(samples):
        regridded = echogram.sv[i, echogram.presence[i]]
        if regridded.size:
            assert regridded.min() >= np.nanmin(values) - 1e-9
            assert regridded.max() <= np.nanmax(values) + 1e-9


def test_modal_resolution_prefers_most_common_step():
    recording = _recording(
        [np.zeros(5), np.zeros(5), np.zeros(3)],
        starts=[0.0, 0.0, 0.0],
        stops=[2.0, 2.0, 2.0],
    )
    assert modal_resolution(recording) == pytest.approx(0.5)


def test_single_sample_ping_cannot_be_interpolated():
    recording = _recording([[-50, -51], [-60]], starts=[0.0, 0.0], stops=[1.0, 1.0])
    with pytest.raises(InterpolationError) as info:
        regrid_depth(recording)
    assert info.value.details == {"ping": 1}


def test_standardize_orientation_reverses_upfacing_depth_axis():
    sv = np.arange(8, dtype=float).reshape(2, 4) - 80
    echogram = make_echogram(sv, depths=np.array([1.0, 2.0, 3.0, 4.0]), orientation=Orientation.UPFACING)

    flipped = standardize_orientation(echogram)
    assert flipped.flipped
    np.testing.assert_array_equal(flipped.sv[0], sv[0, ::-1])
    np.testing.assert_allclose(flipped.depths, [1.0, 2.0, 3.0, 4.0])

    restored = standardize_orientation(flipped)
    assert not restored.flipped
    np.testing.assert_array_equal(restored.sv, sv)


def test_standardize_orientation_leaves_downfacing_alone():
    echogram = make_echogram(np.zeros((2, 3)))
    assert standardize_orientation(echogram) is echogram


# ----------------------------------------------------------------------------
# Lines
# ----------------------------------------------------------------------------

def test_line_on_grid_reflects_upfacing_lines():
    echogram = make_echogram(np.zeros((3, 11)), orientation=Orientation.UPFACING, flipped=True)
    line = LineFile.from_arrays(echogram.timestamps, np.array([2.0, 3.0, 4.0]))
    np.testing.assert_allclose(line_on_grid(line, echogram, "air"), [8.0, 7.0, 6.0])


def test_line_on_grid_interpolates_between_points():
    echogram = make_echogram(np.zeros((3, 11)))
    line = LineFile.from_arrays(echogram.timestamps[[0, 2]], np.array([2.0, 4.0]))
    np.testing.assert_allclose(line_on_grid(line, echogram, "air"), [2.0, 3.0, 4.0])


def test_remove_line_offset_moves_lines_back_to_their_boundaries():
    line = np.array([5.0, 6.0])
    np.testing.assert_allclose(remove_line_offset(line, 1.0, "air", Orientation.DOWNFACING), [4.0, 5.0])
    np.testing.assert_allclose(remove_line_offset(line, 1.0, "seafloor", Orientation.DOWNFACING), [6.0, 7.0])
    np.testing.assert_allclose(remove_line_offset(line, 1.0, "surface", Orientation.UPFACING), [4.0, 5.0])
    np.testing.assert_allclose(remove_line_offset(line, 1.0, "surface", Orientation.DOWNFACING), line)


def test_clean_surface_line_replaces_a_spike():
    depths = np.full(300, 2.0)
    depths[150] = 10.0
    cleaned = clean_surface_line(BoundaryLine.from_depths(depths))
    np.testing.assert_allclose(cleaned.depths, 2.0)


def test_clean_surface_line_is_clamped_to_the_air_line():
    cleaned = clean_surface_line(BoundaryLine.from_depths(np.full(50, 2.0)), air=np.full(50, 1.5))
    np.testing.assert_allclose(cleaned.depths, 1.5)


def test_clean_surface_line_flags_outliers_in_noisy_line():
    rng = np.random.default_rng(0)
    depths = 2.0 + 0.05 * rng.standard_normal(400)
    depths[200:203] += 3.0
    cleaned = clean_surface_line(BoundaryLine.from_depths(depths))
    assert np.abs(cleaned.depths[200:203] - 2.0).max() < 0.5
    assert cleaned.valid.mean() > 0.95


def test_clean_surface_line_is_idempotent():
    rng = np.random.default_rng(0)
    depths = 2.0 + 0.05 * rng.standard_normal(400)
    depths[200:203] += 3.0
    depths[50] -= 1.0
    once = clean_surface_line(BoundaryLine.from_depths(depths))
    twice = clean_surface_line(once)
    np.testing.assert_allclose(twice.depths, once.depths)
    np.testing.assert_array_equal(twice.valid, once.valid)


def test_clean_surface_line_without_valid_points():
    with pytest.raises(DegenerateLineError):
        clean_surface_line(BoundaryLine.from_depths(np.full(10, np.nan)))


def test_downfacing_surface_is_at_the_transducer():
    cleaned = clean_surface_line(BoundaryLine.from_depths(np.full(5, 3.0)), orientation=Orientation.DOWNFACING)
    np.testing.assert_array_equal(cleaned.depths, 0.0)


# ----------------------------------------------------------------------------
# Passive periods and regions
# ----------------------------------------------------------------------------

def _passive_echogram(attenuated: slice, n_pings: int = 40):
    rng = np.random.default_rng(1)
    sv = -50 + rng.standard_normal((n_pings, 40))
    sv[attenuated] -= 60
    return make_echogram(sv)


def test_detect_passive_periods_from_sv_jumps():
    assert detect_passive_periods(_passive_echogram(slice(10, 20))) == [(10, 19)]


def test_detect_passive_period_open_at_start_and_end():
    assert detect_passive_periods(_passive_echogram(slice(0, 5))) == [(0, 4)]
    assert detect_passive_periods(_passive_echogram(slice(30, 40))) == [(30, 39)]


def test_passive_detection_ignores_samples_beyond_the_window():
    rng = np.random.default_rng(2)
    sv = -50 + rng.standard_normal((40, 80))
    sv[10:20, :38] -= 60
    expected = detect_passive_periods(make_echogram(sv))
    assert expected == [(10, 19)]

    sv[:, 38:] = rng.uniform(-150, 0, (40, 42))
    sv[::7, 50:] = np.nan
    assert detect_passive_periods(make_echogram(sv)) == expected


def test_passive_schedule_overrides_detection():
    echogram = _passive_echogram(slice(10, 20))
    assert detect_passive_periods(echogram, schedule=[(35, 60), (2, 3)]) == [(2, 3), (35, 39)]


@pytest.mark.parametrize("orientation", list(Orientation))
def test_detect_passive_periods_on_synthetic_recordings(orientation):
    config = SynthConfig(
        seed=11, n_pings=300, depth_max=20.0, orientation=orientation, passive_periods=[(50, 69), (120, 139)]
    )
    recording = synthesize(config)
    assert detect_passive_periods(recording.raw) == [(50, 69), (120, 139)]


def test_regions_on_grid_rasterises_periods_and_patches():
    echogram = make_echogram(np.zeros((10, 10)))

    def at(ping: float) -> datetime:
        return datetime.fromtimestamp(1.6e9 + ping, timezone.utc)

    regions = RegionFile(
        regions=[
            Region.rectangle(1, RegionClass.PASSIVE, at(1.5), at(4.5), 0.0, 9.0),
            Region.rectangle(2, RegionClass.BAD_PATCH, at(4.5), at(7.5), 1.5, 3.5),
        ]
    )
    grid = regions_on_grid(regions, echogram)
    assert grid.passive_periods == [(2, 4)]
    assert grid.bad_periods == []
    expected = np.zeros((10, 10), dtype=bool)
    expected[5:8, 2:4] = True
    np.testing.assert_array_equal(grid.patch_mask, expected)


def test_regions_on_grid_without_file():
    grid = regions_on_grid(None, make_echogram(np.zeros((3, 4))))
    assert grid.passive_periods == [] and not grid.patch_mask.any()


# ----------------------------------------------------------------------------
# Targets
# ----------------------------------------------------------------------------

def test_targets_reconstruct_generator_mask():
    config = SynthConfig(
        seed=5, n_pings=400, depth_max=20.0, passive_rate=5.0, bad_period_rate=5.0, patch_rate=20.0
    )
    recording = synthesize(config)
    targets = recording_targets(recording)

    np.testing.assert_array_equal(targets.mask, recording.mask)
    np.testing.assert_array_equal(targets.reconstruct_mask(), recording.mask)
    assert targets.bad_period.sum() == sum(b - a + 1 for a, b in recording.bad_periods)
    assert (targets.air >= targets.air_original).all()
    assert (targets.seafloor <= targets.seafloor_original).all()
    assert not (targets.patches & (targets.passive | targets.bad_period)[:, None]).any()


def test_targets_of_fully_masked_ping_under_closed_lines_are_not_bad():
    sv = np.full((6, 10), -70.0)
    raw = make_echogram(sv)
    clean_sv = sv.copy()
    clean_sv[:, :2] = np.nan
    clean_sv[:, 9:] = np.nan
    clean_sv[2] = np.nan
    clean = make_echogram(clean_sv)
    air = np.full(6, 2.0)
    air[2] = 9.5
    seafloor = np.full(6, 8.0)

    targets = build_targets(raw, clean, air=air, seafloor=seafloor, passive_schedule=[])
    assert not targets.bad_period.any()
    np.testing.assert_array_equal(targets.reconstruct_mask(), targets.mask)


def test_targets_need_matching_grids():
    raw = make_echogram(np.zeros((4, 5)))
    clean = make_echogram(np.zeros((3, 5)))
    with pytest.raises(AlignmentError):
        build_targets(raw, clean, air=np.zeros(4))


def test_upfacing_targets_have_no_seafloor(upfacing_recording):
    targets = recording_targets(upfacing_recording)
    np.testing.assert_array_equal(targets.seafloor, upfacing_recording.raw.depths[-1])
    assert targets.surface_valid.any()


def test_load_corpus_recording_matches_generator(tmp_path, upfacing_recording):
    paths = render_exports(upfacing_recording, tmp_path)
    echogram, targets = load_corpus_recording(paths)

    assert echogram.flipped
    np.testing.assert_allclose(echogram.depths, upfacing_recording.raw.depths, atol=1e-9)
    np.testing.assert_allclose(echogram.sv, upfacing_recording.raw.sv)
    np.testing.assert_array_equal(targets.mask, upfacing_recording.mask)
    np.testing.assert_allclose(targets.air_original, upfacing_recording.air, atol=1e-9)
