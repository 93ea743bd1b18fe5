from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
import torch

from core.exceptions import (
    CheckpointError,
    DataIOError,
    DuplicateRegionError,
    ManifestMissingError,
    ParseError,
    ShardIndexError,
    StructuralError,
    ValidationError,
)
from models.echogram import Orientation
from models.formats import (
    LineFile,
    LineStatus,
    RecordingPaths,
    Region,
    RegionClass,
    RegionFile,
    SvCsvRecording,
    quantize_timestamp,
)
from nnet.unet import EchogramUNet
from services.formats.checkpoint import PAYLOAD_NAME, load_checkpoint, save_checkpoint
from services.formats.corpus import find_recordings, read_lines_for_recording
from services.formats.evl import read_evl, write_evl
from services.formats.evr import read_evr, write_evr
from services.formats.shards import find_stores, iter_shards, read_manifest, read_shard, write_shards
from services.formats.sv_csv import HEADER, read_sv_csv, write_sv_csv
from services.synth import recording_targets

T0 = datetime(2019, 3, 14, 12, 0, 0, tzinfo=timezone.utc)


def _recording() -> SvCsvRecording:
    samples = [
        np.array([-60.5, np.nan, -70.25]),
        np.array([-55.0, -65.125, -75.0, -80.0]),
    ]
    return SvCsvRecording(
        ping_index=np.array([4, 5]),
        timestamps=np.array([1.6e9 + 0.25, 1.6e9 + 1.5]),
        range_start=np.array([0.5, 0.5]),
        range_stop=np.array([1.5, 2.0]),
        samples=samples,
        presence=[np.isfinite(s) for s in samples],
    )


# ----------------------------------------------------------------------------
# Sv CSV
# ----------------------------------------------------------------------------

def test_sv_csv_preserves_values_and_missing_cells(tmp_path):
    path = tmp_path / "rec.csv"
    original = _recording()
    write_sv_csv(original, path)
    loaded = read_sv_csv(path)

    np.testing.assert_array_equal(loaded.ping_index, original.ping_index)
    np.testing.assert_array_equal(loaded.timestamps, original.timestamps)
    np.testing.assert_array_equal(loaded.range_stop, original.range_stop)
    for got, expected in zip(loaded.samples, original.samples):
        np.testing.assert_array_equal(got, expected)
    assert loaded.presence[0].tolist() == [True, False, True]
    assert "-9.9e+37" in path.read_text()


def test_sv_csv_keeps_sub_millisecond_timestamps(tmp_path):
    recording = _recording().model_copy(update={"timestamps": np.array([1.6e9 + 0.1234567, 1.6e9 + 0.9999996])})
    write_sv_csv(recording, tmp_path / "rec.csv")
    loaded = read_sv_csv(tmp_path / "rec.csv")
    np.testing.assert_allclose(loaded.timestamps, [1.6e9 + 0.123457, 1.6e9 + 1.0], rtol=0, atol=1e-6)


def test_sv_csv_random_round_trips(tmp_path):
    rng = np.random.default_rng(20)
    for trial in range(100):
        n_pings = int(rng.integers(1, 12))
        samples = []
        for _ in range(n_pings):
            values = rng.uniform(-120, -20, int(rng.integers(2, 30)))
            values[rng.random(len(values)) < 0.2] = np.nan
            samples.append(values)
        starts = rng.uniform(0, 2, n_pings)
        original = SvCsvRecording(
            ping_index=np.arange(n_pings) + int(rng.integers(0, 1000)),
            timestamps=np.round(1.5e9 + np.cumsum(rng.uniform(0.001, 5.0, n_pings)), 6),
            range_start=starts,
            range_stop=starts + rng.uniform(1, 50, n_pings),
            samples=samples,
            presence=[np.isfinite(s) for s in samples],
        )
        path = tmp_path / f"rec{trial}.csv"
        write_sv_csv(original, path)
        loaded = read_sv_csv(path)

        np.testing.assert_array_equal(loaded.ping_index, original.ping_index)
        np.testing.assert_allclose(loaded.timestamps, original.timestamps, rtol=0, atol=1e-6)
        np.testing.assert_array_equal(loaded.range_start, original.range_start)
        np.testing.assert_array_equal(loaded.range_stop, original.range_stop)
        for got, expected in zip(loaded.samples, original.samples):
            np.testing.assert_array_equal(got, expected)


def test_sv_csv_ping_depths_are_evenly_spaced():
    recording = _recording()
    np.testing.assert_allclose(recording.ping_depths(1), [0.5, 0.5 + 1.5 / 3, 0.5 + 3.0 / 3, 2.0])


def test_sv_csv_missing_file(tmp_path):
    with pytest.raises(DataIOError):
        read_sv_csv(tmp_path / "absent.csv")


def test_sv_csv_without_header(tmp_path):
    path = tmp_path / "rec.csv"
    path.write_text("0,2019-03-14,12:00:00,0,0.0,1.0,2,-50,-60\n")
    with pytest.raises(StructuralError):
        read_sv_csv(path)


def test_sv_csv_row_with_wrong_sample_count(tmp_path):
    path = tmp_path / "rec.csv"
    path.write_text(",".join(HEADER) + "\n0,2019-03-14,12:00:00,0,0.0,1.0,3,-50,-60\n")
    with pytest.raises(StructuralError) as info:
        read_sv_csv(path)
    assert info.value.details == {"row": 2}


def test_sv_csv_unparseable_cell(tmp_path):
    path = tmp_path / "rec.csv"
    path.write_text(",".join(HEADER) + "\n0,2019-03-14,12:00:00,0,0.0,1.0,2,-50,loud\n")
    with pytest.raises(ParseError):
        read_sv_csv(path)


def test_sv_csv_without_pings(tmp_path):
    path = tmp_path / "rec.csv"
    path.write_text(",".join(HEADER) + "\n")
    with pytest.raises(StructuralError):
        read_sv_csv(path)


# ----------------------------------------------------------------------------
# EVL
# ----------------------------------------------------------------------------

def test_evl_round_trip_quantizes_time(tmp_path):
    times = np.array([T0.timestamp(), T0.timestamp() + 1.23456789])
    line = LineFile.from_arrays(times, np.array([3.25, 4.5]), np.array([3, 2]))
    path = tmp_path / "air.evl"
    write_evl(line, path)

    loaded = read_evl(path)
    assert loaded == line
    assert loaded.points[1].status == LineStatus.BAD
    assert loaded.points[1].timestamp.microsecond % 100 == 0
    assert path.read_text().splitlines()[2] == "20190314 1200000000 3.25 3"


def test_evl_random_round_trips(tmp_path):
    rng = np.random.default_rng(21)
    for trial in range(100):
        n_points = int(rng.integers(1, 50))
        times = T0.timestamp() + np.sort(rng.uniform(0, 86400, n_points))
        line = LineFile.from_arrays(
            times, rng.uniform(-5, 200, n_points), rng.choice([int(s) for s in LineStatus], n_points)
        )
        path = tmp_path / f"line{trial}.evl"
        write_evl(line, path)
        assert read_evl(path) == line


def test_evl_count_mismatch(tmp_path):
    path = tmp_path / "air.evl"
    path.write_text("EVBD 3 10.0\n2\n20190314 1200000000 3.0 3\n")
    with pytest.raises(StructuralError):
        read_evl(path)


def test_evl_unknown_status(tmp_path):
    path = tmp_path / "air.evl"
    path.write_text("EVBD 3 10.0\n1\n20190314 1200000000 3.0 7\n")
    with pytest.raises(ParseError) as info:
        read_evl(path)
    assert info.value.details == {"row": 3}


def test_evl_refuses_empty_line(tmp_path):
    with pytest.raises(ValidationError):
        write_evl(LineFile(), tmp_path / "air.evl")


def test_quantize_timestamp_assumes_utc():
    naive = datetime(2019, 3, 14, 12, 0, 0, 123456)
    assert quantize_timestamp(naive) == datetime(2019, 3, 14, 12, 0, 0, 123500, tzinfo=timezone.utc)


# ----------------------------------------------------------------------------
# EVR
# ----------------------------------------------------------------------------

def _regions() -> RegionFile:
    return RegionFile(
        regions=[
            Region.rectangle(1, RegionClass.PASSIVE, T0, T0 + timedelta(seconds=10), 0.0, 50.0),
            Region.rectangle(
                2, RegionClass.BAD_PATCH, T0 + timedelta(seconds=20), T0 + timedelta(seconds=25),
                12.5, 14.0, "model bad-patch",
            ),
        ]
    )


def test_evr_round_trip(tmp_path):
    path = tmp_path / "rec.evr"
    write_evr(_regions(), path)
    loaded = read_evr(path)
    assert loaded == _regions()
    assert loaded.regions[1].depth_top == 12.5
    assert loaded.regions[1].name == "model bad-patch"


def test_evr_random_round_trips(tmp_path):
    rng = np.random.default_rng(22)
    classes = list(RegionClass)
    for trial in range(100):
        regions = []
        for region_id in range(1, int(rng.integers(1, 10)) + 1):
            start = T0 + timedelta(seconds=float(rng.uniform(0, 3600)))
            end = start + timedelta(seconds=float(rng.uniform(1, 600)))
            top, bottom = np.sort(rng.uniform(0, 100, 2))
            classification = classes[int(rng.integers(len(classes)))]
            name = f"region {region_id}" if rng.random() < 0.5 else ""
            regions.append(
                Region.rectangle(region_id, classification, start, end, float(top), float(bottom), name)
            )
        original = RegionFile(regions=regions)
        path = tmp_path / f"rec{trial}.evr"
        write_evr(original, path)
        assert read_evr(path) == original


def test_evr_duplicate_ids_rejected(tmp_path):
    regions = _regions()
    regions.regions[1] = regions.regions[1].model_copy(update={"id": 1})
    with pytest.raises(DuplicateRegionError):
        write_evr(regions, tmp_path / "rec.evr")


def test_evr_unknown_classification(tmp_path):
    path = tmp_path / "rec.evr"
    write_evr(_regions(), path)
    path.write_text(path.read_text().replace("bad-patch\n", "fish-school\n", 1))
    with pytest.raises(ParseError):
        read_evr(path)


def test_region_must_span_time():
    with pytest.raises(ValueError):
        Region.rectangle(1, RegionClass.BAD_PERIOD, T0, T0, 0.0, 1.0)


# ----------------------------------------------------------------------------
# Shards
# ----------------------------------------------------------------------------

def test_shards_cover_the_recording(tmp_path, downfacing_recording):
    targets = recording_targets(downfacing_recording)
    raw = downfacing_recording.raw
    manifest = write_shards(raw, targets, tmp_path / "store", source_id="down")

    assert manifest.n_shards == 2
    assert manifest.shard_bounds(1) == (128, 200)
    shards = list(iter_shards(tmp_path / "store"))
    assert [s.n_pings for s in shards] == [128, 72]
    assert shards[1].offset == 128

    sv = np.concatenate([s.sv for s in shards])
    np.testing.assert_array_equal(sv, raw.sv.astype(np.float32))
    mask = np.concatenate([s.targets.mask for s in shards])
    np.testing.assert_array_equal(mask, targets.mask)
    air = np.concatenate([s.targets.air for s in shards])
    np.testing.assert_array_equal(air, targets.air.astype(np.float32))
    assert read_manifest(tmp_path / "store").source_id == "down"


def test_shard_random_round_trips(tmp_path, downfacing_recording):
    rng = np.random.default_rng(23)
    raw = downfacing_recording.raw
    targets = recording_targets(downfacing_recording)
    for trial in range(100):
        start = int(rng.integers(0, raw.n_pings - 1))
        stop = int(rng.integers(start + 1, raw.n_pings + 1))
        shard_length = int(rng.integers(8, 200))
        echogram = raw.slice_pings(start, stop)
        window = targets.slice_pings(start, stop)
        store = tmp_path / f"store{trial}"
        manifest = write_shards(echogram, window, store, shard_length=shard_length)

        shards = list(iter_shards(store))
        assert len(shards) == manifest.n_shards == -(-(stop - start) // shard_length)
        assert [s.offset for s in shards] == list(range(0, stop - start, shard_length))
        np.testing.assert_array_equal(np.concatenate([s.sv for s in shards]), echogram.sv.astype(np.float32))
        np.testing.assert_array_equal(np.concatenate([s.presence for s in shards]), echogram.presence)
        np.testing.assert_array_equal(np.concatenate([s.timestamps for s in shards]), echogram.timestamps)
        np.testing.assert_array_equal(np.concatenate([s.targets.mask for s in shards]), window.mask)
        np.testing.assert_array_equal(np.concatenate([s.targets.passive for s in shards]), window.passive)


def test_shard_index_out_of_range(tmp_path, downfacing_recording):
    targets = recording_targets(downfacing_recording)
    write_shards(downfacing_recording.raw, targets, tmp_path / "store")
    with pytest.raises(ShardIndexError):
        read_shard(tmp_path / "store", 2)


def test_shard_store_without_manifest(tmp_path):
    with pytest.raises(ManifestMissingError):
        read_shard(tmp_path, 0)


def test_find_stores_lists_nested_stores(tmp_path, downfacing_recording):
    targets = recording_targets(downfacing_recording)
    for name in ("b", "a"):
        write_shards(downfacing_recording.raw, targets, tmp_path / "corpus" / name)
    assert [p.name for p in find_stores(tmp_path)] == ["a", "b"]


# ----------------------------------------------------------------------------
# Checkpoints
# ----------------------------------------------------------------------------

def test_checkpoint_restores_state_dict(tmp_path, tiny_model_config):
    model = EchogramUNet(tiny_model_config)
    manifest = save_checkpoint(model.state_dict(), tiny_model_config, tmp_path / "ckpt", model_id="tiny")
    assert manifest.network == tiny_model_config

    loaded_manifest, state = load_checkpoint(tmp_path / "ckpt")
    assert loaded_manifest.model_id == "tiny"
    for key, tensor in model.state_dict().items():
        assert state[key].dtype == tensor.dtype
        assert torch.equal(state[key], tensor)


def test_checkpoint_with_truncated_payload(tmp_path, tiny_model_config):
    save_checkpoint(EchogramUNet(tiny_model_config).state_dict(), tiny_model_config, tmp_path)
    payload = tmp_path / PAYLOAD_NAME
    payload.write_bytes(payload.read_bytes()[:-4])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path)


def test_missing_checkpoint(tmp_path):
    with pytest.raises(DataIOError):
        load_checkpoint(tmp_path / "nowhere")


# ----------------------------------------------------------------------------
# Corpus layout
# ----------------------------------------------------------------------------

def test_recording_paths_naming():
    paths = RecordingPaths(name="site1", directory="/data")
    assert paths.raw_csv == "/data/site1.csv"
    assert paths.clean_csv == "/data/site1.clean.csv"
    assert paths.line("air") == "/data/site1.air.evl"
    assert paths.line("seafloor", "bbc-seafloor") == "/data/site1.seafloor.bbc-seafloor.evl"
    assert paths.regions("model") == "/data/site1.model.evr"


def test_find_recordings_skips_clean_exports(tmp_path):
    for name in ("b.csv", "a.csv", "a.clean.csv", "a.air.evl"):
        (tmp_path / name).write_text("")
    recordings = find_recordings(tmp_path, Orientation.UPFACING)
    assert [r.name for r in recordings] == ["a", "b"]
    assert all(r.orientation == Orientation.UPFACING for r in recordings)


def test_find_recordings_missing_directory(tmp_path):
    with pytest.raises(DataIOError):
        find_recordings(tmp_path / "absent")


def test_read_lines_for_recording_by_tag(tmp_path):
    line = LineFile.from_arrays(np.array([T0.timestamp()]), np.array([2.0]))
    write_evl(line, tmp_path / "a.air.evl")
    write_evl(line, tmp_path / "a.air.model.evl")
    paths = RecordingPaths(name="a", directory=str(tmp_path))
    assert set(read_lines_for_recording(paths)) == {"air"}
    assert set(read_lines_for_recording(paths, "model")) == {"air"}
    assert read_lines_for_recording(paths, "other") == {}
