import pytest

from cli.parser import dispatch
from cli.train_command import parse_dataset
from main import generate_shards_main, infer_main, train_main
from services.formats.corpus import find_recordings
from services.formats.evl import read_evl
from services.formats.shards import find_stores
from services.metrics import read_report

SMALL_CORPUS = ["--count", "2", "--n-pings", "150", "--depth-max", "20"]


@pytest.fixture
def corpus(tmp_path):
    directory = tmp_path / "corpus"
    assert dispatch(["--seed", "3", "--no-log-timestamps", "synth", str(directory), *SMALL_CORPUS]) == 0
    return directory


def test_no_arguments_is_a_usage_error():
    assert dispatch([]) == 2


def test_help_exits_cleanly():
    assert dispatch(["--help"]) == 0


def test_missing_input_is_an_io_failure(tmp_path):
    assert dispatch(["baseline", str(tmp_path / "absent.csv")]) == 1


def test_infer_without_a_model(tmp_path):
    assert dispatch(["infer", str(tmp_path)]) == 2


def test_non_positive_jobs():
    assert dispatch(["--jobs", "0", "synth", "unused"]) == 2


def test_invalid_environment_settings(monkeypatch):
    monkeypatch.setenv("ECHOSEG_JOBS", "zero")
    assert dispatch(["synth", "unused"]) == 2


def test_evaluating_targets_against_themselves(corpus):
    assert dispatch(["evaluate", str(corpus), "--per-file"]) == 0
    report = read_report(corpus / "report-targets")
    assert report.n_files == 2
    assert report.iou["overall"].value == pytest.approx(1.0)
    assert (corpus / "report-targets-files.csv").exists()
    assert len(find_recordings(corpus)) == 2


def test_baseline_then_evaluate(corpus, tmp_path):
    out = tmp_path / "baseline"
    assert dispatch(["baseline", str(corpus), "--output-dir", str(out)]) == 0
    assert (out / "synth000.air.threshold-offset.evl").exists()
    assert dispatch(["evaluate", str(corpus), str(out), "--tag", "threshold-offset"]) == 0
    assert (out / "report-threshold-offset.txt").exists()


def test_plots(corpus, tmp_path):
    assert dispatch([
        "plot", "echogram", str(corpus / "synth000.csv"),
        "--lines", str(corpus / "synth000.air.evl"),
        "--regions", str(corpus / "synth000.evr"),
        "--output", str(tmp_path / "echogram.png"),
    ]) == 0
    assert (tmp_path / "echogram.png").stat().st_size > 0

    assert dispatch(["evaluate", str(corpus)]) == 0
    assert dispatch(["plot", "cdf", str(corpus / "report-targets"), "--output", str(tmp_path / "cdf.png")]) == 0
    assert (tmp_path / "cdf.png").exists()


def test_parse_dataset():
    spec = parse_dataset("mobile=/data/shards:3")
    assert (spec.name, spec.path, spec.upsample) == ("mobile", "/data/shards", 3)
    assert parse_dataset("stationary=C:/shards").path == "C:/shards"


def test_shards_train_annotate(corpus, tmp_path):
    shards = tmp_path / "shards"
    model = tmp_path / "model"
    predictions = tmp_path / "predictions"

    assert dispatch(["shards", str(corpus), str(shards)]) == 0
    assert len(find_stores(shards)) == 2

    assert dispatch([
        "train", "--dataset", f"synthetic={shards}", "--output", str(model),
        "--width", "4", "--model-depth", "2", "--epochs", "1", "--batch-size", "2", "--steps-per-epoch", "1",
    ]) == 0
    assert (model / "cycle00").is_dir()

    assert dispatch([
        "annotate", str(corpus), "--model", str(model / "cycle00"),
        "--output-dir", str(predictions), "--no-autozoom",
    ]) == 0
    air = read_evl(predictions / "synth000.air.model-cycle00.evl")
    assert len(air.points) == 150
    assert (predictions / "synth001.model-cycle00.evr").exists()

    assert dispatch([
        "evaluate", str(corpus), str(predictions), "--tag", "model-cycle00",
        "--report", str(tmp_path / "default-offset"),
    ]) == 0
    assert dispatch([
        "evaluate", str(corpus), str(predictions), "--tag", "model-cycle00", "--line-offset", "1.0",
        "--report", str(tmp_path / "infer-offset"),
    ]) == 0
    default, explicit = read_report(tmp_path / "default-offset"), read_report(tmp_path / "infer-offset")
    assert default.iou["overall"].value == pytest.approx(explicit.iou["overall"].value)
    assert default.iou["air"].value == pytest.approx(explicit.iou["air"].value)


def test_single_command_entry_points(corpus, tmp_path):
    assert train_main(["--help"]) == 0
    assert infer_main([str(tmp_path)]) == 2
    assert generate_shards_main([str(corpus), str(tmp_path / "shards"), "--jobs", "1"]) == 0
    assert len(find_stores(tmp_path / "shards")) == 2
