import numpy as np
import pytest

from models.echogram import Orientation
from models.evaluation import DatasetMode, FileStats
from models.inference import InferenceConfig
from models.network import ModelConfig, ModelVariant
from models.synth import SynthConfig
from models.training import DatasetSpec, TrainConfig
from services.baseline import BaselineAlgorithm, baseline_csv
from services.formats.shards import write_shards
from services.inference import annotate_csv, load_model
from services.metrics import evaluate_corpus, wilcoxon_compare
from services.preprocessing import load_corpus_recording
from services.synth import generate_corpus
from services.trainer import train_model

pytestmark = pytest.mark.slow

N_PINGS = 256


def _air_mae(files: list[FileStats]) -> np.ndarray:
    return np.array([np.mean(f.line_errors["air"]) for f in files], dtype=float)


def _overall_iou(files: list[FileStats]) -> np.ndarray:
    return np.array([f.iou("overall") for f in files], dtype=float)


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    work = tmp_path_factory.mktemp("benchmark")
    corpus = generate_corpus(SynthConfig(seed=0, n_pings=N_PINGS), 10, work / "train")
    for paths in corpus:
        echogram, targets = load_corpus_recording(paths)
        write_shards(echogram, targets, work / "shards" / paths.name, source_id=paths.name)
    config = TrainConfig(
        epochs=40,
        batch_size=4,
        seed=0,
        datasets=[DatasetSpec(name="synthetic", path=str(work / "shards"))],
    )
    train_model(config, ModelConfig.for_variant(ModelVariant.BIFACING, width=8), work / "model")
    return work / "model" / "cycle00"


def test_model_beats_threshold_offset(checkpoint, tmp_path):
    test_dir, predictions = tmp_path / "test", tmp_path / "predictions"
    recordings = generate_corpus(SynthConfig(seed=10_000, n_pings=N_PINGS), 12, test_dir)
    model, manifest = load_model(checkpoint)
    for paths in recordings:
        annotate_csv(paths.raw_csv, model, predictions, Orientation.DOWNFACING, InferenceConfig(), manifest.model_id)
        baseline_csv(paths.raw_csv, predictions, Orientation.DOWNFACING)

    _, ours = evaluate_corpus(test_dir, predictions, tag=manifest.model_id, mode=DatasetMode.PER_FILE)
    _, theirs = evaluate_corpus(
        test_dir, predictions, tag=BaselineAlgorithm.THRESHOLD_OFFSET.value, mode=DatasetMode.PER_FILE
    )

    assert _air_mae(ours).mean() < _air_mae(theirs).mean()
    assert _overall_iou(ours).mean() > _overall_iou(theirs).mean()
    assert wilcoxon_compare(_air_mae(ours), _air_mae(theirs)).p_value < 0.05


def test_zoom_is_no_worse_than_a_single_pass(checkpoint, tmp_path):
    test_dir = tmp_path / "zoom"
    recordings = generate_corpus(
        SynthConfig(seed=20_000, n_pings=N_PINGS, empty_range_fraction=0.6), 10, test_dir
    )
    model, manifest = load_model(checkpoint)
    maes = {}
    for label, threshold in (("single", 1.0), ("zoom", 0.0)):
        out = tmp_path / label
        for paths in recordings:
            annotate_csv(
                paths.raw_csv, model, out, Orientation.DOWNFACING,
                InferenceConfig(autozoom_threshold=threshold), manifest.model_id,
            )
        _, files = evaluate_corpus(test_dir, out, tag=manifest.model_id)
        maes[label] = _air_mae(files)

    assert np.mean(maes["zoom"] <= maes["single"]) >= 0.8
