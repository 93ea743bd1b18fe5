"""
Benchmark the network against the classical baselines on synthetic recordings.

Generates a training corpus, shards it, trains a small model, then annotates a
held-out corpus with the model and with the baselines. Per-recording entrained-air
MAE and overall IoU are compared with a paired two-sided Wilcoxon signed-rank test.
A second held-out corpus with a large empty range compares single-pass inference
with zoom+repeat.

Usage:
    uv run python scripts/synthetic_benchmark.py [work_dir]
"""

import logging
import os
import sys
from pathlib import Path

import numpy as np
from dotenv import load_dotenv

from core.logging_config import configure_logging
from models.echogram import Orientation
from models.evaluation import DatasetMode, FileStats
from models.formats import RecordingPaths
from models.inference import InferenceConfig
from models.network import ModelConfig, ModelVariant
from models.synth import SynthConfig
from models.training import DatasetSpec, TrainConfig
from services.baseline import BaselineAlgorithm, baseline_csv
from services.formats.shards import write_shards
from services.inference import annotate_csv, load_model
from services.metrics import evaluate_corpus, wilcoxon_compare, write_report
from services.preprocessing import load_corpus_recording
from services.synth import generate_corpus
from services.trainer import train_model

# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

load_dotenv()

N_TRAIN = int(os.getenv("BENCH_TRAIN_RECORDINGS", "20"))
N_TEST = int(os.getenv("BENCH_TEST_RECORDINGS", "50"))
N_PINGS = int(os.getenv("BENCH_PINGS", "512"))
EPOCHS = int(os.getenv("BENCH_EPOCHS", "20"))
WIDTH = int(os.getenv("BENCH_WIDTH", "8"))
SEED = int(os.getenv("BENCH_SEED", "0"))
ZOOM_EMPTY_RANGE = 0.6
TEST_SEED_OFFSET = 10_000

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _metric(files: list[FileStats], name: str) -> np.ndarray:
    if name == "iou":
        return np.array([f.iou("overall") for f in files], dtype=float)
    return np.array([np.mean(f.line_errors["air"]) for f in files], dtype=float)


def _corpus(directory: Path, seed: int, count: int, **overrides) -> list[RecordingPaths]:
    config = SynthConfig(seed=seed, n_pings=N_PINGS, **overrides)
    return generate_corpus(config, count, directory)


def train(work: Path) -> Path:
    """Train on a fresh corpus; returns the final checkpoint directory."""
    corpus = _corpus(work / "train", SEED, N_TRAIN, passive_rate=2.0, bad_period_rate=2.0)
    for paths in corpus:
        echogram, targets = load_corpus_recording(paths)
        write_shards(echogram, targets, work / "shards" / paths.name, source_id=paths.name)

    config = TrainConfig(
        epochs=EPOCHS,
        batch_size=8,
        seed=SEED,
        datasets=[DatasetSpec(name="synthetic", path=str(work / "shards"))],
    )
    model_config = ModelConfig.for_variant(ModelVariant.BIFACING, width=WIDTH)
    train_model(config, model_config, work / "model")
    return work / "model" / "cycle00"


def compare_with_baseline(work: Path, checkpoint: Path) -> None:
    test_dir = work / "test"
    predictions = work / "predictions"
    recordings = _corpus(test_dir, SEED + TEST_SEED_OFFSET, N_TEST)
    model, manifest = load_model(checkpoint)
    inference = InferenceConfig()

    for paths in recordings:
        annotate_csv(paths.raw_csv, model, predictions, Orientation.DOWNFACING, inference, manifest.model_id)
        baseline_csv(paths.raw_csv, predictions, Orientation.DOWNFACING)

    tag = Path(manifest.model_id).name
    model_report, model_files = evaluate_corpus(
        test_dir, predictions, tag=tag, mode=DatasetMode.PER_FILE, line_offset=inference.line_offset
    )
    base_report, base_files = evaluate_corpus(
        test_dir, predictions, tag=BaselineAlgorithm.THRESHOLD_OFFSET.value, mode=DatasetMode.PER_FILE
    )
    write_report(model_report, work / "report-model")
    write_report(base_report, work / "report-baseline")

    for name in ("mae", "iou"):
        ours, theirs = _metric(model_files, name), _metric(base_files, name)
        test = wilcoxon_compare(ours, theirs)
        logger.info(
            f"{name}: model {np.mean(ours):.4f} vs threshold-offset {np.mean(theirs):.4f} "
            f"(p = {test.p_value:.3g}, {test.n_pairs} pairs)"
        )


def compare_zoom(work: Path, checkpoint: Path) -> None:
    test_dir = work / "zoom"
    recordings = _corpus(
        test_dir, SEED + 2 * TEST_SEED_OFFSET, N_TEST // 2, empty_range_fraction=ZOOM_EMPTY_RANGE
    )
    model, manifest = load_model(checkpoint)
    maes = {}
    for label, threshold in (("single", 1.0), ("zoom", 0.0)):
        config = InferenceConfig(autozoom_threshold=threshold)
        out = work / f"zoom-{label}"
        for paths in recordings:
            annotate_csv(paths.raw_csv, model, out, Orientation.DOWNFACING, config, manifest.model_id)
        _, files = evaluate_corpus(
            test_dir, out, tag=Path(manifest.model_id).name, line_offset=config.line_offset
        )
        maes[label] = _metric(files, "mae")

    better = float(np.mean(maes["zoom"] <= maes["single"]))
    logger.info(f"zoom+repeat no worse than a single pass on {better:.0%} of recordings")


def main() -> int:
    configure_logging("INFO")
    work = Path(sys.argv[1] if len(sys.argv) > 1 else "benchmark")
    work.mkdir(parents=True, exist_ok=True)
    checkpoint = train(work)
    compare_with_baseline(work, checkpoint)
    compare_zoom(work, checkpoint)
    return 0


if __name__ == "__main__":
    sys.exit(main())
