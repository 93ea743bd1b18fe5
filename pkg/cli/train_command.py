"""
Train Command
Trains a segmentation network on shard stores
"""

import argparse
import logging

from cli.common import add_jobs_and_seed
from config.settings import Settings
from core.exceptions import UsageError
from models.network import ModelConfig, ModelVariant
from models.training import DatasetSpec, TrainConfig
from services.trainer import train_model

logger = logging.getLogger(__name__)


def parse_dataset(text: str) -> DatasetSpec:
    """``NAME=PATH`` or ``NAME=PATH:UPSAMPLE``."""
    name, sep, rest = text.partition("=")
    if not sep or not name or not rest:
        raise argparse.ArgumentTypeError(f"expected NAME=PATH[:UPSAMPLE], got {text!r}")
    path, upsample = rest, 1
    head, _, tail = rest.rpartition(":")
    if head and tail.isdigit():
        path, upsample = head, int(tail)
    return DatasetSpec(name=name, path=path, upsample=upsample)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "train",
        help="Train a segmentation network",
        description="Train on one or more shard datasets, writing a checkpoint per cycle.",
    )
    parser.add_argument(
        "--dataset", action="append", type=parse_dataset, required=True, metavar="NAME=PATH[:UPSAMPLE]",
        help="Training dataset; repeat for several",
    )
    parser.add_argument(
        "--validation", action="append", type=parse_dataset, default=[], metavar="NAME=PATH",
        help="Validation dataset whose loss is logged each epoch",
    )
    parser.add_argument("--output", required=True, help="Checkpoint directory")
    parser.add_argument("--log", help="Training log path (default: <output>/train.log)")
    parser.add_argument(
        "--variant", choices=[v.value for v in ModelVariant], default=ModelVariant.BIFACING.value
    )
    parser.add_argument("--width", type=int, default=32, help="Backbone width")
    parser.add_argument("--model-depth", type=int, default=6, help="Encoder blocks")
    parser.add_argument("--epochs", type=int, default=100, help="Epochs of the first cycle")
    parser.add_argument("--cycles", type=int, default=1)
    parser.add_argument("--batch-size", type=int, default=12)
    parser.add_argument("--max-lr", type=float, default=0.012)
    parser.add_argument("--steps-per-epoch", type=int, help="Cap on steps per epoch")
    parser.add_argument("--no-augment", action="store_true", help="Disable augmentations")
    parser.add_argument("--device", help="Torch device (default from settings)")
    add_jobs_and_seed(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    names = [spec.name for spec in args.dataset]
    if len(set(names)) != len(names):
        raise UsageError(f"Dataset names must be unique: {names}")

    config = TrainConfig(
        batch_size=args.batch_size,
        max_lr=args.max_lr,
        epochs=args.epochs,
        cycles=args.cycles,
        steps_per_epoch=args.steps_per_epoch,
        augment=not args.no_augment,
        seed=args.seed,
        datasets=args.dataset,
    )
    model_config = ModelConfig.for_variant(ModelVariant(args.variant), width=args.width, depth=args.model_depth)
    logger.info(f"Training {args.variant} model (width {args.width}) on {', '.join(names)}")
    train_model(
        config,
        model_config,
        args.output,
        validation=args.validation,
        log_path=args.log,
        device=args.device or settings.device,
    )
    return 0
