"""
Trainer Service
Training loop: shard datasets, multi-cycle schedule, step log and checkpoints

Each step writes one tab-separated ``key=value`` record to the training log. A
checkpoint is written at the end of every cycle. A step whose gradients are not
finite is skipped and logged with ``skipped=1``.
"""

import logging
import math
from pathlib import Path
from typing import Optional, Sequence, TextIO, Union

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset

from constants.defaults import INPUT_HEIGHT, INPUT_WIDTH
from constants.messages import SuccessMessages
from core.exceptions import ConfigurationError, NonFiniteGradientError
from models.echogram import Orientation
from models.network import ModelConfig
from models.training import DatasetSpec, IndexedDataset, ShardRef, TrainConfig, TrainingView
from nnet.unet import EchogramUNet
from services.augmentation import build_training_view, view_from_shard
from services.batching import epoch_pool, index_dataset, make_epoch_batches
from services.formats.checkpoint import save_checkpoint
from services.formats.shards import read_shard
from services.loss import composite_loss
from services.optimizer import Ranger
from services.schedule import apply_schedule, schedule_at

logger = logging.getLogger(__name__)

LINE_KEYS = ("air", "air_original", "seafloor", "seafloor_original", "surface")
FLAG_KEYS = ("surface_valid", "passive", "bad_period")
PATCH_KEYS = ("patches", "patches_original", "patches_mixed")


def view_to_tensors(view: TrainingView) -> dict[str, torch.Tensor]:
    """Tensors of one training view; the image gains a leading channel axis."""
    tensors = {"image": torch.from_numpy(np.ascontiguousarray(view.image))[None]}
    for key in LINE_KEYS:
        tensors[key] = torch.from_numpy(np.asarray(getattr(view, key), dtype=np.int64))
    for key in FLAG_KEYS + PATCH_KEYS:
        tensors[key] = torch.from_numpy(np.asarray(getattr(view, key), dtype=bool))
    tensors["upfacing"] = torch.tensor(view.orientation == Orientation.UPFACING)
    return tensors


class ShardViewDataset(Dataset):
    """
    Training views built from a list of shard references.

    Augmentations for item ``i`` are drawn from a generator seeded with
    ``(seed, epoch, i)``, so an epoch is reproducible regardless of load order.
    Views are rescaled to ``(width, height)``.
    """

    def __init__(
        self,
        shards: Sequence[ShardRef],
        augment: bool = True,
        seed: int = 0,
        width: int = INPUT_WIDTH,
        height: int = INPUT_HEIGHT,
    ):
        self.shards = list(shards)
        self.augment = augment
        self.seed = seed
        self.width = width
        self.height = height
        self.epoch = 0

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __len__(self) -> int:
        return len(self.shards)

    def __getitem__(self, index: int) -> dict[str, torch.Tensor]:
        ref = self.shards[index]
        view = view_from_shard(read_shard(ref.store, ref.index))
        rng = np.random.default_rng([self.seed, self.epoch, index])
        training = build_training_view(view, rng, self.augment, self.width, self.height)
        return view_to_tensors(training)


def _batch_loader(dataset: ShardViewDataset, batches: list[list[ShardRef]]) -> DataLoader:
    """Loader yielding ``batches`` in order from a dataset over their concatenation."""
    index_batches, start = [], 0
    for batch in batches:
        index_batches.append(list(range(start, start + len(batch))))
        start += len(batch)
    return DataLoader(dataset, batch_sampler=index_batches, num_workers=0)


class TrainingLog:
    """Line-oriented step log."""

    def __init__(self, handle: Optional[TextIO]):
        self.handle = handle

    def write(self, **fields) -> None:
        if self.handle is None:
            return
        cells = []
        for key, value in fields.items():
            cells.append(f"{key}={value:.6g}" if isinstance(value, float) else f"{key}={value}")
        self.handle.write("\t".join(cells) + "\n")
        self.handle.flush()


def _validation_loss(
    model: EchogramUNet,
    shards: Sequence[ShardRef],
    config: TrainConfig,
    device: torch.device,
) -> float:
    """Mean total loss over unaugmented views, with batch-norm in inference mode."""
    cfg = model.config
    dataset = ShardViewDataset(
        shards, augment=False, seed=config.seed, width=cfg.input_width, height=cfg.input_height
    )
    loader = DataLoader(dataset, batch_size=config.batch_size, shuffle=False)
    model.eval()
    totals, weights = [], []
    with torch.no_grad():
        for batch in loader:
            batch = {key: value.to(device) for key, value in batch.items()}
            breakdown = composite_loss(model(batch["image"]), batch, model.config)
            totals.append(float(breakdown.total))
            weights.append(len(batch["image"]))
    model.train()
    return float(np.average(totals, weights=weights))


def train_model(
    config: TrainConfig,
    model_config: ModelConfig,
    output_dir: Union[str, Path],
    validation: Optional[Sequence[DatasetSpec]] = None,
    log_path: Optional[Union[str, Path]] = None,
    device: str = "cpu",
) -> EchogramUNet:
    """
    Train a segmentation network.

    Args:
        config: Training hyperparameters, including the training datasets
        model_config: Architecture to train
        output_dir: Directory receiving one checkpoint per cycle
        validation: Datasets whose loss is logged at the end of every epoch
        log_path: Step log file (defaults to ``output_dir/train.log``)
        device: Torch device

    Returns:
        The trained model

    Raises:
        ConfigurationError: If no training dataset is configured
        EmptyDatasetError: If a dataset holds no shards
    """
    if not config.datasets:
        raise ConfigurationError("No training datasets configured")

    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    torch_device = torch.device(device)
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)

    datasets: list[IndexedDataset] = [index_dataset(spec) for spec in config.datasets]
    validation_shards = [
        ref for spec in (validation or []) for ref in index_dataset(spec).shards
    ]

    model = EchogramUNet(model_config).to(torch_device)
    model.train()
    optimizer = Ranger(
        model.parameters(),
        lr=0.0,
        betas=(config.beta1_max, config.beta2),
        weight_decay=config.weight_decay,
        k=config.lookahead_k,
        alpha=config.lookahead_alpha,
    )

    log_path = Path(log_path) if log_path else output_dir / "train.log"
    global_step = 0
    epoch_index = 0
    with log_path.open("w") as handle:
        log = TrainingLog(handle)
        for cycle in range(config.cycles):
            n_epochs = config.cycle_epochs(cycle)
            epoch_batches = math.ceil(len(epoch_pool(datasets)) / config.batch_size)
            steps_per_epoch = min(epoch_batches, config.steps_per_epoch or epoch_batches)
            total_steps = n_epochs * steps_per_epoch
            logger.info(
                f"Cycle {cycle}: {n_epochs} epochs x {steps_per_epoch} steps, "
                f"max lr {config.cycle_max_lr(cycle):.4g}"
            )

            for epoch in range(n_epochs):
                batches = make_epoch_batches(datasets, rng, config.batch_size)[:steps_per_epoch]
                dataset = ShardViewDataset(
                    [ref for batch in batches for ref in batch],
                    augment=config.augment,
                    seed=config.seed,
                    width=model_config.input_width,
                    height=model_config.input_height,
                )
                dataset.set_epoch(epoch_index)

                for step_in_epoch, batch in enumerate(_batch_loader(dataset, batches)):
                    step = epoch * steps_per_epoch + step_in_epoch
                    lr, beta1 = schedule_at(step, total_steps, cycle, config)
                    apply_schedule(optimizer, lr, beta1)

                    batch = {key: value.to(torch_device) for key, value in batch.items()}
                    optimizer.zero_grad(set_to_none=True)
                    breakdown = composite_loss(model(batch["image"]), batch, model_config)
                    breakdown.total.backward()
                    skipped = {}
                    try:
                        optimizer.step()
                    except NonFiniteGradientError as exc:
                        logger.warning(f"Step {global_step + 1} skipped: {exc.message} {exc.details}")
                        optimizer.zero_grad(set_to_none=True)
                        skipped = {"skipped": 1}

                    global_step += 1
                    log.write(
                        step=global_step,
                        cycle=cycle,
                        epoch=epoch_index,
                        lr=lr,
                        beta1=beta1,
                        **breakdown.as_floats(),
                        **skipped,
                    )

                if validation_shards:
                    val_loss = _validation_loss(model, validation_shards, config, torch_device)
                    log.write(step=global_step, epoch=epoch_index, validation=val_loss)
                    logger.info(f"Epoch {epoch_index}: validation loss {val_loss:.4f}")
                epoch_index += 1

            checkpoint_dir = output_dir / f"cycle{cycle:02d}"
            save_checkpoint(
                model.state_dict(),
                model_config,
                checkpoint_dir,
                model_id=f"{output_dir.name}-cycle{cycle:02d}",
                metadata={
                    "cycle": cycle,
                    "steps": global_step,
                    "seed": config.seed,
                    "datasets": [spec.name for spec in config.datasets],
                },
            )
            logger.info(SuccessMessages.CHECKPOINT_SAVED.format(path=checkpoint_dir))

    return model
