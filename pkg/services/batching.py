"""
Batching Service
Enumerates shard stores and assembles orientation-stratified epochs
"""

import logging
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from constants.messages import ErrorMessages
from core.exceptions import EmptyDatasetError
from models.echogram import Orientation
from models.training import DatasetSpec, IndexedDataset, ShardRef
from services.formats.shards import find_stores, read_manifest

logger = logging.getLogger(__name__)


def index_dataset(spec: DatasetSpec) -> IndexedDataset:
    """
    List every shard of every store under a dataset directory.

    Raises:
        EmptyDatasetError: If the directory holds no shards
    """
    shards = []
    for store in find_stores(spec.path):
        manifest = read_manifest(store)
        shards.extend(
            ShardRef(store=str(store), index=index, orientation=manifest.orientation)
            for index in range(manifest.n_shards)
        )
    if not shards:
        raise EmptyDatasetError(ErrorMessages.EMPTY_DATASET.format(name=spec.name))
    logger.info(f"Indexed {len(shards)} shards in dataset {spec.name} ({Path(spec.path)})")
    return IndexedDataset(name=spec.name, shards=shards, upsample=spec.upsample)


def epoch_pool(datasets: Sequence[IndexedDataset]) -> list[ShardRef]:
    """Every shard drawn in one epoch; upsampled datasets appear several times."""
    pool = []
    for dataset in datasets:
        if not dataset.shards:
            raise EmptyDatasetError(ErrorMessages.EMPTY_DATASET.format(name=dataset.name))
        pool.extend(dataset.shards * dataset.upsample)
    return pool


def make_epoch_batches(
    datasets: Sequence[IndexedDataset],
    rng: np.random.Generator,
    batch_size: int = 12,
) -> list[list[ShardRef]]:
    """
    Shuffle an epoch into batches with a constant orientation ratio.

    Downfacing and upfacing shards are shuffled separately. Batch ``b`` takes as
    many downfacing shards as needed for the running total to equal the rounded
    downfacing share of the shards seen so far, so every full batch holds the
    epoch's downfacing/upfacing ratio up to rounding.

    Args:
        datasets: Indexed datasets
        rng: Random generator for the shuffle
        batch_size: Shards per batch (the last batch may be smaller)

    Returns:
        Batches of shard references

    Raises:
        EmptyDatasetError: If there are no datasets or one of them is empty
    """
    if not datasets:
        raise EmptyDatasetError(ErrorMessages.EMPTY_DATASET.format(name="<none>"))

    pool = epoch_pool(datasets)
    down = [ref for ref in pool if ref.orientation == Orientation.DOWNFACING]
    up = [ref for ref in pool if ref.orientation == Orientation.UPFACING]
    down = [down[i] for i in rng.permutation(len(down))]
    up = [up[i] for i in rng.permutation(len(up))]

    total = len(pool)
    down_share = len(down) / total
    n_batches = math.ceil(total / batch_size)

    batches = []
    down_taken = up_taken = 0
    for b in range(n_batches):
        seen = min((b + 1) * batch_size, total)
        size = seen - b * batch_size
        down_target = int(round(seen * down_share))
        n_down = down_target - down_taken
        n_up = size - n_down
        batch = down[down_taken:down_taken + n_down] + up[up_taken:up_taken + n_up]
        down_taken += n_down
        up_taken += n_up
        batches.append([batch[i] for i in rng.permutation(len(batch))])

    logger.debug(f"Epoch of {total} shards in {n_batches} batches ({len(down)} down, {len(up)} up)")
    return batches
