from collections import Counter

import numpy as np
import pytest

from core.exceptions import EmptyDatasetError
from models.echogram import Orientation
from models.training import DatasetSpec, IndexedDataset, ShardRef
from services.batching import epoch_pool, index_dataset, make_epoch_batches
from services.formats.shards import write_shards
from services.synth import recording_targets


def _dataset(name: str, n_down: int, n_up: int, upsample: int = 1) -> IndexedDataset:
    shards = [ShardRef(store=f"{name}/down", index=i, orientation=Orientation.DOWNFACING) for i in range(n_down)]
    shards += [ShardRef(store=f"{name}/up", index=i, orientation=Orientation.UPFACING) for i in range(n_up)]
    return IndexedDataset(name=name, shards=shards, upsample=upsample)


def test_batches_hold_a_constant_orientation_ratio():
    batches = make_epoch_batches([_dataset("a", 8, 4)], np.random.default_rng(0), batch_size=6)
    assert [len(b) for b in batches] == [6, 6]
    for batch in batches:
        assert sum(ref.orientation == Orientation.DOWNFACING for ref in batch) == 4


def test_every_shard_is_drawn_once_per_epoch():
    batches = make_epoch_batches([_dataset("a", 7, 3), _dataset("b", 2, 0)], np.random.default_rng(1), batch_size=5)
    drawn = Counter((ref.store, ref.index) for batch in batches for ref in batch)
    assert len(drawn) == 12
    assert set(drawn.values()) == {1}
    assert [len(b) for b in batches] == [5, 5, 2]


def test_upsampled_dataset_appears_several_times():
    pool = epoch_pool([_dataset("a", 2, 0, upsample=3), _dataset("b", 1, 1)])
    assert len(pool) == 8


def test_shuffle_depends_on_seed():
    dataset = _dataset("a", 20, 10)
    first = make_epoch_batches([dataset], np.random.default_rng(4), batch_size=6)
    again = make_epoch_batches([dataset], np.random.default_rng(4), batch_size=6)
    other = make_epoch_batches([dataset], np.random.default_rng(5), batch_size=6)
    assert first == again
    assert first != other


def test_no_datasets():
    with pytest.raises(EmptyDatasetError):
        make_epoch_batches([], np.random.default_rng(0))


def test_empty_dataset_in_epoch():
    with pytest.raises(EmptyDatasetError):
        epoch_pool([_dataset("a", 1, 0), _dataset("empty", 0, 0)])


def test_index_dataset_lists_every_shard(tmp_path, downfacing_recording, upfacing_recording):
    for recording in (downfacing_recording, upfacing_recording):
        write_shards(recording.raw, recording_targets(recording), tmp_path / recording.name)
    dataset = index_dataset(DatasetSpec(name="synthetic", path=str(tmp_path)))
    assert len(dataset.shards) == 4
    assert Counter(ref.orientation for ref in dataset.shards) == {
        Orientation.DOWNFACING: 2,
        Orientation.UPFACING: 2,
    }


def test_index_empty_directory(tmp_path):
    with pytest.raises(EmptyDatasetError):
        index_dataset(DatasetSpec(name="nothing", path=str(tmp_path)))
