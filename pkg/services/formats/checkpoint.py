"""
Checkpoint Service

A checkpoint is a directory holding ``manifest.json`` (format version, model
config, tensor keys, shapes and dtypes) and ``params.f4``, every tensor of the
state dict flattened in manifest order as little-endian float32.
"""

import logging
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import torch

from constants.defaults import CHECKPOINT_FORMAT_VERSION
from constants.messages import ErrorMessages
from core.exceptions import CheckpointError, DataIOError
from models.formats import CheckpointManifest, TensorEntry
from models.network import ModelConfig

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
PAYLOAD_NAME = "params.f4"
PAYLOAD_DTYPE = np.dtype("<f4")


def save_checkpoint(
    state_dict: dict[str, torch.Tensor],
    config: ModelConfig,
    directory: Union[str, Path],
    model_id: Optional[str] = None,
    metadata: Optional[dict[str, Any]] = None,
) -> CheckpointManifest:
    """
    Write a state dict and its architecture to ``directory``.

    Args:
        state_dict: Parameters and buffers, e.g. ``model.state_dict()``
        config: Architecture the state dict belongs to
        directory: Output directory (created if missing)
        model_id: Identifier recorded in annotation provenance (defaults to the directory name)
        metadata: Free-form training provenance

    Returns:
        The manifest that was written
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    entries, chunks = [], []
    for key, tensor in state_dict.items():
        tensor = tensor.detach().cpu()
        entries.append(
            TensorEntry(key=key, shape=list(tensor.shape), dtype=str(tensor.dtype).removeprefix("torch."))
        )
        chunks.append(tensor.to(torch.float32).numpy().astype(PAYLOAD_DTYPE).ravel())

    manifest = CheckpointManifest(
        version=CHECKPOINT_FORMAT_VERSION,
        model_id=model_id or directory.name,
        network=config,
        tensors=entries,
        metadata=metadata or {},
    )
    payload = np.concatenate(chunks) if chunks else np.zeros(0, dtype=PAYLOAD_DTYPE)
    payload.astype(PAYLOAD_DTYPE).tofile(directory / PAYLOAD_NAME)
    (directory / MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2))
    logger.info(f"Saved checkpoint {directory} ({payload.size} values)")
    return manifest


def load_checkpoint(
    directory: Union[str, Path],
) -> tuple[CheckpointManifest, dict[str, torch.Tensor]]:
    """
    Read a checkpoint written by :func:`save_checkpoint`.

    Returns:
        The manifest and the state dict, each tensor cast back to its recorded dtype

    Raises:
        DataIOError: If the checkpoint does not exist
        CheckpointError: If the version is unknown or the payload size disagrees
            with the manifest
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DataIOError(
            ErrorMessages.INPUT_NOT_FOUND.format(path=manifest_path), details={"path": str(directory)}
        )

    manifest = CheckpointManifest.model_validate_json(manifest_path.read_text())
    if manifest.version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {manifest.version}")

    payload = np.fromfile(directory / PAYLOAD_NAME, dtype=PAYLOAD_DTYPE)
    expected = sum(int(np.prod(entry.shape, dtype=np.int64)) for entry in manifest.tensors)
    if payload.size != expected:
        raise CheckpointError(
            ErrorMessages.CHECKPOINT_MISMATCH,
            details={"expected": expected, "found": int(payload.size)},
        )

    state_dict, offset = {}, 0
    for entry in manifest.tensors:
        size = int(np.prod(entry.shape, dtype=np.int64))
        values = torch.from_numpy(payload[offset:offset + size].astype(np.float32).copy())
        state_dict[entry.key] = values.reshape(entry.shape).to(getattr(torch, entry.dtype))
        offset += size
    return manifest, state_dict
