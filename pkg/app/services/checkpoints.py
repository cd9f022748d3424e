"""
Checkpoint archive: parameters keyed by hierarchical names, model config,
and the preprocessing statistics used at train time
"""
import logging
from pathlib import Path
from typing import Optional, Union

import torch
import torch.nn as nn

from app.errors import CheckpointMismatchError
from app.models.dataset import Normalization
from app.models.network import ModelConfig
from app.networks.registry import build_model


logger = logging.getLogger(__name__)

CHECKPOINT_SCHEMA_VERSION = 1


def save_checkpoint(
    path: Union[str, Path],
    model: nn.Module,
    config: ModelConfig,
    normalization: Normalization,
    metadata: Optional[dict] = None,
) -> Path:
    """
    Write a versioned checkpoint archive.

    Args:
        path: Destination file
        model: Model whose state_dict is stored
        config: ModelConfig the model was built from
        normalization: Train-split statistics
        metadata: Free-form provenance (epoch, val MAE, config hash)

    Returns:
        Path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    state = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "model_config": config.model_dump(mode="json"),
        "normalization": normalization.model_dump(mode="json"),
        "state_dict": {k: v.detach().cpu() for k, v in model.state_dict().items()},
        "metadata": metadata or {},
    }
    torch.save(state, path)
    return path


def read_checkpoint(path: Union[str, Path]) -> dict:
    """Load the raw archive and check its schema version"""
    try:
        state = torch.load(Path(path), map_location="cpu", weights_only=False)
    except FileNotFoundError:
        raise
    except Exception as e:
        raise CheckpointMismatchError(f"Unreadable checkpoint {path}: {e}") from e

    version = state.get("schema_version") if isinstance(state, dict) else None
    if version != CHECKPOINT_SCHEMA_VERSION:
        raise CheckpointMismatchError(
            f"Checkpoint {path} has schema version {version}, expected {CHECKPOINT_SCHEMA_VERSION}"
        )
    return state


def load_checkpoint(
    path: Union[str, Path],
    expected_config: Optional[ModelConfig] = None,
) -> tuple[nn.Module, ModelConfig, Normalization, dict]:
    """
    Rebuild a model from a checkpoint.

    Args:
        path: Checkpoint file
        expected_config: When given, the stored config must match it

    Returns:
        Tuple of (model in eval mode, ModelConfig, Normalization, metadata)
    """
    state = read_checkpoint(path)
    config = ModelConfig.model_validate(state["model_config"])
    if expected_config is not None and expected_config.config_hash() != config.config_hash():
        raise CheckpointMismatchError(
            f"Checkpoint config {config.config_hash()} does not match expected "
            f"{expected_config.config_hash()}"
        )

    model = build_model(config)
    try:
        model.load_state_dict(state["state_dict"], strict=True)
    except RuntimeError as e:
        raise CheckpointMismatchError(f"Checkpoint parameters do not fit {config.architecture}: {e}") from e

    model.eval()
    normalization = Normalization.model_validate(state["normalization"])
    return model, config, normalization, state.get("metadata", {})
