"""
Metrics and checkpoint evaluation
"""
import logging
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import torch
import torch.nn as nn
from torch.utils.data import DataLoader

from app.models.dataset import DatasetManifest, SplitName
from app.models.evaluation import MetricsReport
from app.services.checkpoints import load_checkpoint
from app.services.image_pipeline import FrictionImageDataset, build_loader, load_image, preprocess


logger = logging.getLogger(__name__)

ArrayLike = Union[Sequence[float], np.ndarray, torch.Tensor]


def _pair(preds: ArrayLike, targets: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(preds.detach().cpu() if isinstance(preds, torch.Tensor) else preds, dtype=np.float64).ravel()
    t = np.asarray(targets.detach().cpu() if isinstance(targets, torch.Tensor) else targets, dtype=np.float64).ravel()
    if p.size == 0 or t.size == 0:
        raise ValueError("Metrics need at least one prediction")
    if p.shape != t.shape:
        raise ValueError(f"Got {p.size} predictions for {t.size} targets")
    return p, t


def mae(preds: ArrayLike, targets: ArrayLike) -> float:
    """Mean absolute error"""
    p, t = _pair(preds, targets)
    return float(np.mean(np.abs(p - t)))


def rmse(preds: ArrayLike, targets: ArrayLike) -> float:
    """Root mean squared error"""
    p, t = _pair(preds, targets)
    return float(np.sqrt(np.mean((p - t) ** 2)))


@torch.no_grad()
def collect_predictions(model: nn.Module, loader: DataLoader) -> tuple[np.ndarray, np.ndarray]:
    """Run a model over a loader in eval mode; restores the previous mode"""
    was_training = model.training
    model.eval()
    preds, targets = [], []
    for images, labels in loader:
        preds.append(model(images).reshape(-1).double().numpy())
        targets.append(labels.reshape(-1).double().numpy())
    model.train(was_training)
    return np.concatenate(preds), np.concatenate(targets)


def evaluate(
    checkpoint: Union[str, Path],
    manifest: DatasetManifest,
    manifest_path: Union[str, Path],
    split: SplitName = "test",
    batch_size: int = 16,
) -> MetricsReport:
    """
    Deterministic evaluation of a checkpoint on one split (no augmentation).

    Args:
        checkpoint: Checkpoint written by training
        manifest: Dataset manifest
        manifest_path: Manifest file (image refs are relative to it)
        split: Split to score
        batch_size: Inference batch size

    Returns:
        MetricsReport carrying the checkpoint's config hash
    """
    model, config, _, _ = load_checkpoint(checkpoint)
    dataset = FrictionImageDataset(manifest, manifest_path, split, image_size=config.image_size)
    loader = build_loader(dataset, batch_size, shuffle=False)
    preds, targets = collect_predictions(model, loader)

    report = MetricsReport(
        model_name=config.architecture,
        mae=mae(preds, targets),
        rmse=rmse(preds, targets),
        sample_count=len(targets),
        split=split,
        config_hash=config.config_hash(),
    )
    logger.info(f"{report.model_name} on {split}: MAE {report.mae:.4f} RMSE {report.rmse:.4f} (n={report.sample_count})")
    return report


@torch.no_grad()
def predict(checkpoint: Union[str, Path], image_paths: Sequence[Union[str, Path]]) -> list[float]:
    """Friction factor predictions for image files"""
    model, config, normalization, _ = load_checkpoint(checkpoint)
    batch = torch.stack([
        preprocess(load_image(path), normalization, config.image_size) for path in image_paths
    ])
    return model(batch).reshape(-1).tolist()
