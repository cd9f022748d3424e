"""
Training loop, learning-rate schedules and grid search
"""
import logging
import math
import time
from pathlib import Path
from typing import Optional, Sequence, Union

import torch
import torch.nn as nn

from app.errors import ConfigError, GridSearchError, ShapeError, TrainingDivergedError
from app.models.dataset import DatasetManifest
from app.models.training import EpochStats, GridSearchResult, RunReport, ScheduleSpec, TrainConfig
from app.networks.registry import build_model, trainable_parameters
from app.services.checkpoints import save_checkpoint
from app.services.evaluator import collect_predictions, mae, rmse
from app.services.image_pipeline import AugmentParams, FrictionImageDataset, build_loader


logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "best.pt"
REPORT_NAME = "run_report.json"


def mse_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean squared error over a batch of scalar predictions"""
    if pred.shape != target.shape:
        raise ShapeError(f"Prediction shape {tuple(pred.shape)} != target shape {tuple(target.shape)}")
    if pred.numel() == 0:
        raise ShapeError("Cannot compute a loss over an empty batch")
    return torch.mean((pred - target) ** 2)


# ============ Schedules ============

def lr_at(schedule: ScheduleSpec, epoch: float, base_lr: float) -> float:
    """
    Closed-form learning rate at a (possibly fractional) epoch.

    Cosine with warm restarts anneals from base_lr to min_lr over each period and jumps
    back to base_lr at every multiple of the period. Step decay multiplies by
    decay_factor every step_epochs.
    """
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    if schedule.kind == "cosine-warm-restart":
        period = schedule.period_epochs
        t = math.fmod(epoch, period)
        return schedule.min_lr + (base_lr - schedule.min_lr) * (1 + math.cos(math.pi * t / period)) / 2
    return base_lr * schedule.decay_factor ** math.floor(epoch / schedule.step_epochs)


class ScheduleDriver:
    """Sets optimizer learning rates from lr_at and records every update"""

    def __init__(self, optimizer: torch.optim.Optimizer, schedule: ScheduleSpec, base_lr: float):
        self.optimizer = optimizer
        self.schedule = schedule
        self.base_lr = base_lr
        self.trace: list[float] = []
        self.positions: list[float] = []

    @property
    def per_iteration(self) -> bool:
        return self.schedule.kind == "cosine-warm-restart"

    def apply(self, position: float) -> float:
        lr = lr_at(self.schedule, position, self.base_lr)
        for group in self.optimizer.param_groups:
            group["lr"] = lr
        self.trace.append(lr)
        self.positions.append(position)
        return lr


def build_optimizer(model: nn.Module, config: TrainConfig) -> torch.optim.SGD:
    """SGD with momentum and weight decay over trainable parameters only"""
    params = trainable_parameters(model)
    if not params:
        raise ConfigError(f"{config.model.architecture} has no trainable parameters")
    return torch.optim.SGD(
        params,
        lr=config.base_lr,
        momentum=config.momentum,
        weight_decay=config.weight_decay,
    )


def _diagnostics(epoch: int, iteration: int, lr: float, images, labels, pred) -> dict:
    return {
        "epoch": epoch,
        "iteration": iteration,
        "lr": lr,
        "image_mean": float(images.mean()),
        "image_std": float(images.std()),
        "label_mean": float(labels.mean()),
        "pred_min": float(pred.min()) if torch.isfinite(pred).all() else float("nan"),
        "pred_max": float(pred.max()) if torch.isfinite(pred).all() else float("nan"),
    }


# ============ Training ============

def train(
    config: TrainConfig,
    manifest: DatasetManifest,
    manifest_path: Union[str, Path],
    out_dir: Union[str, Path],
    model: Optional[nn.Module] = None,
) -> RunReport:
    """
    Train one model and keep the checkpoint with the best validation MAE.

    Args:
        config: Training configuration
        manifest: Dataset manifest with train and val splits
        manifest_path: Manifest file (image refs are relative to it)
        out_dir: Receives best.pt and run_report.json
        model: Pre-built model (built from config.model when None)

    Returns:
        RunReport with per-epoch metrics and the learning-rate trace
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(config.seed)
    started = time.perf_counter()

    # 1. Data
    image_size = config.model.image_size
    train_set = FrictionImageDataset(
        manifest, manifest_path, "train",
        train=config.augment,
        augment_params=AugmentParams() if config.augment else None,
        seed=config.seed,
        image_size=image_size,
    )
    val_set = FrictionImageDataset(manifest, manifest_path, "val", image_size=image_size)
    train_loader = build_loader(train_set, config.batch_size, shuffle=True, seed=config.seed, num_workers=config.num_workers)
    val_loader = build_loader(val_set, config.batch_size, shuffle=False, num_workers=config.num_workers)

    # 2. Model, optimizer, schedule
    model = model if model is not None else build_model(config.model)
    optimizer = build_optimizer(model, config)
    driver = ScheduleDriver(optimizer, config.schedule, config.base_lr)
    steps_per_epoch = len(train_loader)

    report = RunReport(config=config, config_hash=config.config_hash())
    checkpoint_path = out_dir / CHECKPOINT_NAME
    logger.info(
        f"Training {config.model.architecture} for {config.epochs} epochs "
        f"({len(train_set)} train / {len(val_set)} val, lr {config.base_lr}, wd {config.weight_decay})"
    )

    # 3. Epochs
    for epoch in range(config.epochs):
        train_set.set_epoch(epoch)
        model.train()
        if not driver.per_iteration:
            driver.apply(float(epoch))

        loss_sum, seen = 0.0, 0
        for iteration, (images, labels) in enumerate(train_loader):
            if driver.per_iteration:
                driver.apply(epoch + iteration / steps_per_epoch)
            optimizer.zero_grad(set_to_none=True)
            pred = model(images)
            loss = mse_loss(pred, labels)
            if not torch.isfinite(loss):
                diagnostics = _diagnostics(epoch, iteration, driver.trace[-1], images, labels, pred)
                raise TrainingDivergedError(f"Non-finite loss {loss.item()}", diagnostics)
            loss.backward()
            optimizer.step()
            loss_sum += loss.item() * labels.numel()
            seen += labels.numel()

        preds, targets = collect_predictions(model, val_loader)
        stats = EpochStats(
            epoch=epoch,
            train_loss=loss_sum / seen,
            val_mae=mae(preds, targets),
            val_rmse=rmse(preds, targets),
            lr_end=driver.trace[-1],
        )
        report.epochs.append(stats)
        logger.info(
            f"epoch {epoch + 1}/{config.epochs}: loss {stats.train_loss:.5f} "
            f"val MAE {stats.val_mae:.4f} RMSE {stats.val_rmse:.4f}"
        )

        if report.best_val_mae is None or stats.val_mae < report.best_val_mae:
            report.best_val_mae = stats.val_mae
            report.best_epoch = epoch
            save_checkpoint(
                checkpoint_path,
                model,
                config.model,
                manifest.normalization,
                metadata={"epoch": epoch, "val_mae": stats.val_mae, "train_config_hash": report.config_hash},
            )

    report.lr_trace = driver.trace
    report.lr_positions = driver.positions
    report.checkpoint_path = str(checkpoint_path)
    report.wall_time_s = time.perf_counter() - started
    (out_dir / REPORT_NAME).write_text(report.model_dump_json(indent=2), encoding="utf-8")
    return report


def _cell_dir(out_dir: Path, base_lr: float, weight_decay: float) -> Path:
    return out_dir / f"cell_{base_lr:g}_{weight_decay:g}"


def grid_search(
    base_lrs: Sequence[float],
    weight_decays: Sequence[float],
    config: TrainConfig,
    manifest: DatasetManifest,
    manifest_path: Union[str, Path],
    out_dir: Union[str, Path],
    epochs: Optional[int] = None,
) -> GridSearchResult:
    """
    Train every (base_lr, weight_decay) cell and pick the lowest validation MAE.
    Ties go to the lower base_lr, then the lower weight_decay.

    Args:
        base_lrs: Learning rates to try
        weight_decays: Weight decays to try
        config: Template configuration for every cell
        manifest: Dataset manifest
        manifest_path: Manifest file
        out_dir: Each cell writes into cell_<lr>_<wd>/
        epochs: Shortened epoch count per cell (recipe epochs when None)

    Returns:
        GridSearchResult with the winning TrainConfig and every cell's report
    """
    if not base_lrs or not weight_decays:
        raise ValueError("Grid search needs at least one base_lr and one weight_decay")
    out_dir = Path(out_dir)

    reports: list[RunReport] = []
    for base_lr in base_lrs:
        for weight_decay in weight_decays:
            cell = config.model_copy(update={
                "base_lr": base_lr,
                "weight_decay": weight_decay,
                "epochs": epochs or config.epochs,
            })
            try:
                report = train(cell, manifest, manifest_path, _cell_dir(out_dir, base_lr, weight_decay))
            except TrainingDivergedError as e:
                logger.warning(f"Cell lr={base_lr:g} wd={weight_decay:g} diverged: {e}")
                report = RunReport(config=cell, config_hash=cell.config_hash(), diverged=True, error=str(e))
            reports.append(report)

    finished = [r for r in reports if not r.diverged and r.best_val_mae is not None]
    if not finished:
        raise GridSearchError(f"All {len(reports)} grid cells failed", reports)

    winner = min(finished, key=lambda r: (r.best_val_mae, r.config.base_lr, r.config.weight_decay))
    result = GridSearchResult(best=winner.config, best_val_mae=winner.best_val_mae, reports=reports)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "grid_search.json").write_text(result.model_dump_json(indent=2), encoding="utf-8")
    logger.info(
        f"Grid search picked lr={winner.config.base_lr:g} wd={winner.config.weight_decay:g} "
        f"(val MAE {winner.best_val_mae:.4f})"
    )
    return result
