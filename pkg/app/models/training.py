"""
Pydantic models for the training protocol
"""
import hashlib
import json
from typing import Literal, Optional

from pydantic import BaseModel, Field

from app.models.network import ModelConfig


class ScheduleSpec(BaseModel):
    """Learning-rate schedule"""
    kind: Literal["cosine-warm-restart", "step-decay"] = "cosine-warm-restart"
    period_epochs: int = Field(default=5, ge=1)
    step_epochs: int = Field(default=10, ge=1)
    decay_factor: float = Field(default=0.1, gt=0.0, lt=1.0)
    min_lr: float = Field(default=0.0, ge=0.0)

    @classmethod
    def cosine(cls, period_epochs: int = 5, min_lr: float = 0.0) -> "ScheduleSpec":
        return cls(kind="cosine-warm-restart", period_epochs=period_epochs, min_lr=min_lr)

    @classmethod
    def step(cls, step_epochs: int = 10, decay_factor: float = 0.1) -> "ScheduleSpec":
        return cls(kind="step-decay", step_epochs=step_epochs, decay_factor=decay_factor)


class TrainConfig(BaseModel):
    """Everything needed to reproduce one training run"""
    model: ModelConfig = ModelConfig()
    epochs: int = Field(default=15, ge=1)
    batch_size: int = Field(default=16, ge=1)
    base_lr: float = Field(default=0.01, gt=0.0)
    weight_decay: float = Field(default=1e-4, ge=0.0)
    momentum: float = 0.9
    schedule: ScheduleSpec = ScheduleSpec()
    seed: int = 0
    augment: bool = True
    num_workers: int = Field(default=0, ge=0)

    def config_hash(self) -> str:
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


class EpochStats(BaseModel):
    """Metrics recorded after one epoch"""
    epoch: int
    train_loss: float
    val_mae: float
    val_rmse: float
    lr_end: float


class RunReport(BaseModel):
    """Outcome of one training run"""
    config: TrainConfig
    config_hash: str
    epochs: list[EpochStats] = []
    lr_trace: list[float] = []
    lr_positions: list[float] = []
    wall_time_s: float = 0.0
    best_epoch: Optional[int] = None
    best_val_mae: Optional[float] = None
    checkpoint_path: Optional[str] = None
    selection: str = "best-val-mae"
    diverged: bool = False
    error: Optional[str] = None

    @property
    def train_losses(self) -> list[float]:
        return [e.train_loss for e in self.epochs]


class GridSearchResult(BaseModel):
    """All grid cells plus the selected configuration"""
    best: TrainConfig
    best_val_mae: float
    reports: list[RunReport]
