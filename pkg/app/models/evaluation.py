"""
Pydantic models for metrics and comparison tables
"""
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


# Published test-split results, kept as reference metadata only
REFERENCE_BENCHMARK = {
    "wcamnet": (0.150, 0.195),
    "resnet50-style": (0.184, 0.233),
    "resnet152-style": (0.201, 0.260),
    "vgg19-style": (0.166, 0.210),
    "backbone-linear-head": (0.172, 0.219),
    "vit-full-finetune": (0.183, 0.232),
}

REFERENCE_ABLATIONS = {
    "base": (0.150, 0.195),
    "large-backbone": (0.155, 0.197),
    "no-se": (0.167, 0.213),
    "no-hd": (0.170, 0.217),
}


class MetricsReport(BaseModel):
    """MAE/RMSE of one model on one split"""
    model_config = ConfigDict(protected_namespaces=())

    model_name: str
    mae: float = Field(..., ge=0.0)
    rmse: float = Field(..., ge=0.0)
    sample_count: int = Field(..., gt=0)
    split: str = "test"
    config_hash: str = ""

    @model_validator(mode="after")
    def _power_mean(self) -> "MetricsReport":
        # Tolerance covers float rounding when all errors are equal
        if self.rmse + 1e-12 < self.mae:
            raise ValueError(f"RMSE {self.rmse} < MAE {self.mae}")
        return self


class TableRow(BaseModel):
    """One row of a benchmark or ablation table"""
    name: str
    status: Literal["ok", "failed"] = "ok"
    mae: Optional[float] = None
    rmse: Optional[float] = None
    mae_std: Optional[float] = None
    rmse_std: Optional[float] = None
    runs: int = 0
    parameters: Optional[int] = None
    trainable_parameters: Optional[int] = None
    reference_mae: Optional[float] = None
    reference_rmse: Optional[float] = None
    error: Optional[str] = None


class ComparisonTable(BaseModel):
    """Benchmark or ablation table with best-per-column marking"""
    title: str
    rows: list[TableRow]

    def best(self, column: Literal["mae", "rmse"]) -> Optional[str]:
        """Name of the row with the lowest value in a column"""
        scored = [r for r in self.rows if r.status == "ok" and getattr(r, column) is not None]
        if not scored:
            return None
        return min(scored, key=lambda r: getattr(r, column)).name

    def row(self, name: str) -> TableRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)
