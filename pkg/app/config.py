"""
Configuration settings for the WCamNet toolkit
Layered as: YAML config file < .env file < WCAMNET_* environment < command-line overrides
"""
from functools import lru_cache
from pathlib import Path
from typing import Optional, Literal

import yaml
from pydantic import BaseModel, Field
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    YamlConfigSettingsSource,
)


class IngestionSettings(BaseModel):
    """Roadside data service client and collection schedule"""
    base_url: str = "http://127.0.0.1:8000"
    token: Optional[str] = None
    station_pairs_file: Optional[Path] = None
    cadence_minutes: float = 20.0
    duration_minutes: float = 60.0
    max_separation_km: float = 1.5
    max_concurrency: int = Field(default=4, ge=1)
    min_spacing_seconds: float = Field(default=0.25, ge=0.0)
    retry_attempts: int = Field(default=3, ge=1)
    backoff_factor: float = Field(default=0.5, ge=0.0)
    timeout_seconds: float = 10.0
    simulator_fixture_dir: Optional[Path] = None


class DatasetSettings(BaseModel):
    """Dataset construction: pairing, balancing, splitting, preprocessing"""
    archive_dir: Optional[Path] = None
    manifest_path: Optional[Path] = None
    tolerance_minutes: float = 10.0
    n_bins: int = Field(default=10, ge=2)
    target_size: Optional[int] = None
    split_fractions: tuple[float, float, float] = (0.50, 0.15, 0.35)
    image_size: int = 602
    num_workers: int = Field(default=0, ge=0)


class SyntheticSettings(BaseModel):
    """Procedural roadside benchmark"""
    enabled: bool = False
    n: int = 500
    stations: int = 10
    width: int = 1280
    height: int = 720
    skew: bool = False
    mask_road: bool = False
    workers: int = Field(default=1, ge=1)


class TrainingSettings(BaseModel):
    """Training protocol and grid search"""
    model: str = "wcamnet"
    epochs: Optional[int] = None
    batch_size: int = Field(default=16, ge=1)
    base_lr: float = Field(default=0.01, gt=0)
    weight_decay: float = Field(default=1e-4, ge=0)
    momentum: float = 0.9
    augment: bool = True
    grid_base_lrs: list[float] = [1e-3, 1e-2, 1e-1]
    grid_weight_decays: list[float] = [1e-5, 1e-4, 1e-3]
    grid_epochs: Optional[int] = None


class EvaluationSettings(BaseModel):
    """Evaluation, benchmark, ablation and visualisation"""
    checkpoint: Optional[Path] = None
    split: Literal["train", "val", "test"] = "test"
    benchmark_models: list[str] = [
        "wcamnet",
        "resnet50-style",
        "resnet152-style",
        "vgg19-style",
        "backbone-linear-head",
        "vit-full-finetune",
    ]
    ablation_seeds: list[int] = [0, 1, 2]
    image: Optional[Path] = None
    upscale: int = Field(default=8, ge=1)


class Settings(BaseSettings):
    """Application settings loaded from config file, environment and overrides"""

    model_config = SettingsConfigDict(
        env_prefix="WCAMNET_",
        env_nested_delimiter="__",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Run settings
    seed: int = 0
    output_dir: Path = Path("runs/default")
    tiny_backbone: bool = False
    debug: bool = False

    ingestion: IngestionSettings = IngestionSettings()
    dataset: DatasetSettings = DatasetSettings()
    synthetic: SyntheticSettings = SyntheticSettings()
    training: TrainingSettings = TrainingSettings()
    evaluation: EvaluationSettings = EvaluationSettings()

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        # First source wins: overrides, then env, then .env, then the YAML file
        return (
            init_settings,
            env_settings,
            dotenv_settings,
            YamlConfigSettingsSource(settings_cls),
        )


def parse_overrides(overrides: list[str]) -> dict:
    """
    Turn dotted key=value strings into a nested dict.

    Args:
        overrides: e.g. ["training.batch_size=8", "seed=3"]

    Returns:
        Nested dict suitable as settings init kwargs
    """
    nested: dict = {}
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"Override must look like key=value, got: {item!r}")
        key, raw = item.split("=", 1)
        parts = [p for p in key.strip().split(".") if p]
        if not parts:
            raise ValueError(f"Empty override key in: {item!r}")
        target = nested
        for part in parts[:-1]:
            target = target.setdefault(part, {})
        target[parts[-1]] = yaml.safe_load(raw) if raw.strip() else None
    return nested


def load_settings(
    config_path: Optional[Path] = None,
    overrides: Optional[list[str]] = None,
) -> Settings:
    """
    Build layered settings for one CLI invocation.

    Args:
        config_path: Optional YAML config file (lowest precedence)
        overrides: Dotted key=value overrides (highest precedence)

    Returns:
        Resolved Settings instance
    """
    if config_path is not None and not Path(config_path).is_file():
        raise FileNotFoundError(f"Config file not found: {config_path}")

    class _LayeredSettings(Settings):
        model_config = SettingsConfigDict(yaml_file=config_path)

    return _LayeredSettings(**parse_overrides(overrides or []))


def dump_settings(settings: Settings) -> str:
    """Serialize resolved settings as YAML"""
    return yaml.safe_dump(settings.model_dump(mode="json"), sort_keys=True)


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance (defaults + environment)"""
    return Settings()
