"""
Benchmark and ablation drivers
Each row trains with its architecture's recipe and is scored on the test split.
"""
import logging
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from app.models.dataset import DatasetManifest
from app.models.evaluation import REFERENCE_ABLATIONS, REFERENCE_BENCHMARK, ComparisonTable, MetricsReport, TableRow
from app.models.network import BackboneSpec, ModelConfig
from app.networks.registry import count_parameters
from app.services.checkpoints import load_checkpoint
from app.services.evaluator import evaluate
from app.services.recipes import model_config_for, train_config_for
from app.services.trainer import train


logger = logging.getLogger(__name__)

ABLATION_ROWS = ("base", "large-backbone", "no-se", "no-hd")


@dataclass(frozen=True)
class ExperimentOptions:
    """Training settings shared by every row"""
    epochs: Optional[int] = None
    batch_size: int = 16
    base_lr: float = 0.01
    weight_decay: float = 1e-4
    augment: bool = True
    num_workers: int = 0


def _train_and_score(
    model_config: ModelConfig,
    seed: int,
    manifest: DatasetManifest,
    manifest_path: Union[str, Path],
    run_dir: Path,
    options: ExperimentOptions,
) -> tuple[MetricsReport, int, int]:
    config = train_config_for(
        model_config,
        seed=seed,
        epochs=options.epochs,
        batch_size=options.batch_size,
        base_lr=options.base_lr,
        weight_decay=options.weight_decay,
        augment=options.augment,
        num_workers=options.num_workers,
    )
    report = train(config, manifest, manifest_path, run_dir)
    metrics = evaluate(report.checkpoint_path, manifest, manifest_path, "test", options.batch_size)
    model, _, _, _ = load_checkpoint(report.checkpoint_path)
    return metrics, count_parameters(model), count_parameters(model, trainable_only=True)


def _row(name: str, runs: list[tuple[MetricsReport, int, int]], reference: Optional[tuple[float, float]]) -> TableRow:
    maes = [m.mae for m, _, _ in runs]
    rmses = [m.rmse for m, _, _ in runs]
    return TableRow(
        name=name,
        mae=statistics.fmean(maes),
        rmse=statistics.fmean(rmses),
        mae_std=statistics.pstdev(maes) if len(runs) > 1 else None,
        rmse_std=statistics.pstdev(rmses) if len(runs) > 1 else None,
        runs=len(runs),
        parameters=runs[0][1],
        trainable_parameters=runs[0][2],
        reference_mae=reference[0] if reference else None,
        reference_rmse=reference[1] if reference else None,
    )


def _failed_row(name: str, error: Exception, reference: Optional[tuple[float, float]]) -> TableRow:
    logger.error(f"Row {name} failed: {type(error).__name__}: {error}")
    return TableRow(
        name=name,
        status="failed",
        error=f"{type(error).__name__}: {error}",
        reference_mae=reference[0] if reference else None,
        reference_rmse=reference[1] if reference else None,
    )


def run_benchmark(
    models: list[str],
    manifest: DatasetManifest,
    manifest_path: Union[str, Path],
    out_dir: Union[str, Path],
    image_size: int = 602,
    tiny_backbone: bool = False,
    seed: int = 0,
    options: ExperimentOptions = ExperimentOptions(),
) -> ComparisonTable:
    """
    Train and test every architecture; failed rows are kept and marked.

    Args:
        models: Registered architecture names, one row each
        manifest: Dataset manifest
        manifest_path: Manifest file
        out_dir: Each model trains into out_dir/<name>/
        image_size: Model input side
        tiny_backbone: Desk-scale backbone and CNN variants
        seed: Run seed
        options: Shared training settings

    Returns:
        ComparisonTable with one row per requested model, in order
    """
    out_dir = Path(out_dir)
    rows = []
    for name in models:
        reference = REFERENCE_BENCHMARK.get(name)
        try:
            model_config = model_config_for(name, image_size, tiny_backbone, seed)
            run = _train_and_score(model_config, seed, manifest, manifest_path, out_dir / name, options)
            rows.append(_row(name, [run], reference))
        except Exception as e:
            rows.append(_failed_row(name, e, reference))
    return ComparisonTable(title="Test-split accuracy by model", rows=rows)


def ablation_variants(base: ModelConfig) -> dict[str, ModelConfig]:
    """
    Base WCamNet and its three ablations. With the tiny backbone the larger
    backbone is a tiny backbone of twice the width.
    """
    if base.backbone.kind == "tiny-random-frozen":
        larger = BackboneSpec.tiny(embed_dim=2 * base.backbone.embed_dim, seed=base.backbone.seed)
    else:
        larger = BackboneSpec.large()
    return {
        "base": base,
        "large-backbone": base.model_copy(update={"backbone": larger}),
        "no-se": base.model_copy(update={"use_se_blocks": False}),
        "no-hd": base.model_copy(update={"use_hd_branch": False}),
    }


def run_ablations(
    base: ModelConfig,
    manifest: DatasetManifest,
    manifest_path: Union[str, Path],
    out_dir: Union[str, Path],
    seeds: list[int] = [0, 1, 2],
    options: ExperimentOptions = ExperimentOptions(),
) -> ComparisonTable:
    """
    Score the base model and each ablation, averaged over seeds.

    Args:
        base: Base WCamNet configuration
        manifest: Dataset manifest
        manifest_path: Manifest file
        out_dir: Runs go to out_dir/<variant>/seed_<k>/
        seeds: Training and head-initialization seeds
        options: Shared training settings

    Returns:
        ComparisonTable with rows base, large-backbone, no-se, no-hd
    """
    if base.architecture != "wcamnet":
        raise ValueError(f"Ablations start from a wcamnet config, got {base.architecture}")
    out_dir = Path(out_dir)
    rows = []
    for name, variant in ablation_variants(base).items():
        reference = REFERENCE_ABLATIONS.get(name)
        try:
            runs = [
                _train_and_score(
                    variant.model_copy(update={"init_seed": seed}),
                    seed, manifest, manifest_path, out_dir / name / f"seed_{seed}", options,
                )
                for seed in seeds
            ]
            rows.append(_row(name, runs, reference))
        except Exception as e:
            rows.append(_failed_row(name, e, reference))
    return ComparisonTable(title="WCamNet ablations", rows=rows)
