"""
WCamNet command line
Subcommands: ingest, build-dataset, train, gridsearch, eval, benchmark, ablate, viz, plot
Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure
"""
import argparse
import json
import logging
import sys
from datetime import timedelta
from pathlib import Path
from typing import Optional

import yaml
from pydantic import ValidationError

from app.config import Settings, dump_settings, load_settings
from app.errors import ConfigError, WCamNetError

logger = logging.getLogger("wcamnet")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

class UsageError(Exception):
    """Command-line arguments could not be parsed"""


class _Parser(argparse.ArgumentParser):
    """argparse parser that raises instead of exiting with status 2"""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: error: {message}")


def _banner(title: str) -> None:
    print("\n" + "=" * 60)
    print(title)
    print("=" * 60 + "\n")


def _csv(value: str) -> list[str]:
    return [part.strip() for part in value.split(",") if part.strip()]


# ============ Parser ============

def _common_flags() -> argparse.ArgumentParser:
    # SUPPRESS keeps a flag given before the subcommand from being reset by the subparser default
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", type=Path, help="YAML config file")
    common.add_argument("--seed", type=int, help="Run seed")
    common.add_argument("--output-dir", type=Path, help="Directory receiving every artifact of the run")
    common.add_argument("--tiny-backbone", action="store_true", help="Tiny random frozen backbone and tiny CNNs")
    common.add_argument("--dry-run", action="store_true", help="Print the plan and write nothing")
    common.add_argument("--debug", action="store_true", help="Debug logging")
    common.add_argument(
        "--set", dest="overrides", action="append", metavar="KEY=VALUE",
        help="Dotted settings override, e.g. training.batch_size=8 (repeatable)",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = _Parser(prog="wcamnet", description="Road friction estimation from roadside camera images", parents=[common])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    ingest = sub.add_parser("ingest", parents=[common], help="Collect images and sensor readings into an archive")
    ingest.add_argument("--pairs", type=Path, help="Station pair table (YAML)")
    ingest.add_argument("--base-url", help="Roadside data service URL")
    ingest.add_argument("--duration-minutes", type=float)
    ingest.add_argument("--cadence-minutes", type=float)

    build = sub.add_parser("build-dataset", parents=[common], help="Build a manifest from an archive or synthetic scenes")
    build.add_argument("--archive", type=Path, help="Archive directory")
    build.add_argument("--pairs", type=Path, help="Station pair table (YAML)")
    build.add_argument(
        "--synthetic", nargs="?", const="", metavar="n=200,stations=6",
        help="Generate a synthetic dataset instead (optional comma-separated settings)",
    )
    build.add_argument("--target-size", type=int, help="Weighted resampling target size")

    for name, help_text in (("train", "Train one model"), ("gridsearch", "Grid search base_lr x weight_decay")):
        cmd = sub.add_parser(name, parents=[common], help=help_text)
        cmd.add_argument("--model", help="Architecture name")
        cmd.add_argument("--manifest", type=Path, help="Dataset manifest")
        cmd.add_argument("--epochs", type=int, help="Epochs (per cell for gridsearch)")

    evaluate = sub.add_parser("eval", parents=[common], help="Evaluate a checkpoint on a split")
    evaluate.add_argument("--checkpoint", type=Path)
    evaluate.add_argument("--manifest", type=Path)
    evaluate.add_argument("--split", choices=["train", "val", "test"])

    benchmark = sub.add_parser("benchmark", parents=[common], help="Train and compare every architecture")
    benchmark.add_argument("--manifest", type=Path)
    benchmark.add_argument("--models", type=_csv, help="Comma-separated architecture names")
    benchmark.add_argument("--epochs", type=int, help="Epochs per model (recipe default when omitted)")

    ablate = sub.add_parser("ablate", parents=[common], help="WCamNet ablation table")
    ablate.add_argument("--manifest", type=Path)
    ablate.add_argument("--epochs", type=int)
    ablate.add_argument("--seeds", type=_csv, help="Comma-separated seeds")

    viz = sub.add_parser("viz", parents=[common], help="PCA rendering of backbone patch tokens")
    viz.add_argument("--image", type=Path, help="Input image")
    viz.add_argument("--checkpoint", type=Path, help="Take backbone and normalization from a checkpoint")
    viz.add_argument("--upscale", type=int)

    plot = sub.add_parser("plot", parents=[common], help="Friction histograms of a manifest")
    plot.add_argument("--manifest", type=Path)

    return parser


# Subcommand flag -> dotted settings key
FLAG_SETTINGS = {
    "seed": "seed",
    "output_dir": "output_dir",
    "tiny_backbone": "tiny_backbone",
    "debug": "debug",
    "pairs": "ingestion.station_pairs_file",
    "base_url": "ingestion.base_url",
    "duration_minutes": "ingestion.duration_minutes",
    "cadence_minutes": "ingestion.cadence_minutes",
    "archive": "dataset.archive_dir",
    "target_size": "dataset.target_size",
    "manifest": "dataset.manifest_path",
    "model": "training.model",
    "checkpoint": "evaluation.checkpoint",
    "split": "evaluation.split",
    "models": "evaluation.benchmark_models",
    "seeds": "evaluation.ablation_seeds",
    "image": "evaluation.image",
    "upscale": "evaluation.upscale",
}


def settings_overrides(args: argparse.Namespace) -> list[str]:
    """Translate parsed flags into dotted overrides, after the --set values"""
    overrides = list(getattr(args, "overrides", None) or [])
    for flag, key in FLAG_SETTINGS.items():
        if hasattr(args, flag) and getattr(args, flag) is not None:
            value = getattr(args, flag)
            if isinstance(value, list):
                value = "[" + ", ".join(str(v) for v in value) + "]"
            elif isinstance(value, bool):
                value = str(value).lower()
            overrides.append(f"{key}={value}")

    if hasattr(args, "epochs") and args.epochs is not None:
        key = "training.grid_epochs" if args.command == "gridsearch" else "training.epochs"
        overrides.append(f"{key}={args.epochs}")

    synthetic = getattr(args, "synthetic", None)
    if synthetic is not None:
        overrides.append("synthetic.enabled=true")
        for item in _csv(synthetic):
            if "=" not in item:
                item = f"n={item}"
            overrides.append(f"synthetic.{item}")
    return overrides


def configure_logging(settings: Settings) -> None:
    logging.basicConfig(
        level=logging.DEBUG if settings.debug else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


# ============ Commands ============

def _manifest(settings: Settings):
    from app.services.manifest_store import read_manifest

    path = settings.dataset.manifest_path
    if path is None:
        default = settings.output_dir / "manifest.jsonl"
        if not default.is_file():
            raise ConfigError("No manifest given; use --manifest or dataset.manifest_path")
        path = default
    if not Path(path).is_file():
        raise ConfigError(f"Manifest not found: {path}")
    return read_manifest(path), Path(path)


def _pairs(settings: Settings):
    from app.services.archive import load_station_pairs

    if settings.ingestion.station_pairs_file is None:
        raise ConfigError("No station pair table; use --pairs or ingestion.station_pairs_file")
    return load_station_pairs(settings.ingestion.station_pairs_file, settings.ingestion.max_separation_km)


def _train_config(settings: Settings, manifest):
    from app.services.recipes import model_config_for, train_config_for

    training = settings.training
    model = model_config_for(training.model, manifest.image_size, settings.tiny_backbone, settings.seed)
    return train_config_for(
        model,
        seed=settings.seed,
        epochs=training.epochs,
        batch_size=training.batch_size,
        base_lr=training.base_lr,
        weight_decay=training.weight_decay,
        momentum=training.momentum,
        augment=training.augment,
        num_workers=settings.dataset.num_workers,
    )


def _experiment_options(settings: Settings):
    from app.services.experiments import ExperimentOptions

    training = settings.training
    return ExperimentOptions(
        epochs=training.epochs,
        batch_size=training.batch_size,
        base_lr=training.base_lr,
        weight_decay=training.weight_decay,
        augment=training.augment,
        num_workers=settings.dataset.num_workers,
    )


def cmd_ingest(settings: Settings, dry_run: bool) -> int:
    from app.services.archive import ArchiveWriter
    from app.services.collector import describe_schedule, run_collection
    from app.services.roadside_client import RoadDataClient

    ingestion = settings.ingestion
    pairs = _pairs(settings)
    duration = timedelta(minutes=ingestion.duration_minutes)
    cadence = timedelta(minutes=ingestion.cadence_minutes)
    # Always under the output directory; dataset.archive_dir is only read by build-dataset
    archive_dir = settings.output_dir / "archive"

    _banner("Roadside data collection")
    print(f"Service: {ingestion.base_url}")
    print(f"Archive: {archive_dir}")
    for line in describe_schedule(pairs, duration, cadence):
        print(line)
    if dry_run:
        print("\nDry run: nothing fetched or written")
        return EXIT_OK

    client = RoadDataClient(ingestion)
    try:
        summary = run_collection(pairs, client, ArchiveWriter(archive_dir), duration, cadence)
    finally:
        client.close()

    print("-" * 60)
    print(f"  Images:      {summary.images}")
    print(f"  Readings:    {summary.readings} ({summary.partial_readings} partial, {summary.out_of_range} out of range)")
    print(f"  Failures:    {summary.failures}")
    print(f"  Bytes:       {summary.bytes_written}")
    (settings.output_dir / "collection_summary.json").write_text(summary.model_dump_json(indent=2), encoding="utf-8")
    return EXIT_OK if summary.records_written >= 1 else EXIT_RUNTIME


def cmd_build_dataset(settings: Settings, dry_run: bool) -> int:
    dataset, synthetic = settings.dataset, settings.synthetic
    _banner("Dataset build")
    if synthetic.enabled:
        print(f"Synthetic: {synthetic.n} scenes over {synthetic.stations} stations ({synthetic.width}x{synthetic.height})")
    else:
        print(f"Archive: {dataset.archive_dir}")
    print(f"Output: {settings.output_dir / 'manifest.jsonl'}")
    if dry_run:
        print("\nDry run: nothing written")
        return EXIT_OK

    if synthetic.enabled:
        from app.services.synthetic_scenes import generate_dataset

        manifest, path = generate_dataset(
            n=synthetic.n,
            stations=synthetic.stations,
            seed=settings.seed,
            out_dir=settings.output_dir,
            width=synthetic.width,
            height=synthetic.height,
            skew=synthetic.skew,
            mask_road=synthetic.mask_road,
            image_size=dataset.image_size,
            target_size=dataset.target_size,
            n_bins=dataset.n_bins,
            fractions=dataset.split_fractions,
            workers=synthetic.workers,
        )
    else:
        from app.services.dataset_builder import build_dataset

        if dataset.archive_dir is None:
            raise ConfigError("No archive given; use --archive or --synthetic")
        manifest, path = build_dataset(
            dataset.archive_dir,
            _pairs(settings),
            settings.output_dir,
            seed=settings.seed,
            tolerance=timedelta(minutes=dataset.tolerance_minutes),
            n_bins=dataset.n_bins,
            target_size=dataset.target_size,
            fractions=dataset.split_fractions,
            image_size=dataset.image_size,
        )

    print(f"✓ Manifest written: {path}")
    for split in ("train", "val", "test"):
        print(f"  {split:<6} {len(manifest.samples_for(split)):>6} samples, {len(manifest.stations_for(split))} stations")
    return EXIT_OK


def cmd_train(settings: Settings, dry_run: bool) -> int:
    from app.services.trainer import train

    manifest, path = _manifest(settings)
    config = _train_config(settings, manifest)
    _banner(f"Training {config.model.architecture}")
    print(f"{config.epochs} epochs, {config.schedule.kind}, lr {config.base_lr}, wd {config.weight_decay}")
    if dry_run:
        print("\nDry run: nothing trained")
        return EXIT_OK

    report = train(config, manifest, path, settings.output_dir)
    print(f"✓ Best val MAE {report.best_val_mae:.4f} at epoch {report.best_epoch + 1}")
    print(f"  Checkpoint: {report.checkpoint_path}")
    return EXIT_OK


def cmd_gridsearch(settings: Settings, dry_run: bool) -> int:
    from app.services.trainer import grid_search

    manifest, path = _manifest(settings)
    config = _train_config(settings, manifest)
    training = settings.training
    _banner(f"Grid search for {config.model.architecture}")
    print(f"base_lr {training.grid_base_lrs} x weight_decay {training.grid_weight_decays}")
    if dry_run:
        print("\nDry run: nothing trained")
        return EXIT_OK

    result = grid_search(
        training.grid_base_lrs, training.grid_weight_decays, config, manifest, path,
        settings.output_dir, epochs=training.grid_epochs,
    )
    for report in result.reports:
        score = "diverged" if report.diverged else f"{report.best_val_mae:.4f}"
        print(f"  lr {report.config.base_lr:<8g} wd {report.config.weight_decay:<8g} val MAE {score}")
    print(f"✓ Selected lr {result.best.base_lr:g}, wd {result.best.weight_decay:g}")
    return EXIT_OK


def cmd_eval(settings: Settings, dry_run: bool) -> int:
    from app.services.evaluator import evaluate

    checkpoint = settings.evaluation.checkpoint
    if checkpoint is None:
        raise ConfigError("No checkpoint given; use --checkpoint")
    manifest, path = _manifest(settings)
    _banner(f"Evaluating {checkpoint} on {settings.evaluation.split}")
    if dry_run:
        return EXIT_OK

    report = evaluate(checkpoint, manifest, path, settings.evaluation.split, settings.training.batch_size)
    (settings.output_dir / "metrics.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")
    print(f"  MAE  {report.mae:.4f}")
    print(f"  RMSE {report.rmse:.4f}")
    print(f"  n    {report.sample_count}")
    return EXIT_OK


def _print_table(table) -> None:
    best = {"mae": table.best("mae"), "rmse": table.best("rmse")}
    for row in table.rows:
        if row.status != "ok":
            print(f"  {row.name:.<30} failed: {row.error}")
            continue
        marks = "".join(" *" + c for c in ("mae", "rmse") if best[c] == row.name)
        print(f"  {row.name:.<30} MAE {row.mae:.3f}  RMSE {row.rmse:.3f}{marks}")


def cmd_benchmark(settings: Settings, dry_run: bool) -> int:
    from app.services.experiments import run_benchmark
    from app.services.table_export import get_table_exporter

    manifest, path = _manifest(settings)
    models = settings.evaluation.benchmark_models
    _banner("Benchmark")
    print(f"Models: {', '.join(models)}")
    if dry_run:
        return EXIT_OK

    table = run_benchmark(
        models, manifest, path, settings.output_dir,
        image_size=manifest.image_size,
        tiny_backbone=settings.tiny_backbone,
        seed=settings.seed,
        options=_experiment_options(settings),
    )
    paths = get_table_exporter().export(table, settings.output_dir, "benchmark")
    _print_table(table)
    print(f"✓ Table written: {paths['xlsx']}")
    return EXIT_OK


def cmd_ablate(settings: Settings, dry_run: bool) -> int:
    from app.services.experiments import ABLATION_ROWS, run_ablations
    from app.services.recipes import model_config_for
    from app.services.table_export import get_table_exporter

    manifest, path = _manifest(settings)
    seeds = settings.evaluation.ablation_seeds
    _banner("Ablations")
    print(f"Variants: {', '.join(ABLATION_ROWS)}; seeds {seeds}")
    if dry_run:
        return EXIT_OK

    base = model_config_for("wcamnet", manifest.image_size, settings.tiny_backbone, settings.seed)
    table = run_ablations(base, manifest, path, settings.output_dir, seeds, _experiment_options(settings))
    paths = get_table_exporter().export(table, settings.output_dir, "ablations")
    _print_table(table)
    print(f"✓ Table written: {paths['xlsx']}")
    return EXIT_OK


def cmd_viz(settings: Settings, dry_run: bool) -> int:
    from app.models.dataset import Normalization
    from app.models.network import BackboneSpec, ModelConfig
    from app.services.checkpoints import read_checkpoint
    from app.services.image_pipeline import load_image
    from app.services.visualization import render_token_pca

    evaluation = settings.evaluation
    if evaluation.image is None:
        raise ConfigError("No image given; use --image")

    if evaluation.checkpoint is not None:
        state = read_checkpoint(evaluation.checkpoint)
        config = ModelConfig.model_validate(state["model_config"])
        backbone, image_size = config.backbone, config.image_size
        normalization = Normalization.model_validate(state["normalization"])
    else:
        backbone = BackboneSpec.tiny(seed=settings.seed) if settings.tiny_backbone else BackboneSpec.base()
        image_size, normalization = settings.dataset.image_size, Normalization()

    out_path = settings.output_dir / "token_pca.png"
    _banner("Token PCA")
    print(f"{evaluation.image} -> {out_path} ({backbone.kind}, {image_size // 14}x{image_size // 14} tokens)")
    if dry_run:
        return EXIT_OK

    render_token_pca(load_image(evaluation.image), backbone, out_path, normalization, image_size, evaluation.upscale)
    print(f"✓ Visualization written: {out_path}")
    return EXIT_OK


def cmd_plot(settings: Settings, dry_run: bool) -> int:
    from app.services.visualization import plot_histograms

    manifest, _ = _manifest(settings)
    _banner("Friction histograms")
    if dry_run:
        return EXIT_OK

    paths = plot_histograms(manifest, settings.output_dir)
    counts = json.loads(paths["counts"].read_text())
    print(f"  before resampling: {counts['pre_resampling']}")
    print(f"  after resampling:  {counts['post_resampling']}")
    return EXIT_OK


HANDLERS = {
    "ingest": cmd_ingest,
    "build-dataset": cmd_build_dataset,
    "train": cmd_train,
    "gridsearch": cmd_gridsearch,
    "eval": cmd_eval,
    "benchmark": cmd_benchmark,
    "ablate": cmd_ablate,
    "viz": cmd_viz,
    "plot": cmd_plot,
}


def main(argv: Optional[list[str]] = None) -> int:
    """Parse arguments, resolve settings and run one subcommand"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        settings = load_settings(getattr(args, "config", None), settings_overrides(args))
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, ValueError, FileNotFoundError, yaml.YAMLError) as e:
        print(f"ERROR: invalid configuration: {e}", file=sys.stderr)
        return EXIT_USAGE

    configure_logging(settings)
    dry_run = getattr(args, "dry_run", False)
    try:
        if not dry_run:
            settings.output_dir.mkdir(parents=True, exist_ok=True)
            (settings.output_dir / "resolved_config.yaml").write_text(dump_settings(settings), encoding="utf-8")
        return HANDLERS[args.command](settings, dry_run)
    except ConfigError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (WCamNetError, OSError) as e:
        logger.debug("Run failed", exc_info=True)
        print(f"ERROR: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("Interrupted", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
