"""
Layered settings and the wcamnet command line
"""
import json
import os

import pytest
import yaml

from app.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, build_parser, main, settings_overrides
from app.config import dump_settings, load_settings, parse_overrides


SMALL_SYNTHETIC = "n=24,stations=4,width=64,height=64"


@pytest.fixture(autouse=True)
def isolated_env(tmp_path, monkeypatch):
    """No stray .env or WCAMNET_* variables leak into a test"""
    monkeypatch.chdir(tmp_path)
    for key in list(os.environ):
        if key.startswith("WCAMNET_"):
            monkeypatch.delenv(key)


def _build_synthetic(out_dir) -> int:
    return main([
        "build-dataset", "--synthetic", SMALL_SYNTHETIC,
        "--output-dir", str(out_dir), "--set", "dataset.image_size=56",
    ])


# ============ Settings ============

def test_parse_overrides_nests_and_parses_values():
    assert parse_overrides(["training.batch_size=8", "seed=3", "evaluation.ablation_seeds=[1, 2]"]) == {
        "training": {"batch_size": 8},
        "seed": 3,
        "evaluation": {"ablation_seeds": [1, 2]},
    }
    with pytest.raises(ValueError):
        parse_overrides(["no-equals-sign"])


def test_layering_yaml_then_env_then_overrides(tmp_path, monkeypatch):
    config = tmp_path / "config.yaml"
    config.write_text(yaml.safe_dump({"seed": 3, "training": {"batch_size": 4, "base_lr": 0.5}}))

    settings = load_settings(config)
    assert settings.seed == 3 and settings.training.batch_size == 4

    monkeypatch.setenv("WCAMNET_SEED", "7")
    monkeypatch.setenv("WCAMNET_TRAINING__BATCH_SIZE", "6")
    settings = load_settings(config)
    assert settings.seed == 7
    assert settings.training.batch_size == 6
    assert settings.training.base_lr == 0.5

    settings = load_settings(config, ["seed=9"])
    assert settings.seed == 9
    assert settings.training.batch_size == 6


def test_missing_config_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_settings(tmp_path / "absent.yaml")


def test_dump_settings_round_trips():
    settings = load_settings(overrides=["training.model=vgg19-style"])
    assert yaml.safe_load(dump_settings(settings))["training"]["model"] == "vgg19-style"


def test_flags_become_overrides():
    args = build_parser().parse_args([
        "--seed", "4", "gridsearch", "--epochs", "2", "--model", "wcamnet", "--tiny-backbone",
    ])
    overrides = settings_overrides(args)
    assert "seed=4" in overrides
    assert "training.grid_epochs=2" in overrides
    assert "training.model=wcamnet" in overrides
    assert "tiny_backbone=true" in overrides

    args = build_parser().parse_args(["train", "--epochs", "2"])
    assert "training.epochs=2" in settings_overrides(args)

    args = build_parser().parse_args(["build-dataset", "--synthetic", "n=200,stations=6"])
    assert settings_overrides(args)[-3:] == ["synthetic.enabled=true", "synthetic.n=200", "synthetic.stations=6"]


# ============ Exit codes ============

def test_unknown_subcommand_is_usage_error():
    assert main(["frobnicate"]) == EXIT_USAGE


def test_invalid_override_is_usage_error(tmp_path):
    assert main(["plot", "--set", "training.batch_size=0", "--output-dir", str(tmp_path / "out")]) == EXIT_USAGE


def test_missing_manifest_is_usage_error(tmp_path):
    assert main(["train", "--manifest", str(tmp_path / "none.jsonl"), "--output-dir", str(tmp_path / "out")]) == EXIT_USAGE


def test_corrupt_checkpoint_is_runtime_error(tmp_path):
    assert _build_synthetic(tmp_path / "data") == EXIT_OK
    broken = tmp_path / "broken.pt"
    broken.write_bytes(b"not a checkpoint")
    code = main([
        "eval", "--checkpoint", str(broken), "--manifest", str(tmp_path / "data" / "manifest.jsonl"),
        "--output-dir", str(tmp_path / "eval"),
    ])
    assert code == EXIT_RUNTIME


def test_ingest_without_records_is_runtime_error(tmp_path):
    pairs = tmp_path / "pairs.yaml"
    pairs.write_text(yaml.safe_dump([{"camera_station_id": "C1", "weather_station_id": "W1", "camera_ids": ["C1-a"]}]))
    code = main([
        "ingest", "--pairs", str(pairs), "--base-url", "http://127.0.0.1:9",
        "--duration-minutes", "1", "--output-dir", str(tmp_path / "out"),
        "--set", "ingestion.retry_attempts=1", "--set", "ingestion.min_spacing_seconds=0",
        "--set", "ingestion.timeout_seconds=1",
    ])
    assert code == EXIT_RUNTIME
    summary = json.loads((tmp_path / "out" / "collection_summary.json").read_text())
    assert summary["failures"] == 2


def test_ingest_without_pairs_is_usage_error(tmp_path):
    assert main(["ingest", "--output-dir", str(tmp_path / "out")]) == EXIT_USAGE


# ============ Runs ============

def test_dry_run_writes_nothing(tmp_path):
    out = tmp_path / "out"
    assert main(["build-dataset", "--synthetic", "--dry-run", "--output-dir", str(out)]) == EXIT_OK
    assert not out.exists()


def test_synthetic_build_is_reproducible(tmp_path):
    assert _build_synthetic(tmp_path / "a") == EXIT_OK
    assert _build_synthetic(tmp_path / "b") == EXIT_OK
    first = (tmp_path / "a" / "manifest.jsonl").read_bytes()
    assert first == (tmp_path / "b" / "manifest.jsonl").read_bytes()

    resolved = yaml.safe_load((tmp_path / "a" / "resolved_config.yaml").read_text())
    assert resolved["synthetic"]["n"] == 24
    assert resolved["synthetic"]["enabled"] is True


def test_train_eval_plot_with_tiny_backbone(tmp_path):
    data = tmp_path / "data"
    assert _build_synthetic(data) == EXIT_OK
    manifest = str(data / "manifest.jsonl")

    run = tmp_path / "run"
    code = main([
        "train", "--manifest", manifest, "--tiny-backbone", "--epochs", "1",
        "--output-dir", str(run), "--set", "training.batch_size=8",
    ])
    assert code == EXIT_OK
    assert (run / "best.pt").is_file()
    report = json.loads((run / "run_report.json").read_text())
    assert len(report["epochs"]) == 1

    scored = tmp_path / "eval"
    assert main(["eval", "--checkpoint", str(run / "best.pt"), "--manifest", manifest, "--output-dir", str(scored)]) == EXIT_OK
    metrics = json.loads((scored / "metrics.json").read_text())
    assert metrics["rmse"] >= metrics["mae"]

    plots = tmp_path / "plots"
    assert main(["plot", "--manifest", manifest, "--output-dir", str(plots)]) == EXIT_OK
    assert (plots / "histogram_pre_resampling.png").is_file()

    image = next((data / "images").rglob("*.png"))
    viz = tmp_path / "viz"
    code = main(["viz", "--image", str(image), "--checkpoint", str(run / "best.pt"), "--output-dir", str(viz)])
    assert code == EXIT_OK
    assert (viz / "token_pca.png").is_file()


def test_ingest_archive_stays_under_output_dir(tmp_path):
    pairs = tmp_path / "pairs.yaml"
    pairs.write_text(yaml.safe_dump([{"camera_station_id": "C1", "weather_station_id": "W1", "camera_ids": ["C1-a"]}]))
    elsewhere = tmp_path / "elsewhere"
    main([
        "ingest", "--pairs", str(pairs), "--base-url", "http://127.0.0.1:9",
        "--duration-minutes", "1", "--output-dir", str(tmp_path / "out"),
        "--set", f"dataset.archive_dir={elsewhere}", "--set", "ingestion.retry_attempts=1",
        "--set", "ingestion.min_spacing_seconds=0", "--set", "ingestion.timeout_seconds=1",
    ])
    assert not elsewhere.exists()
    assert (tmp_path / "out" / "archive").is_dir()
    assert build_parser().parse_args(["ingest"]).__dict__.get("archive") is None
