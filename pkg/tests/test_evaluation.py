"""
Metrics, checkpoint evaluation, comparison tables and visualizations
"""
import json

import numpy as np
import openpyxl
import pytest
from PIL import Image

from app.models.dataset import Normalization
from app.models.evaluation import ComparisonTable, MetricsReport, TableRow
from app.models.network import BackboneSpec, ModelConfig
from app.models.synthetic import SceneSpec
from app.models.training import TrainConfig
from app.services.evaluator import evaluate, mae, predict, rmse
from app.services.experiments import ExperimentOptions, ablation_variants, run_ablations, run_benchmark
from app.services.manifest_store import resolve_image
from app.services.synthetic_scenes import generate_scene
from app.services.table_export import get_table_exporter
from app.services.trainer import train
from app.services.visualization import histogram_counts, pca_token_visualization, plot_histograms, token_pca


QUICK = ExperimentOptions(epochs=1, batch_size=8)


# ============ Metrics ============

def test_metric_examples():
    preds, targets = [0.1, 0.5, 0.9], [0.0, 0.5, 0.6]
    assert mae(preds, targets) == pytest.approx(0.4 / 3)
    assert rmse(preds, targets) == pytest.approx(np.sqrt(0.1 / 3))


def test_metrics_match_loop_and_rmse_squared_is_mse():
    rng = np.random.default_rng(3)
    preds, targets = rng.uniform(size=200), rng.uniform(size=200)
    errors = [p - t for p, t in zip(preds, targets)]
    assert mae(preds, targets) == pytest.approx(sum(abs(e) for e in errors) / 200)
    assert rmse(preds, targets) ** 2 == pytest.approx(sum(e * e for e in errors) / 200)
    assert rmse(preds, targets) >= mae(preds, targets)


def test_constant_prediction_on_uniform_labels():
    targets = np.random.default_rng(0).uniform(size=200_000)
    preds = np.full_like(targets, 0.5)
    assert mae(preds, targets) == pytest.approx(0.25, abs=0.005)
    assert rmse(preds, targets) == pytest.approx(np.sqrt(1 / 12), abs=0.005)


@pytest.mark.parametrize("preds, targets", [([], []), ([0.1, 0.2], [0.1])])
def test_metrics_reject_bad_input(preds, targets):
    with pytest.raises(ValueError):
        mae(preds, targets)
    with pytest.raises(ValueError):
        rmse(preds, targets)


def test_metrics_report_requires_rmse_at_least_mae():
    MetricsReport(model_name="m", mae=0.2, rmse=0.2, sample_count=3)
    with pytest.raises(ValueError):
        MetricsReport(model_name="m", mae=0.3, rmse=0.2, sample_count=3)


# ============ Checkpoint evaluation ============

@pytest.fixture(scope="module")
def trained_checkpoint(tmp_path_factory, synthetic_dataset):
    manifest, path = synthetic_dataset
    model = ModelConfig(backbone=BackboneSpec.tiny(embed_dim=16), image_size=56, scale="tiny", pretrained=False)
    config = TrainConfig(model=model, epochs=1, batch_size=8)
    report = train(config, manifest, path, tmp_path_factory.mktemp("run"))
    return report.checkpoint_path


def test_evaluation_is_idempotent(trained_checkpoint, synthetic_dataset):
    manifest, path = synthetic_dataset
    first = evaluate(trained_checkpoint, manifest, path)
    second = evaluate(trained_checkpoint, manifest, path, batch_size=5)
    assert first.mae == pytest.approx(second.mae, abs=1e-6)
    assert first.rmse == pytest.approx(second.rmse, abs=1e-6)
    assert first.sample_count == len(manifest.samples_for("test"))
    assert first.model_name == "wcamnet"
    assert first.config_hash


def test_predict_matches_evaluation_range(trained_checkpoint, synthetic_dataset):
    manifest, path = synthetic_dataset
    images = [resolve_image(path, s.image_ref) for s in manifest.samples_for("test")[:3]]
    preds = predict(trained_checkpoint, images)
    assert len(preds) == 3
    assert all(0.0 < p < 1.0 for p in preds)


# ============ Benchmark and ablations ============

def test_benchmark_keeps_failed_rows(tmp_path, synthetic_dataset):
    manifest, path = synthetic_dataset
    table = run_benchmark(
        ["wcamnet", "not-a-model"], manifest, path, tmp_path,
        image_size=56, tiny_backbone=True, options=QUICK,
    )
    assert [r.name for r in table.rows] == ["wcamnet", "not-a-model"]
    ok, failed = table.rows
    assert ok.status == "ok" and ok.mae is not None and ok.runs == 1
    assert ok.reference_mae == pytest.approx(0.150)
    assert ok.trainable_parameters < ok.parameters
    assert failed.status == "failed" and "not-a-model" in failed.error
    assert table.best("mae") == "wcamnet"


def test_ablation_variants_toggle_one_thing(tiny_config):
    variants = ablation_variants(tiny_config)
    assert list(variants) == ["base", "large-backbone", "no-se", "no-hd"]
    assert variants["large-backbone"].backbone.embed_dim == 32
    assert not variants["no-se"].use_se_blocks and variants["no-se"].use_hd_branch
    assert not variants["no-hd"].use_hd_branch and variants["no-hd"].use_se_blocks


def test_ablations_average_over_seeds(tmp_path, tiny_config, synthetic_dataset):
    manifest, path = synthetic_dataset
    table = run_ablations(tiny_config, manifest, path, tmp_path, seeds=[0, 1], options=QUICK)
    assert [r.name for r in table.rows] == ["base", "large-backbone", "no-se", "no-hd"]
    for row in table.rows:
        assert row.status == "ok", row.error
        assert row.runs == 2
        assert row.mae_std is not None
    assert (tmp_path / "no-hd" / "seed_1" / "best.pt").is_file()


def test_ablations_need_wcamnet(tmp_path, tiny_config, synthetic_dataset):
    manifest, path = synthetic_dataset
    with pytest.raises(ValueError):
        run_ablations(tiny_config.model_copy(update={"architecture": "vgg19-style"}), manifest, path, tmp_path)


# ============ Table export ============

def _table() -> ComparisonTable:
    return ComparisonTable(title="Results", rows=[
        TableRow(name="a", mae=0.20, rmse=0.25, runs=1),
        TableRow(name="b", mae=0.15, rmse=0.27, runs=1),
        TableRow(name="c", status="failed", error="RegistryError: nope"),
    ])


def test_best_per_column_skips_failed_rows():
    table = _table()
    assert table.best("mae") == "b"
    assert table.best("rmse") == "a"
    assert ComparisonTable(title="t", rows=[TableRow(name="x", status="failed")]).best("mae") is None


def test_export_writes_json_xlsx_png(tmp_path):
    paths = get_table_exporter().export(_table(), tmp_path, "benchmark")

    payload = json.loads(paths["json"].read_text())
    assert payload["best"] == {"mae": "b", "rmse": "a"}
    assert [r["name"] for r in payload["rows"]] == ["a", "b", "c"]

    ws = openpyxl.load_workbook(paths["xlsx"]).active
    assert ws.cell(row=1, column=1).value == "Model"
    assert ws.cell(row=3, column=2).font.bold
    assert not ws.cell(row=2, column=2).font.bold
    assert ws.cell(row=2, column=3).font.bold
    assert ws.cell(row=4, column=9).value.startswith("failed")

    with Image.open(paths["png"]) as img:
        assert img.width > 0


# ============ Token PCA ============

def test_token_pca_matches_eigendecomposition():
    rng = np.random.default_rng(0)
    tokens = rng.standard_normal((200, 6)) @ np.diag([5.0, 3.0, 2.0, 1.0, 0.5, 0.1])
    scores, components, variance = token_pca(tokens)

    centered = tokens - tokens.mean(axis=0)
    eigvals, eigvecs = np.linalg.eigh(np.cov(centered, rowvar=False))
    order = np.argsort(eigvals)[::-1][:3]
    assert variance == pytest.approx(eigvals[order], rel=1e-6)
    for k in range(3):
        assert abs(components[k] @ eigvecs[:, order[k]]) == pytest.approx(1.0, abs=1e-6)
        assert components[k][np.abs(components[k]).argmax()] > 0
    assert np.allclose(scores, centered @ components.T)


def test_token_pca_components_orthonormal_and_ordered():
    tokens = np.random.default_rng(1).standard_normal((100, 16))
    _, components, variance = token_pca(tokens)
    assert np.allclose(components @ components.T, np.eye(3), atol=1e-8)
    assert variance[0] >= variance[1] >= variance[2]


def test_rank_deficient_tokens_pad_with_zeros():
    direction = np.random.default_rng(2).standard_normal(8)
    tokens = np.outer(np.linspace(-1, 1, 20), direction)
    scores, components, variance = token_pca(tokens)
    assert variance[0] > 0
    assert np.all(variance[1:] == 0)
    assert np.all(components[1:] == 0) and np.all(scores[:, 1:] == 0)


def test_constant_tokens_give_zero_output():
    scores, _, variance = token_pca(np.ones((10, 4)))
    assert np.all(scores == 0) and np.all(variance == 0)


def test_visualization_grid_shape_and_range():
    image = generate_scene(SceneSpec(friction=0.3, seed=1, width=96, height=64))
    rgb = pca_token_visualization(image, BackboneSpec.tiny(embed_dim=8), Normalization(), image_size=56)
    assert rgb.shape == (4, 4, 3)
    assert rgb.min() >= 0.0 and rgb.max() <= 1.0


# ============ Histograms ============

def test_histogram_counts_and_plots(tmp_path, synthetic_dataset):
    manifest, _ = synthetic_dataset
    counts = histogram_counts(manifest)
    expected = [0] * 10
    for sample in manifest.samples:
        expected[min(int(sample.friction_factor * 10), 9)] += 1
    assert counts["post_resampling"] == expected
    assert counts["pre_resampling"] == manifest.raw_histogram
    assert len(counts["bin_edges"]) == 11

    paths = plot_histograms(manifest, tmp_path)
    assert json.loads(paths["counts"].read_text()) == counts
    assert paths["pre_resampling"].is_file() and paths["post_resampling"].is_file()
