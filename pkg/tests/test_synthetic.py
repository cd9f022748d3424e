"""
Procedural roadside scenes and the synthetic benchmark dataset
"""
import numpy as np
import pytest
from scipy import stats

from app.models.dataset import SPLITS
from app.models.synthetic import SceneSpec
from app.services.image_pipeline import FrictionImageDataset
from app.services.manifest_store import read_manifest
from app.services.synthetic_scenes import (
    draw_frictions,
    generate_dataset,
    generate_scene,
    road_mask,
    scene_specs,
)


def _road_mean(friction: float, seed: int = 1) -> float:
    spec = SceneSpec(friction=friction, seed=seed, width=128, height=96, lighting=1.0)
    image = generate_scene(spec).astype(np.float64)
    return float(image[road_mask(spec.station_id, 128, 96)].mean())


def test_scene_is_deterministic():
    spec = SceneSpec(friction=0.4, seed=12, width=96, height=64)
    first = generate_scene(spec)
    assert first.shape == (64, 96, 3)
    assert first.dtype == np.uint8
    assert np.array_equal(first, generate_scene(spec))


def test_road_darkens_as_friction_rises():
    means = [_road_mean(f) for f in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)]
    assert all(a > b for a, b in zip(means, means[1:]))


def test_background_does_not_depend_on_friction():
    low = SceneSpec(friction=0.1, seed=4, width=96, height=64)
    high = low.model_copy(update={"friction": 0.9})
    outside = ~road_mask(low.station_id, 96, 64)
    assert np.array_equal(generate_scene(low)[outside], generate_scene(high)[outside])


def test_off_road_brightness_uncorrelated_with_label():
    specs = scene_specs(1000, 10, seed=0, width=64, height=64)
    labels, brightness = [], []
    for spec in specs:
        outside = ~road_mask(spec.station_id, 64, 64)
        labels.append(spec.friction)
        brightness.append(generate_scene(spec)[outside].mean())
    r = np.corrcoef(labels, brightness)[0, 1]
    assert abs(r) < 0.1


def test_masked_road_is_flat_gray():
    spec = SceneSpec(friction=0.7, seed=2, width=96, height=64, lighting=1.0, mask_road=True)
    road = generate_scene(spec)[road_mask(spec.station_id, 96, 64)]
    assert np.all(road == 128)


def test_uniform_labels_pass_chi_square():
    counts, _ = np.histogram(draw_frictions(1000, seed=0), bins=10, range=(0.0, 1.0))
    assert stats.chisquare(counts).pvalue > 0.001


def test_skewed_labels_lean_high():
    labels = draw_frictions(2000, seed=0, skew=True)
    assert labels.mean() == pytest.approx(5 / 7, abs=0.02)
    assert np.all((labels >= 0) & (labels <= 1))


def test_scene_specs_round_robin_stations():
    specs = scene_specs(12, 4, seed=1)
    assert [s.station_id for s in specs[:5]] == ["SYN-000", "SYN-001", "SYN-002", "SYN-003", "SYN-000"]
    assert len({s.seed for s in specs}) == 12


def test_fewer_samples_than_stations_rejected():
    with pytest.raises(ValueError):
        scene_specs(3, 5, seed=0)


def test_benchmark_dataset_contract(tmp_path):
    manifest, path = generate_dataset(n=200, stations=6, seed=0, out_dir=tmp_path, width=64, height=64, image_size=28)

    assert len(manifest.samples) == 200
    assert sum(manifest.raw_histogram) == 200
    per_station = {}
    for sample in manifest.samples:
        per_station[sample.camera_station_id] = per_station.get(sample.camera_station_id, 0) + 1
        assert 0.0 <= sample.friction_factor <= 1.0
        assert (tmp_path / sample.image_ref).is_file()
    assert sorted(per_station.values()) == [33, 33, 33, 33, 34, 34]
    assert set(manifest.split_assignment.values()) == set(SPLITS)
    assert read_manifest(path) == manifest


def test_dataset_generation_is_reproducible(tmp_path):
    _, first = generate_dataset(n=12, stations=3, seed=8, out_dir=tmp_path / "a", width=64, height=64, image_size=28)
    _, second = generate_dataset(n=12, stations=3, seed=8, out_dir=tmp_path / "b", width=64, height=64, image_size=28)
    assert first.read_bytes() == second.read_bytes()
    image = "images/SYN-001/000004.png"
    assert (first.parent / image).read_bytes() == (second.parent / image).read_bytes()


def test_resampled_dataset_has_target_size(tmp_path):
    manifest, _ = generate_dataset(
        n=60, stations=3, seed=1, out_dir=tmp_path, width=64, height=64,
        image_size=28, skew=True, target_size=30,
    )
    assert len(manifest.samples) == 30
    assert sum(manifest.raw_histogram) == 60


def test_synthetic_manifest_feeds_every_split(synthetic_dataset):
    manifest, path = synthetic_dataset
    stations = [manifest.stations_for(split) for split in SPLITS]
    assert not stations[0] & stations[1] and not stations[0] & stations[2] and not stations[1] & stations[2]
    for split in SPLITS:
        assert len(FrictionImageDataset(manifest, path, split)) > 0
