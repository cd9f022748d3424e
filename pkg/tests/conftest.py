"""
Shared fixtures: tiny model configs and a small synthetic dataset
"""
from datetime import datetime, timedelta, timezone

import pytest

from app.models.dataset import LabeledSample
from app.models.network import BackboneSpec, ModelConfig
from app.services.synthetic_scenes import generate_dataset


TEST_IMAGE_SIZE = 56
T0 = datetime(2023, 2, 1, 12, 0, tzinfo=timezone.utc)


def make_samples(frictions, stations=None) -> list[LabeledSample]:
    """Labelled samples with given frictions, round-robin over stations"""
    stations = stations or ["S0"]
    return [
        LabeledSample(
            image_ref=f"img_{i}.png",
            camera_station_id=stations[i % len(stations)],
            weather_station_id="W" + stations[i % len(stations)],
            timestamp=T0 + timedelta(minutes=20 * i),
            friction_factor=f,
        )
        for i, f in enumerate(frictions)
    ]


@pytest.fixture
def tiny_config() -> ModelConfig:
    return ModelConfig(
        architecture="wcamnet",
        backbone=BackboneSpec.tiny(embed_dim=16),
        image_size=TEST_IMAGE_SIZE,
        scale="tiny",
        pretrained=False,
    )


@pytest.fixture(scope="session")
def synthetic_dataset(tmp_path_factory):
    """60 small scenes over 6 stations, normalized at 56 px"""
    out_dir = tmp_path_factory.mktemp("synthetic")
    manifest, path = generate_dataset(
        n=60,
        stations=6,
        seed=3,
        out_dir=out_dir,
        width=96,
        height=64,
        image_size=TEST_IMAGE_SIZE,
    )
    return manifest, path
