"""
Data sources behind the roadside simulator API
FixtureSource serves files verbatim; SyntheticSource renders live scenes.
"""
import io
import json
import logging
import math
import zlib
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
import yaml
from PIL import Image

from app.config import get_settings
from app.errors import SourceUnavailableError
from app.models.ingestion import StationPair
from app.models.synthetic import SceneSpec
from app.services.archive import load_station_pairs
from app.services.labeling import friction_to_grip
from app.services.synthetic_scenes import generate_scene


logger = logging.getLogger(__name__)

MEDIA_TYPES = {".jpg": "image/jpeg", ".jpeg": "image/jpeg", ".png": "image/png"}

DEMO_PAIRS = [
    StationPair(camera_station_id="C-0001", weather_station_id="W-0001", camera_ids=["C-0001-1", "C-0001-2"], sensor_count=2),
    StationPair(camera_station_id="C-0002", weather_station_id="W-0002", camera_ids=["C-0002-1"], sensor_count=1),
]


class FixtureSource:
    """
    Serves payload files from a fixture directory:
        cameras/<camera_id>.<jpg|png>
        stations/<station_id>.json   (served as-is, may be malformed on purpose)
        failing.yaml                 (optional list of ids that always answer 503)
    """

    def __init__(self, root: Union[str, Path], token: Optional[str] = None):
        self.root = Path(root)
        self.token = token
        failing_file = self.root / "failing.yaml"
        failing = yaml.safe_load(failing_file.read_text()) if failing_file.is_file() else []
        self.failing = set(failing or [])

    def _check(self, item_id: str) -> None:
        if item_id in self.failing:
            raise SourceUnavailableError(f"{item_id} is configured to fail")

    def camera_image(self, camera_id: str) -> tuple[bytes, str]:
        self._check(camera_id)
        for path in sorted((self.root / "cameras").glob(f"{camera_id}.*")):
            if path.suffix.lower() in MEDIA_TYPES:
                return path.read_bytes(), MEDIA_TYPES[path.suffix.lower()]
        raise KeyError(camera_id)

    def sensor_values(self, station_id: str) -> bytes:
        self._check(station_id)
        path = self.root / "stations" / f"{station_id}.json"
        if not path.is_file():
            raise KeyError(station_id)
        return path.read_bytes()


class SyntheticSource:
    """Renders scenes whose friction follows a daily cycle per station"""

    def __init__(
        self,
        pairs: list[StationPair],
        seed: int = 0,
        width: int = 640,
        height: int = 360,
        token: Optional[str] = None,
        clock: Callable[[], datetime] = lambda: datetime.now(timezone.utc),
    ):
        self.pairs = pairs
        self.seed = seed
        self.width = width
        self.height = height
        self.token = token
        self.clock = clock
        self._camera_station = {cam: p.camera_station_id for p in pairs for cam in p.camera_ids}
        self._weather = {p.weather_station_id: p for p in pairs}

    def friction(self, station_id: str, when: datetime) -> float:
        phase = (zlib.crc32(station_id.encode("utf-8")) % 360) * math.pi / 180
        hours = when.timestamp() / 3600.0
        return 0.5 + 0.45 * math.sin(2 * math.pi * hours / 24.0 + phase)

    def camera_image(self, camera_id: str) -> tuple[bytes, str]:
        if camera_id not in self._camera_station:
            raise KeyError(camera_id)
        when = self.clock().replace(second=0, microsecond=0)
        station_id = self._camera_station[camera_id]
        pair = next(p for p in self.pairs if p.camera_station_id == station_id)
        minute = int(when.timestamp() // 60)
        spec = SceneSpec(
            friction=self.friction(pair.weather_station_id, when),
            seed=zlib.crc32(f"{self.seed}:{camera_id}:{minute}".encode("utf-8")),
            width=self.width,
            height=self.height,
            station_id=station_id,
            lighting=0.5 + 0.5 * max(0.0, math.sin(math.pi * (when.hour + when.minute / 60) / 24)),
            clutter=5,
        )
        buffer = io.BytesIO()
        Image.fromarray(generate_scene(spec)).save(buffer, format="JPEG", quality=90)
        return buffer.getvalue(), "image/jpeg"

    def sensor_values(self, station_id: str) -> bytes:
        if station_id not in self._weather:
            raise KeyError(station_id)
        pair = self._weather[station_id]
        when = self.clock().replace(second=0, microsecond=0)
        rng = np.random.default_rng([self.seed, zlib.crc32(station_id.encode("utf-8")), int(when.timestamp())])
        base = friction_to_grip(self.friction(station_id, when))
        sensors = [
            {"index": index, "grip": round(base + float(rng.normal(0.0, 0.01)), 4)}
            for index in range(1, pair.sensor_count + 1)
        ]
        payload = {"station_id": station_id, "timestamp": when.isoformat(), "sensors": sensors}
        return json.dumps(payload).encode("utf-8")


RoadsideSource = Union[FixtureSource, SyntheticSource]

# Singleton instance
_source: Optional[RoadsideSource] = None


def get_roadside_source() -> RoadsideSource:
    """Get or create the simulator source from settings"""
    global _source
    if _source is None:
        settings = get_settings()
        ingestion = settings.ingestion
        if ingestion.simulator_fixture_dir:
            _source = FixtureSource(ingestion.simulator_fixture_dir, token=ingestion.token)
        else:
            pairs = (
                load_station_pairs(ingestion.station_pairs_file, ingestion.max_separation_km)
                if ingestion.station_pairs_file else DEMO_PAIRS
            )
            _source = SyntheticSource(pairs, seed=settings.seed, token=ingestion.token)
        logger.info(f"Roadside simulator using {type(_source).__name__}")
    return _source
