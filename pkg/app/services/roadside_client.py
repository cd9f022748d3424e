"""
HTTP client for the roadside data service
Polls camera images and weather-station sensor values into the archive.
"""
import io
import json
import logging
import threading
import time
from datetime import datetime, timezone
from typing import Optional
from urllib.parse import urlsplit

import requests
from PIL import Image, UnidentifiedImageError
from pydantic import ValidationError
from requests.adapters import HTTPAdapter
from urllib3.util.retry import Retry

from app.config import IngestionSettings
from app.errors import PayloadValidationError
from app.models.ingestion import ArchiveRecord, FetchMetadata, StationPayload
from app.services.archive import ArchiveWriter


logger = logging.getLogger(__name__)

RETRY_STATUSES = (429, 500, 502, 503, 504)
IMAGE_EXTENSIONS = {"JPEG": "jpg", "PNG": "png", "GIF": "gif", "WEBP": "webp", "BMP": "bmp"}


class HostRateLimiter:
    """Keeps at least min_spacing seconds between request starts to the same host"""

    def __init__(self, min_spacing: float = 0.25, clock=time.monotonic, sleep=time.sleep):
        self.min_spacing = min_spacing
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_slot: dict[str, float] = {}

    def wait(self, host: str) -> None:
        with self._lock:
            now = self._clock()
            slot = max(now, self._next_slot.get(host, now))
            self._next_slot[host] = slot + self.min_spacing
        delay = slot - now
        if delay > 0:
            self._sleep(delay)


class SpacedRetry(Retry):
    """
    Retry whose backoff never drops below the per-host request spacing.
    Retried attempts also take a slot from the shared host limiter.
    """

    def __init__(
        self,
        *args,
        min_spacing: float = 0.0,
        limiter: Optional[HostRateLimiter] = None,
        host: str = "",
        **kwargs,
    ):
        super().__init__(*args, **kwargs)
        self.min_spacing = min_spacing
        self.limiter = limiter
        self.host = host

    def new(self, **kwargs) -> "SpacedRetry":
        retry = super().new(**kwargs)
        retry.min_spacing = self.min_spacing
        retry.limiter = self.limiter
        retry.host = self.host
        return retry

    def get_backoff_time(self) -> float:
        return max(self.min_spacing, super().get_backoff_time())

    def sleep(self, response=None) -> None:
        super().sleep(response)
        if self.limiter is not None:
            self.limiter.wait(self.host)


class RoadDataClient:
    """
    requests Session with retry/backoff, host spacing and optional bearer token.
    Safe to share between poll threads.
    """

    def __init__(self, settings: IngestionSettings, session: Optional[requests.Session] = None):
        self.settings = settings
        self.base_url = settings.base_url.rstrip("/")
        self.host = urlsplit(self.base_url).netloc
        self.timeout = settings.timeout_seconds
        self.max_concurrency = settings.max_concurrency
        self.limiter = HostRateLimiter(settings.min_spacing_seconds)

        retry = SpacedRetry(
            total=settings.retry_attempts - 1,
            backoff_factor=settings.backoff_factor,
            status_forcelist=RETRY_STATUSES,
            allowed_methods=frozenset({"GET"}),
            raise_on_status=False,
            min_spacing=settings.min_spacing_seconds,
            limiter=self.limiter,
            host=self.host,
        )
        adapter = HTTPAdapter(max_retries=retry, pool_maxsize=settings.max_concurrency)
        self.session = session or requests.Session()
        self.session.mount("http://", adapter)
        self.session.mount("https://", adapter)
        if settings.token:
            self.session.headers["Authorization"] = f"Bearer {settings.token}"

    def get(self, path: str) -> tuple[Optional[requests.Response], FetchMetadata]:
        """
        GET base_url + path.

        Returns:
            Tuple of (response or None when no response arrived, fetch metadata)
        """
        url = f"{self.base_url}{path}"
        self.limiter.wait(self.host)
        started = time.perf_counter()
        try:
            response = self.session.get(url, timeout=self.timeout)
        except requests.RequestException as e:
            latency = (time.perf_counter() - started) * 1000
            logger.warning(f"GET {url} failed after retries: {type(e).__name__}")
            return None, FetchMetadata(
                url=url,
                latency_ms=round(latency, 3),
                attempts=self.settings.retry_attempts,
                error=f"{type(e).__name__}: {e}",
            )

        latency = (time.perf_counter() - started) * 1000
        retries = getattr(response.raw, "retries", None)
        attempts = len(retries.history) + 1 if retries is not None else 1
        meta = FetchMetadata(url=url, status=response.status_code, latency_ms=round(latency, 3), attempts=attempts)
        if not response.ok:
            meta.error = f"HTTP {response.status_code}"
            logger.warning(f"GET {url} -> {response.status_code} after {attempts} attempt(s)")
        return response, meta

    def close(self) -> None:
        self.session.close()


def _now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def validate_image(payload: bytes) -> str:
    """
    Check that bytes decode as an image.

    Returns:
        File extension for the detected format
    """
    try:
        with Image.open(io.BytesIO(payload)) as img:
            fmt = img.format
            img.verify()
    except (UnidentifiedImageError, OSError, SyntaxError) as e:
        raise PayloadValidationError(f"Payload is not a valid image: {e}") from e
    return IMAGE_EXTENSIONS.get(fmt, (fmt or "bin").lower())


def parse_station_payload(payload: bytes) -> StationPayload:
    try:
        return StationPayload.model_validate(json.loads(payload))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise PayloadValidationError(f"Sensor payload is not valid JSON: {e}") from e
    except ValidationError as e:
        raise PayloadValidationError(f"Sensor payload failed validation: {e.error_count()} error(s)") from e


# ============ Polls ============

def poll_camera(
    camera_id: str,
    camera_station_id: str,
    client: RoadDataClient,
    writer: ArchiveWriter,
    timestamp: Optional[datetime] = None,
) -> ArchiveRecord:
    """
    Fetch the current image of one camera and archive it.

    Args:
        camera_id: Camera identifier
        camera_station_id: Station the camera belongs to
        client: Shared HTTP client
        writer: Archive writer
        timestamp: Poll tick time (defaults to now)

    Returns:
        Stored image record, or a failure record (ok=False) with fetch metadata
    """
    timestamp = timestamp or _now()
    record = ArchiveRecord(kind="image", camera_station_id=camera_station_id, camera_id=camera_id, timestamp=timestamp)
    response, meta = client.get(f"/cameras/{camera_id}/image")
    record.fetch = meta

    if response is None or not response.ok:
        record.ok = False
        return writer.write_failure(record)

    try:
        extension = validate_image(response.content)
    except PayloadValidationError as e:
        logger.warning(f"Camera {camera_id}: {e}")
        record.ok = False
        meta.error = str(e)
        return writer.write_failure(record)

    return writer.write_image(record, response.content, extension)


def poll_weather(
    weather_station_id: str,
    client: RoadDataClient,
    writer: ArchiveWriter,
    expected_sensors: Optional[int] = None,
    timestamp: Optional[datetime] = None,
) -> list[ArchiveRecord]:
    """
    Fetch sensor values of one weather station and archive one record per sensor.

    Grips are stored raw; values outside the sensor range are flagged, not clamped.
    Sensors without a grip value become partial records.

    Args:
        weather_station_id: Station identifier
        client: Shared HTTP client
        writer: Archive writer
        expected_sensors: Sensor count from the pair table, to warn about missing sensors
        timestamp: Used only for failure records; readings carry the payload timestamp

    Returns:
        Reading records, or a single failure record
    """
    failure = ArchiveRecord(kind="reading", ok=False, weather_station_id=weather_station_id, timestamp=timestamp or _now())
    response, meta = client.get(f"/stations/{weather_station_id}/sensor-values")
    failure.fetch = meta
    if response is None or not response.ok:
        return [writer.write_failure(failure)]

    try:
        payload = parse_station_payload(response.content)
    except PayloadValidationError as e:
        logger.warning(f"Station {weather_station_id}: {e}")
        meta.error = str(e)
        return [writer.write_failure(failure)]

    if payload.station_id != weather_station_id:
        meta.error = f"payload is for station {payload.station_id}"
        logger.warning(f"Station {weather_station_id}: {meta.error}")
        return [writer.write_failure(failure)]

    present = {sensor.index for sensor in payload.sensors}
    if expected_sensors is not None and len(present) < expected_sensors:
        logger.warning(f"Station {weather_station_id}: expected {expected_sensors} sensors, got {sorted(present)}")

    records = []
    for sensor in sorted(payload.sensors, key=lambda s: s.index):
        record = ArchiveRecord(
            kind="reading",
            weather_station_id=weather_station_id,
            timestamp=payload.timestamp,
            sensor_index=sensor.index,
            grip=sensor.grip,
            partial=sensor.grip is None,
            fetch=meta,
        )
        if record.partial:
            logger.warning(f"Station {weather_station_id}: sensor {sensor.index} has no grip value")
        if record.out_of_range:
            logger.warning(f"Station {weather_station_id}: sensor {sensor.index} grip {sensor.grip} out of range")
        records.append(writer.write_reading(record))
    return records
