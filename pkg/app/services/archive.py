"""
Append-only local archive of roadside images and sensor readings
Layout:
    <root>/<YYYY-MM-DD>/images/<camera_station_id>/<camera_id>_<HHMMSS>.<ext>
    <root>/<YYYY-MM-DD>/records.jsonl     image and reading records
    <root>/<YYYY-MM-DD>/fetch_log.jsonl   one line per fetch, including failures
"""
import json
import logging
import os
import threading
from pathlib import Path
from typing import Union

import yaml
from pydantic import ValidationError

from app.errors import ArchiveError, ConfigError
from app.models.dataset import GripReading, ImageObservation
from app.models.ingestion import ArchiveRecord, FetchMetadata, StationPair


logger = logging.getLogger(__name__)

RECORDS_FILE = "records.jsonl"
FETCH_LOG_FILE = "fetch_log.jsonl"


class ArchiveWriter:
    """Single writer for the archive; every write holds one lock"""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ArchiveError(f"Cannot create archive directory {self.root}: {e}") from e
        if not os.access(self.root, os.W_OK):
            raise ArchiveError(f"Archive directory {self.root} is not writable")
        self._lock = threading.Lock()
        self.bytes_written = 0

    def _day_dir(self, record: ArchiveRecord) -> Path:
        return self.root / record.timestamp.strftime("%Y-%m-%d")

    def _append(self, path: Path, payload: dict) -> None:
        line = json.dumps(payload, sort_keys=True) + "\n"
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a", encoding="utf-8") as f:
            f.write(line)
        self.bytes_written += len(line.encode("utf-8"))

    def write_image(self, record: ArchiveRecord, payload: bytes, extension: str) -> ArchiveRecord:
        """
        Store image bytes and append the image record.

        Args:
            record: Image record without payload reference
            payload: Raw image bytes as served
            extension: File extension without dot

        Returns:
            The stored record, with payload_path relative to the archive root
        """
        day = self._day_dir(record)
        name = f"{record.camera_id}_{record.timestamp.strftime('%H%M%S')}.{extension}"
        path = day / "images" / str(record.camera_station_id) / name
        stored = record.model_copy(update={
            "payload_path": path.relative_to(self.root).as_posix(),
            "payload_bytes": len(payload),
        })
        with self._lock:
            if path.exists():
                raise ArchiveError(f"Refusing to overwrite archived image {path}")
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("xb") as f:
                f.write(payload)
            self.bytes_written += len(payload)
            self._append(day / RECORDS_FILE, stored.model_dump(mode="json", exclude={"fetch"}))
            self._log_fetch(stored)
        return stored

    def write_reading(self, record: ArchiveRecord) -> ArchiveRecord:
        with self._lock:
            self._append(self._day_dir(record) / RECORDS_FILE, record.model_dump(mode="json", exclude={"fetch"}))
            self._log_fetch(record)
        return record

    def write_failure(self, record: ArchiveRecord) -> ArchiveRecord:
        """Failures only go to the fetch log"""
        with self._lock:
            self._log_fetch(record)
        return record

    def _log_fetch(self, record: ArchiveRecord) -> None:
        if record.fetch is None:
            return
        entry = {
            "kind": record.kind,
            "ok": record.ok,
            "timestamp": record.timestamp.isoformat(),
            "camera_id": record.camera_id,
            "weather_station_id": record.weather_station_id,
            **record.fetch.model_dump(mode="json"),
        }
        self._append(self._day_dir(record) / FETCH_LOG_FILE, entry)


def read_records(root: Union[str, Path]) -> list[ArchiveRecord]:
    """All stored image and reading records, ordered by day directory then file order"""
    records = []
    for day in sorted(p for p in Path(root).iterdir() if p.is_dir()):
        path = day / RECORDS_FILE
        if not path.is_file():
            continue
        with path.open("r", encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    records.append(ArchiveRecord.model_validate_json(line))
    return records


def read_fetch_log(root: Union[str, Path]) -> list[FetchMetadata]:
    entries = []
    for path in sorted(Path(root).glob(f"*/{FETCH_LOG_FILE}")):
        with path.open("r", encoding="utf-8") as f:
            entries.extend(FetchMetadata.model_validate_json(line) for line in f if line.strip())
    return entries


def load_archive(root: Union[str, Path]) -> tuple[list[ImageObservation], list[GripReading]]:
    """
    Read an archive back as dataset inputs.

    Readings without a grip value (partial records) are skipped; out-of-range grips
    are kept raw and clamped during labelling.

    Returns:
        Tuple of (image observations with absolute image refs, grip readings)
    """
    root = Path(root)
    if not root.is_dir():
        raise ArchiveError(f"Archive directory {root} does not exist")

    images: list[ImageObservation] = []
    readings: list[GripReading] = []
    skipped = 0
    for record in read_records(root):
        if record.kind == "image" and record.payload_path:
            images.append(ImageObservation(
                image_ref=str((root / record.payload_path).resolve()),
                camera_station_id=record.camera_station_id,
                camera_id=record.camera_id,
                timestamp=record.timestamp,
            ))
        elif record.kind == "reading":
            if record.grip is None:
                skipped += 1
                continue
            readings.append(GripReading(
                station_id=record.weather_station_id,
                sensor_index=record.sensor_index,
                timestamp=record.timestamp,
                grip=record.grip,
            ))

    if skipped:
        logger.warning(f"Skipped {skipped} partial reading records without a grip value")
    logger.info(f"Loaded {len(images)} images and {len(readings)} readings from {root}")
    return images, readings


def load_station_pairs(path: Union[str, Path], max_separation_km: float = 1.5) -> list[StationPair]:
    """
    Read the station pair table (YAML list of StationPair fields).

    Args:
        path: YAML file with a list under the top level or under a "pairs" key
        max_separation_km: Largest allowed camera/weather station distance

    Returns:
        Validated station pairs
    """
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"Cannot read station pair table {path}: {e}") from e
    if isinstance(data, dict):
        data = data.get("pairs")
    if not isinstance(data, list) or not data:
        raise ConfigError(f"Station pair table {path} must contain a non-empty list of pairs")

    try:
        return [StationPair(**entry, max_separation_km=max_separation_km) for entry in data]
    except (ValidationError, TypeError) as e:
        raise ConfigError(f"Invalid station pair table {path}: {e}") from e


def pairing_table(pairs: list[StationPair]) -> dict[str, str]:
    """camera_station_id -> weather_station_id"""
    return {pair.camera_station_id: pair.weather_station_id for pair in pairs}
