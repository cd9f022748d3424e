"""
Grip-to-friction scaling and image/reading pairing
"""
import bisect
import logging
import math
from collections import defaultdict
from datetime import datetime, timedelta
from typing import Iterable, Mapping

from app.errors import InvalidReadingError, MissingReadingError, PairingConfigError
from app.models.dataset import (
    GRIP_MAX,
    GRIP_MIN,
    GripReading,
    ImageObservation,
    LabeledSample,
    PairingReport,
    PairingResult,
)


logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = timedelta(minutes=10)


def clamp_grip(grip: float) -> tuple[float, bool]:
    """
    Clamp a raw grip factor to the sensor range.

    Returns:
        Tuple of (clamped grip, whether clamping happened)
    """
    if not math.isfinite(grip):
        raise InvalidReadingError(f"Grip factor must be finite, got {grip}")
    clamped = min(max(grip, GRIP_MIN), GRIP_MAX)
    return clamped, clamped != grip


def grip_to_friction(grip: float) -> float:
    """Clamp to [0.09, 0.82] and rescale linearly onto [0, 1]"""
    clamped, _ = clamp_grip(grip)
    return (clamped - GRIP_MIN) / (GRIP_MAX - GRIP_MIN)


def friction_to_grip(friction: float) -> float:
    """Inverse of grip_to_friction on [0, 1]"""
    if not math.isfinite(friction):
        raise InvalidReadingError(f"Friction factor must be finite, got {friction}")
    return GRIP_MIN + friction * (GRIP_MAX - GRIP_MIN)


def aggregate_readings(readings: list[GripReading]) -> float:
    """
    Average the sensors of one station at one time into a single grip value.

    Args:
        readings: 1 or 2 readings sharing station and timestamp

    Returns:
        Mean grip factor
    """
    if not readings:
        raise MissingReadingError("No grip readings to aggregate")
    stations = {r.station_id for r in readings}
    times = {r.timestamp for r in readings}
    if len(stations) > 1 or len(times) > 1:
        raise ValueError(
            f"Readings must share station and timestamp, got stations {sorted(stations)} "
            f"and {len(times)} timestamps"
        )
    return sum(r.grip for r in readings) / len(readings)


def _aggregate_by_station(
    readings: Iterable[GripReading],
) -> dict[str, tuple[list[datetime], list[float]]]:
    """Group readings per station and time, returning sorted times and mean grips"""
    grouped: dict[tuple[str, datetime], list[GripReading]] = defaultdict(list)
    for reading in readings:
        grouped[(reading.station_id, reading.timestamp)].append(reading)

    per_station: dict[str, list[tuple[datetime, float]]] = defaultdict(list)
    for (station, timestamp), group in grouped.items():
        per_station[station].append((timestamp, aggregate_readings(group)))

    timelines = {}
    for station, entries in per_station.items():
        entries.sort(key=lambda e: e[0])
        timelines[station] = ([t for t, _ in entries], [g for _, g in entries])
    return timelines


def _nearest(times: list[datetime], target: datetime) -> int:
    """Index of the time nearest to target; earlier wins ties"""
    pos = bisect.bisect_left(times, target)
    if pos == 0:
        return 0
    if pos == len(times):
        return len(times) - 1
    before, after = times[pos - 1], times[pos]
    return pos - 1 if target - before <= after - target else pos


def pair_and_label(
    images: list[ImageObservation],
    readings: list[GripReading],
    pairing: Mapping[str, str],
    tolerance: timedelta = DEFAULT_TOLERANCE,
) -> PairingResult:
    """
    Label each image with the nearest-in-time aggregated reading of its paired weather station.

    Args:
        images: Archived camera images
        readings: Sensor readings (any order, 1-2 sensors per station and time)
        pairing: camera_station_id -> weather_station_id
        tolerance: Maximum image/reading time difference

    Returns:
        PairingResult with samples and matched/dropped/clamped counters
    """
    timelines = _aggregate_by_station(readings)
    samples: list[LabeledSample] = []
    report = PairingReport()

    for image in images:
        if image.camera_station_id not in pairing:
            raise PairingConfigError(
                f"Camera station {image.camera_station_id} is not in the pairing table"
            )
        weather_station = pairing[image.camera_station_id]
        timeline = timelines.get(weather_station)
        if not timeline:
            report.dropped += 1
            continue

        times, grips = timeline
        idx = _nearest(times, image.timestamp)
        if abs(times[idx] - image.timestamp) > tolerance:
            report.dropped += 1
            continue

        grip, was_clamped = clamp_grip(grips[idx])
        if was_clamped:
            report.clamped += 1
        samples.append(LabeledSample(
            image_ref=image.image_ref,
            camera_station_id=image.camera_station_id,
            weather_station_id=weather_station,
            timestamp=image.timestamp,
            friction_factor=grip_to_friction(grip),
        ))
        report.matched += 1

    if report.dropped:
        logger.warning(f"Dropped {report.dropped} of {len(images)} images without a reading in tolerance")
    if report.clamped:
        logger.warning(f"Clamped {report.clamped} out-of-range grip values")
    return PairingResult(samples=samples, report=report)
