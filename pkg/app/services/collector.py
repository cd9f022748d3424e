"""
Collection scheduler
Polls every camera and weather station of the pair table once per tick.
"""
import logging
import math
import threading
import time
from concurrent.futures import Future, ThreadPoolExecutor
from datetime import datetime, timedelta, timezone
from typing import Callable, Optional

from app.models.ingestion import ArchiveRecord, CollectionSummary, StationPair
from app.services.archive import ArchiveWriter
from app.services.roadside_client import RoadDataClient, poll_camera, poll_weather


logger = logging.getLogger(__name__)

Clock = Callable[[], datetime]


def _utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def tick_count(duration: timedelta, cadence: timedelta) -> int:
    """ceil(duration / cadence); zero for a zero-length run"""
    if cadence <= timedelta(0):
        raise ValueError(f"Cadence must be positive, got {cadence}")
    if duration <= timedelta(0):
        return 0
    return math.ceil(duration / cadence)


def describe_schedule(pairs: list[StationPair], duration: timedelta, cadence: timedelta) -> list[str]:
    """Human-readable plan of a collection run (used by dry runs)"""
    ticks = tick_count(duration, cadence)
    cameras = sum(len(p.camera_ids) for p in pairs)
    lines = [
        f"{ticks} tick(s) every {cadence}, {len(pairs)} station pair(s), {cameras} camera(s)",
        f"at most {ticks * cameras} image record(s) and {ticks * sum(p.sensor_count for p in pairs)} reading record(s)",
    ]
    for pair in pairs:
        lines.append(
            f"  {pair.camera_station_id} -> {pair.weather_station_id}: "
            f"cameras {', '.join(pair.camera_ids)}, {pair.sensor_count} sensor(s)"
        )
    return lines


def _tally(summary: CollectionSummary, records: list[ArchiveRecord]) -> None:
    for record in records:
        if not record.ok:
            summary.failures += 1
        elif record.kind == "image":
            summary.images += 1
        else:
            summary.readings += 1
            summary.partial_readings += int(record.partial)
            summary.out_of_range += int(record.out_of_range)


def run_collection(
    pairs: list[StationPair],
    client: RoadDataClient,
    writer: ArchiveWriter,
    duration: timedelta,
    cadence: timedelta = timedelta(minutes=20),
    clock: Clock = _utc_now,
    stop_event: Optional[threading.Event] = None,
) -> CollectionSummary:
    """
    Poll all pairs at a fixed cadence for a duration.

    Polls of one tick run concurrently on a pool of client.max_concurrency threads;
    a failing poll becomes a failure record and never blocks the others.
    Setting stop_event (or Ctrl-C) ends the run after in-flight polls finish.

    Args:
        pairs: Station pair table
        client: Shared HTTP client
        writer: Archive writer
        duration: Total collection time; ticks = ceil(duration / cadence)
        cadence: Time between ticks
        clock: Source of tick timestamps
        stop_event: Cancels the schedule when set

    Returns:
        CollectionSummary with record, failure and byte counts
    """
    ticks = tick_count(duration, cadence)
    stop_event = stop_event or threading.Event()
    summary = CollectionSummary()
    bytes_before = writer.bytes_written
    started = time.monotonic()

    logger.info(f"Collecting {ticks} tick(s) for {len(pairs)} pair(s) into {writer.root}")
    with ThreadPoolExecutor(max_workers=client.max_concurrency) as pool:
        for tick in range(ticks):
            delay = started + tick * cadence.total_seconds() - time.monotonic()
            try:
                if delay > 0 and stop_event.wait(delay):
                    break
                if stop_event.is_set():
                    break
                timestamp = clock()
                futures: list[Future] = []
                for pair in pairs:
                    for camera_id in pair.camera_ids:
                        futures.append(pool.submit(
                            poll_camera, camera_id, pair.camera_station_id, client, writer, timestamp
                        ))
                    futures.append(pool.submit(
                        poll_weather, pair.weather_station_id, client, writer, pair.sensor_count, timestamp
                    ))

                for future in futures:
                    try:
                        result = future.result()
                    except Exception as e:
                        logger.error(f"Poll failed at tick {tick}: {type(e).__name__}: {e}")
                        summary.failures += 1
                        continue
                    _tally(summary, result if isinstance(result, list) else [result])
                summary.ticks += 1
            except KeyboardInterrupt:
                logger.warning("Collection interrupted; waiting for in-flight polls")
                stop_event.set()
                summary.cancelled = True
                break

    summary.bytes_written = writer.bytes_written - bytes_before
    logger.info(
        f"Collection finished: {summary.images} images, {summary.readings} readings, "
        f"{summary.failures} failures, {summary.bytes_written} bytes"
    )
    return summary
