"""
Grip scaling, reading aggregation and image/reading pairing
"""
from datetime import datetime, timedelta, timezone

import pytest

from app.errors import InvalidReadingError, MissingReadingError, PairingConfigError
from app.models.dataset import GripReading, ImageObservation
from app.models.ingestion import ArchiveRecord, StationPayload
from app.services.labeling import (
    aggregate_readings,
    clamp_grip,
    friction_to_grip,
    grip_to_friction,
    pair_and_label,
)
from tests.conftest import T0


def _image(station="C1", minutes=0.0, ref="a.jpg"):
    return ImageObservation(image_ref=ref, camera_station_id=station, timestamp=T0 + timedelta(minutes=minutes))


def _reading(grip, minutes=0.0, station="W1", index=1):
    return GripReading(station_id=station, timestamp=T0 + timedelta(minutes=minutes), grip=grip, sensor_index=index)


@pytest.mark.parametrize("grip, friction", [(0.09, 0.0), (0.82, 1.0), (0.455, 0.5), (1.0, 1.0), (0.0, 0.0)])
def test_grip_to_friction(grip, friction):
    assert grip_to_friction(grip) == pytest.approx(friction, abs=1e-12)


def test_friction_to_grip_inverts_scaling():
    for f in (0.0, 0.25, 0.6, 1.0):
        assert grip_to_friction(friction_to_grip(f)) == pytest.approx(f, abs=1e-12)


def test_clamp_reports_clamping():
    assert clamp_grip(0.5) == (0.5, False)
    assert clamp_grip(0.95) == (0.82, True)
    assert clamp_grip(-0.1) == (0.09, True)


@pytest.mark.parametrize("bad", [float("nan"), float("inf")])
def test_non_finite_grip_rejected(bad):
    with pytest.raises(InvalidReadingError):
        grip_to_friction(bad)


def test_aggregate_two_sensors_is_mean():
    assert aggregate_readings([_reading(0.4, index=1), _reading(0.6, index=2)]) == pytest.approx(0.5)


def test_aggregate_empty_raises():
    with pytest.raises(MissingReadingError):
        aggregate_readings([])


def test_aggregate_mixed_stations_raises():
    with pytest.raises(ValueError):
        aggregate_readings([_reading(0.4), _reading(0.6, station="W2")])


def test_nearest_reading_within_tolerance():
    result = pair_and_label([_image()], [_reading(0.3, minutes=-6), _reading(0.7, minutes=4)], {"C1": "W1"})
    assert result.report.matched == 1
    assert result.samples[0].friction_factor == pytest.approx(grip_to_friction(0.7))
    assert result.samples[0].weather_station_id == "W1"


def test_equal_distance_prefers_earlier_reading():
    result = pair_and_label([_image()], [_reading(0.3, minutes=-5), _reading(0.7, minutes=5)], {"C1": "W1"})
    assert result.samples[0].friction_factor == pytest.approx(grip_to_friction(0.3))


def test_reading_outside_tolerance_drops_image():
    result = pair_and_label([_image(), _image(minutes=60, ref="b.jpg")], [_reading(0.5, minutes=11)], {"C1": "W1"})
    assert result.report.matched == 0
    assert result.report.dropped == 2
    assert result.samples == []


def test_custom_tolerance():
    result = pair_and_label([_image()], [_reading(0.5, minutes=11)], {"C1": "W1"}, tolerance=timedelta(minutes=15))
    assert result.report.matched == 1


def test_two_sensors_averaged_before_labelling():
    readings = [_reading(0.3, minutes=2, index=1), _reading(0.5, minutes=2, index=2)]
    result = pair_and_label([_image()], readings, {"C1": "W1"})
    assert result.samples[0].friction_factor == pytest.approx(grip_to_friction(0.4))


def test_out_of_range_grip_clamped_and_counted():
    result = pair_and_label([_image()], [_reading(0.9)], {"C1": "W1"})
    assert result.samples[0].friction_factor == 1.0
    assert result.report.clamped == 1


def test_unknown_camera_station_raises():
    with pytest.raises(PairingConfigError):
        pair_and_label([_image(station="C9")], [_reading(0.5)], {"C1": "W1"})


def test_station_without_readings_drops():
    result = pair_and_label([_image()], [_reading(0.5, station="W2")], {"C1": "W1"})
    assert result.report.dropped == 1


def test_naive_reading_pairs_with_aware_image():
    naive = GripReading(station_id="W1", timestamp=datetime(2023, 2, 1, 11, 58), grip=0.5)
    assert naive.timestamp.tzinfo == timezone.utc
    result = pair_and_label([_image()], [naive], {"C1": "W1"})
    assert result.report.matched == 1
    assert result.samples[0].timestamp == T0


def test_offset_timestamps_normalized_to_utc():
    local = datetime(2023, 2, 1, 13, 0, tzinfo=timezone(timedelta(hours=1)))
    assert ImageObservation(image_ref="a.jpg", camera_station_id="C1", timestamp=local).timestamp == T0
    payload = StationPayload.model_validate({
        "station_id": "W1", "timestamp": "2023-02-01T12:00:00", "sensors": [{"index": 1, "grip": 0.5}],
    })
    assert payload.timestamp == T0 and payload.timestamp.tzinfo == timezone.utc
    record = ArchiveRecord(kind="reading", weather_station_id="W1", timestamp=datetime(2023, 2, 1, 12, 0), grip=0.5)
    assert record.timestamp == T0
