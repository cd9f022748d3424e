"""
Pydantic models for roadside data collection
"""
from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from app.models.dataset import GRIP_MAX, GRIP_MIN, UtcDatetime


class StationPair(BaseModel):
    """A camera station matched with the weather station that labels it"""
    camera_station_id: str
    weather_station_id: str
    camera_ids: list[str] = Field(..., min_length=1, max_length=2)
    sensor_count: Literal[1, 2] = 1
    separation_km: float = Field(default=0.0, ge=0.0)
    max_separation_km: float = Field(default=1.5, gt=0.0, exclude=True)

    @model_validator(mode="after")
    def _check_separation(self) -> "StationPair":
        if self.separation_km > self.max_separation_km:
            raise ValueError(
                f"Stations {self.camera_station_id}/{self.weather_station_id} are "
                f"{self.separation_km} km apart (max {self.max_separation_km})"
            )
        return self


# ============ Wire payloads ============

class SensorValue(BaseModel):
    """One sensor entry in a station payload; grip may be missing"""
    index: Literal[1, 2]
    grip: Optional[float] = None


class StationPayload(BaseModel):
    """Body of GET /stations/{station_id}/sensor-values"""
    station_id: str
    timestamp: UtcDatetime
    sensors: list[SensorValue] = Field(..., min_length=1, max_length=2)


# ============ Archive ============

class FetchMetadata(BaseModel):
    """How a record was fetched"""
    url: str
    status: Optional[int] = None
    latency_ms: float = 0.0
    attempts: int = 1
    error: Optional[str] = None


class ArchiveRecord(BaseModel):
    """One immutable archive entry (image or sensor reading)"""
    kind: Literal["image", "reading"]
    ok: bool = True
    camera_station_id: Optional[str] = None
    camera_id: Optional[str] = None
    weather_station_id: Optional[str] = None
    timestamp: UtcDatetime
    payload_path: Optional[str] = None
    payload_bytes: int = 0
    sensor_index: Optional[Literal[1, 2]] = None
    grip: Optional[float] = None
    partial: bool = False
    out_of_range: bool = False
    fetch: Optional[FetchMetadata] = None

    @field_validator("grip")
    @classmethod
    def _finite_grip(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and value != value:
            raise ValueError("grip must not be NaN")
        return value

    @model_validator(mode="after")
    def _flag_range(self) -> "ArchiveRecord":
        if self.grip is not None:
            self.out_of_range = not (GRIP_MIN <= self.grip <= GRIP_MAX)
        return self


class CollectionSummary(BaseModel):
    """Result of a collection run"""
    ticks: int = 0
    images: int = 0
    readings: int = 0
    failures: int = 0
    partial_readings: int = 0
    out_of_range: int = 0
    bytes_written: int = 0
    cancelled: bool = False

    @property
    def records_written(self) -> int:
        return self.images + self.readings
