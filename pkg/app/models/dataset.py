"""
Pydantic models for labelled camera data and dataset manifests
"""
from datetime import datetime, timezone
from typing import Annotated, Literal, Optional

from pydantic import AfterValidator, BaseModel, Field, model_validator


GRIP_MIN = 0.09
GRIP_MAX = 0.82

SplitName = Literal["train", "val", "test"]
SPLITS: tuple[SplitName, ...] = ("train", "val", "test")

MANIFEST_SCHEMA_VERSION = 1


def as_utc(value: datetime) -> datetime:
    """Naive timestamps are read as UTC, aware ones converted to UTC"""
    if value.tzinfo is None:
        return value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc)


UtcDatetime = Annotated[datetime, AfterValidator(as_utc)]


class GripReading(BaseModel):
    """One optical friction sensor reading"""
    station_id: str
    timestamp: UtcDatetime
    grip: float
    sensor_index: Literal[1, 2] = 1


class ImageObservation(BaseModel):
    """One archived camera image awaiting a label"""
    image_ref: str
    camera_station_id: str
    camera_id: Optional[str] = None
    timestamp: UtcDatetime


class LabeledSample(BaseModel):
    """Camera image reference with its friction-factor label"""
    image_ref: str
    camera_station_id: str
    weather_station_id: str
    timestamp: UtcDatetime
    friction_factor: float = Field(..., ge=0.0, le=1.0)


class Normalization(BaseModel):
    """Per-channel statistics of the train split (RGB, images scaled to [0, 1])"""
    mean: tuple[float, float, float] = (0.5, 0.5, 0.5)
    std: tuple[float, float, float] = (0.25, 0.25, 0.25)

    @model_validator(mode="after")
    def _check_std(self) -> "Normalization":
        if any(s <= 0 for s in self.std):
            raise ValueError(f"std must be positive, got {self.std}")
        return self


class PairingReport(BaseModel):
    """Outcome counters of image/reading pairing"""
    matched: int = 0
    dropped: int = 0
    clamped: int = 0


class PairingResult(BaseModel):
    """Labelled samples plus pairing counters"""
    samples: list[LabeledSample]
    report: PairingReport


class DatasetManifest(BaseModel):
    """Balanced, split dataset ready for training"""
    schema_version: int = MANIFEST_SCHEMA_VERSION
    samples: list[LabeledSample]
    split_assignment: dict[str, SplitName]
    normalization: Normalization = Normalization()
    seed: int = 0
    n_bins: int = 10
    image_size: int = 602
    interpolation: str = "bilinear"
    raw_histogram: Optional[list[int]] = None
    pairing: Optional[PairingReport] = None

    @model_validator(mode="after")
    def _check_stations(self) -> "DatasetManifest":
        missing = {s.camera_station_id for s in self.samples} - set(self.split_assignment)
        if missing:
            raise ValueError(f"Stations without a split: {sorted(missing)}")
        return self

    def split_of(self, sample: LabeledSample) -> SplitName:
        return self.split_assignment[sample.camera_station_id]

    def samples_for(self, split: SplitName) -> list[LabeledSample]:
        return [s for s in self.samples if self.split_of(s) == split]

    def stations_for(self, split: SplitName) -> set[str]:
        return {station for station, tag in self.split_assignment.items() if tag == split}
