# Models
from app.models.dataset import (
    DatasetManifest,
    GripReading,
    ImageObservation,
    LabeledSample,
    Normalization,
    PairingReport,
    PairingResult,
)
from app.models.evaluation import ComparisonTable, MetricsReport, TableRow
from app.models.ingestion import (
    ArchiveRecord,
    CollectionSummary,
    FetchMetadata,
    StationPair,
    StationPayload,
)
from app.models.network import BackboneSpec, ModelConfig
from app.models.synthetic import SceneSpec
from app.models.training import EpochStats, GridSearchResult, RunReport, ScheduleSpec, TrainConfig

__all__ = [
    "ArchiveRecord",
    "BackboneSpec",
    "CollectionSummary",
    "ComparisonTable",
    "DatasetManifest",
    "EpochStats",
    "FetchMetadata",
    "GridSearchResult",
    "GripReading",
    "ImageObservation",
    "LabeledSample",
    "MetricsReport",
    "ModelConfig",
    "Normalization",
    "PairingReport",
    "PairingResult",
    "RunReport",
    "SceneSpec",
    "ScheduleSpec",
    "StationPair",
    "StationPayload",
    "TableRow",
    "TrainConfig",
]
