# Services
from app.services.archive import ArchiveWriter, load_archive, load_station_pairs
from app.services.collector import run_collection
from app.services.dataset_builder import build_dataset
from app.services.evaluator import evaluate, mae, predict, rmse
from app.services.experiments import run_ablations, run_benchmark
from app.services.roadside_client import RoadDataClient
from app.services.roadside_source import FixtureSource, SyntheticSource, get_roadside_source
from app.services.synthetic_scenes import generate_dataset, generate_scene
from app.services.table_export import TableExporter, get_table_exporter
from app.services.trainer import grid_search, train

__all__ = [
    "ArchiveWriter",
    "load_archive",
    "load_station_pairs",
    "run_collection",
    "build_dataset",
    "evaluate",
    "mae",
    "predict",
    "rmse",
    "run_ablations",
    "run_benchmark",
    "RoadDataClient",
    "FixtureSource",
    "SyntheticSource",
    "get_roadside_source",
    "generate_dataset",
    "generate_scene",
    "TableExporter",
    "get_table_exporter",
    "train",
    "grid_search",
]
