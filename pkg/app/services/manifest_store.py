"""
Line-delimited manifest file: one header record, then one record per sample
"""
import json
from pathlib import Path
from typing import Union

from app.errors import ConfigError
from app.models.dataset import (
    MANIFEST_SCHEMA_VERSION,
    DatasetManifest,
    LabeledSample,
    Normalization,
    PairingReport,
)


def _header(manifest: DatasetManifest) -> dict:
    return {
        "kind": "header",
        "schema_version": manifest.schema_version,
        "seed": manifest.seed,
        "n_bins": manifest.n_bins,
        "image_size": manifest.image_size,
        "interpolation": manifest.interpolation,
        "normalization": manifest.normalization.model_dump(mode="json"),
        "split_assignment": dict(sorted(manifest.split_assignment.items())),
        "raw_histogram": manifest.raw_histogram,
        "pairing": manifest.pairing.model_dump(mode="json") if manifest.pairing else None,
        "sample_count": len(manifest.samples),
    }


def _record(sample: LabeledSample, split: str) -> dict:
    return {
        "image": sample.image_ref,
        "camera_station_id": sample.camera_station_id,
        "weather_station_id": sample.weather_station_id,
        "timestamp": sample.timestamp.isoformat(),
        "friction_factor": f"{sample.friction_factor:.6f}",
        "split": split,
    }


def write_manifest(manifest: DatasetManifest, path: Union[str, Path]) -> Path:
    """
    Write a manifest as JSON lines with sorted keys (byte-stable for equal input).

    Args:
        manifest: Manifest to write
        path: Destination .jsonl file

    Returns:
        Path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(_header(manifest), sort_keys=True)]
    for sample in manifest.samples:
        lines.append(json.dumps(_record(sample, manifest.split_of(sample)), sort_keys=True))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_manifest(path: Union[str, Path]) -> DatasetManifest:
    """Read a manifest written by write_manifest"""
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        lines = [line for line in f if line.strip()]
    if not lines:
        raise ConfigError(f"Manifest {path} is empty")

    header = json.loads(lines[0])
    if header.get("kind") != "header":
        raise ConfigError(f"Manifest {path} has no header record")
    if header.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise ConfigError(
            f"Manifest {path} has schema version {header.get('schema_version')}, "
            f"expected {MANIFEST_SCHEMA_VERSION}"
        )

    samples = []
    for line in lines[1:]:
        record = json.loads(line)
        samples.append(LabeledSample(
            image_ref=record["image"],
            camera_station_id=record["camera_station_id"],
            weather_station_id=record["weather_station_id"],
            timestamp=record["timestamp"],
            friction_factor=float(record["friction_factor"]),
        ))

    return DatasetManifest(
        samples=samples,
        split_assignment=header["split_assignment"],
        normalization=Normalization.model_validate(header["normalization"]),
        seed=header["seed"],
        n_bins=header["n_bins"],
        image_size=header["image_size"],
        interpolation=header["interpolation"],
        raw_histogram=header.get("raw_histogram"),
        pairing=PairingReport.model_validate(header["pairing"]) if header.get("pairing") else None,
    )


def resolve_image(manifest_path: Union[str, Path], image_ref: str) -> Path:
    """Image refs are relative to the manifest's directory unless absolute"""
    ref = Path(image_ref)
    return ref if ref.is_absolute() else Path(manifest_path).parent / ref
