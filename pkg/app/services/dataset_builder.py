"""
Archive to manifest: pairing, labelling, balancing, splitting and normalization
"""
import logging
import os
from datetime import timedelta
from pathlib import Path
from typing import Optional, Union

from app.errors import MissingReadingError
from app.models.dataset import DatasetManifest
from app.models.ingestion import StationPair
from app.services.archive import load_archive, pairing_table
from app.services.image_pipeline import compute_normalization
from app.services.labeling import pair_and_label
from app.services.manifest_store import resolve_image, write_manifest
from app.services.sampling import bin_histogram, split_by_station, weighted_resample


logger = logging.getLogger(__name__)


def build_dataset(
    archive_dir: Union[str, Path],
    pairs: list[StationPair],
    out_dir: Union[str, Path],
    seed: int = 0,
    tolerance: timedelta = timedelta(minutes=10),
    n_bins: int = 10,
    target_size: Optional[int] = None,
    fractions: tuple[float, float, float] = (0.50, 0.15, 0.35),
    image_size: int = 602,
) -> tuple[DatasetManifest, Path]:
    """
    Build a training manifest from a collection archive.

    Args:
        archive_dir: Root of the ingestion archive
        pairs: Station pair table
        out_dir: Directory receiving manifest.jsonl
        seed: Seed for resampling and split tie-breaks
        tolerance: Maximum image/reading time difference
        n_bins: Friction histogram bins
        target_size: Resampled dataset size (None keeps every labelled sample)
        fractions: (train, val, test) targets for the station split
        image_size: Model input side used for normalization statistics

    Returns:
        Tuple of (manifest, manifest path)
    """
    out_dir = Path(out_dir)

    # 1. Read archive and label images
    images, readings = load_archive(archive_dir)
    result = pair_and_label(images, readings, pairing_table(pairs), tolerance)
    if not result.samples:
        raise MissingReadingError(
            f"No image in {archive_dir} has a reading within {tolerance} "
            f"({result.report.dropped} dropped)"
        )

    # 2. Image refs relative to the manifest directory
    samples = [
        s.model_copy(update={"image_ref": Path(os.path.relpath(s.image_ref, out_dir.resolve())).as_posix()})
        for s in result.samples
    ]

    # 3. Balance, split, normalize
    raw_histogram = bin_histogram(samples, n_bins)
    samples = weighted_resample(samples, n_bins, target_size, seed)
    assignment = split_by_station(samples, fractions, seed)
    manifest_path = out_dir / "manifest.jsonl"
    train_paths = [
        resolve_image(manifest_path, s.image_ref)
        for s in samples if assignment[s.camera_station_id] == "train"
    ]

    manifest = DatasetManifest(
        samples=samples,
        split_assignment=assignment,
        normalization=compute_normalization(train_paths, image_size),
        seed=seed,
        n_bins=n_bins,
        image_size=image_size,
        raw_histogram=raw_histogram,
        pairing=result.report,
    )
    write_manifest(manifest, manifest_path)
    logger.info(f"Wrote manifest with {len(samples)} samples over {len(assignment)} stations to {manifest_path}")
    return manifest, manifest_path
