"""
Procedural roadside scenes with a known friction signal
Low friction renders as bright, smooth, low-contrast road (snow/ice);
high friction as dark, fine, high-contrast asphalt texture.
"""
import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image, ImageDraw

from app.models.dataset import DatasetManifest, LabeledSample
from app.models.synthetic import SceneSpec
from app.services.image_pipeline import compute_normalization
from app.services.manifest_store import write_manifest
from app.services.sampling import bin_histogram, split_by_station, weighted_resample


logger = logging.getLogger(__name__)

SYNTHETIC_EPOCH = datetime(2023, 2, 1, tzinfo=timezone.utc)
SAMPLE_INTERVAL = timedelta(minutes=20)


def _station_rng(station_id: str) -> np.random.Generator:
    return np.random.default_rng(zlib.crc32(station_id.encode("utf-8")))


def _road_polygon(station_id: str, width: int, height: int) -> tuple[float, list[tuple[float, float]]]:
    """Horizon row and trapezoid corners of the road for a station's camera view"""
    rng = _station_rng(station_id)
    horizon = height * rng.uniform(0.35, 0.5)
    bottom_width = width * rng.uniform(0.7, 0.95)
    top_width = width * rng.uniform(0.05, 0.15)
    bottom_center = width * rng.uniform(0.4, 0.6)
    top_center = bottom_center + width * rng.uniform(-0.1, 0.1)
    corners = [
        (top_center - top_width / 2, horizon),
        (top_center + top_width / 2, horizon),
        (bottom_center + bottom_width / 2, height - 1),
        (bottom_center - bottom_width / 2, height - 1),
    ]
    return horizon, corners


def road_mask(station_id: str, width: int = 1280, height: int = 720) -> np.ndarray:
    """Boolean (height, width) mask of the road region"""
    _, corners = _road_polygon(station_id, width, height)
    canvas = Image.new("L", (width, height), 0)
    ImageDraw.Draw(canvas).polygon(corners, fill=255)
    return np.asarray(canvas) > 0


def _smooth_noise(rng: np.random.Generator, width: int, height: int, cell: int) -> np.ndarray:
    """Unit-variance low-frequency noise via bilinear upsampling of a coarse grid"""
    coarse = rng.standard_normal((max(2, height // cell), max(2, width // cell))).astype(np.float32)
    field = np.asarray(Image.fromarray(coarse, mode="F").resize((width, height), Image.BILINEAR))
    return (field - field.mean()) / (field.std() + 1e-6)


def generate_scene(spec: SceneSpec) -> np.ndarray:
    """
    Render one roadside image.

    Args:
        spec: Scene description; identical specs give identical pixels

    Returns:
        uint8 array of shape (height, width, 3)
    """
    w, h = spec.width, spec.height
    station = _station_rng(spec.station_id)
    sky_color = station.uniform([0.45, 0.55, 0.7], [0.7, 0.8, 0.95])
    terrain_color = station.uniform([0.2, 0.3, 0.15], [0.45, 0.5, 0.35])
    horizon, _ = _road_polygon(spec.station_id, w, h)
    mask = road_mask(spec.station_id, w, h)

    # Separate streams so background and clutter never depend on friction
    background_rng = np.random.default_rng([spec.seed, 1])
    texture_rng = np.random.default_rng([spec.seed, 2])
    clutter_rng = np.random.default_rng([spec.seed, 3])

    # 1. Sky and terrain
    rows = np.arange(h, dtype=np.float32)[:, None, None]
    sky_fade = np.clip(rows / max(horizon, 1.0), 0.0, 1.0)
    sky = sky_color * (0.8 + 0.2 * sky_fade)
    terrain = terrain_color * (1.0 + 0.15 * _smooth_noise(background_rng, w, h, 32)[..., None])
    image = np.where(rows < horizon, sky, terrain).astype(np.float32)
    image = np.broadcast_to(image, (h, w, 3)).copy()

    # 2. Clutter outside the road
    clutter = Image.new("RGB", (w, h), (0, 0, 0))
    clutter_alpha = Image.new("L", (w, h), 0)
    draw, draw_alpha = ImageDraw.Draw(clutter), ImageDraw.Draw(clutter_alpha)
    for _ in range(spec.clutter):
        cx, cy = clutter_rng.uniform(0, w), clutter_rng.uniform(0, h)
        rx, ry = clutter_rng.uniform(0.01, 0.06) * w, clutter_rng.uniform(0.02, 0.12) * h
        color = tuple(int(c) for c in clutter_rng.integers(0, 256, size=3))
        box = [cx - rx, cy - ry, cx + rx, cy + ry]
        if clutter_rng.uniform() < 0.5:
            draw.ellipse(box, fill=color)
            draw_alpha.ellipse(box, fill=255)
        else:
            draw.rectangle(box, fill=color)
            draw_alpha.rectangle(box, fill=255)
    clutter_on = (np.asarray(clutter_alpha) > 0) & ~mask
    image[clutter_on] = np.asarray(clutter, dtype=np.float32)[clutter_on] / 255.0

    # 3. Road texture encoding friction
    f = spec.friction
    fine = texture_rng.standard_normal((h, w)).astype(np.float32)
    smooth = _smooth_noise(texture_rng, w, h, 12)
    texture = f * fine + (1.0 - f) * smooth
    luminance = 0.85 - 0.6 * f
    contrast = 0.04 + 0.22 * f
    tint = np.array([0.94 + 0.06 * f, 0.97 + 0.03 * f, 1.0], dtype=np.float32)
    road = (luminance + contrast * texture)[..., None] * tint
    if spec.mask_road:
        road = np.full_like(road, 0.5)
    image[mask] = road[mask]

    # 4. Lighting
    image *= 0.6 + 0.4 * spec.lighting
    return (np.clip(image, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


# ============ Dataset generation ============

def synthetic_station_ids(stations: int) -> list[str]:
    return [f"SYN-{i:03d}" for i in range(stations)]


def draw_frictions(n: int, seed: int, skew: bool = False) -> np.ndarray:
    """Uniform labels on [0, 1], or Beta(5, 2) skewed towards high friction"""
    rng = np.random.default_rng([seed, 0])
    return rng.beta(5.0, 2.0, size=n) if skew else rng.uniform(0.0, 1.0, size=n)


def scene_specs(
    n: int,
    stations: int,
    seed: int,
    width: int = 1280,
    height: int = 720,
    skew: bool = False,
    mask_road: bool = False,
) -> list[SceneSpec]:
    """Deterministic scene list; sample i belongs to station i mod stations"""
    if stations < 1 or n < stations:
        raise ValueError(f"Need n >= stations >= 1, got n={n}, stations={stations}")
    frictions = draw_frictions(n, seed, skew)
    ids = synthetic_station_ids(stations)
    specs = []
    for index in range(n):
        rng = np.random.default_rng([seed, index, 7])
        specs.append(SceneSpec(
            friction=float(frictions[index]),
            seed=int(np.random.SeedSequence([seed, index]).generate_state(1)[0]),
            width=width,
            height=height,
            station_id=ids[index % stations],
            lighting=float(rng.uniform(0.2, 1.0)),
            clutter=int(rng.integers(2, 10)),
            mask_road=mask_road,
        ))
    return specs


def _render_to_file(job: tuple[SceneSpec, str]) -> str:
    spec, path = job
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(generate_scene(spec)).save(path, format="PNG")
    return path


def generate_dataset(
    n: int,
    stations: int,
    seed: int,
    out_dir: Union[str, Path],
    width: int = 1280,
    height: int = 720,
    skew: bool = False,
    mask_road: bool = False,
    image_size: int = 602,
    target_size: Optional[int] = None,
    n_bins: int = 10,
    fractions: tuple[float, float, float] = (0.50, 0.15, 0.35),
    workers: int = 1,
) -> tuple[DatasetManifest, Path]:
    """
    Render n synthetic samples over synthetic stations and write a manifest.

    Args:
        n: Number of images (>= stations)
        stations: Number of synthetic stations
        seed: Master seed; sample i uses randomness derived from (seed, i)
        out_dir: Directory receiving images/ and manifest.jsonl
        width, height: Source image resolution
        skew: Draw labels from a skewed distribution
        mask_road: Replace the road region with flat gray (cue-locality checks)
        image_size: Model input side used for normalization statistics
        target_size: When given, weighted resampling down to this size
        n_bins: Histogram bins for resampling and reporting
        fractions: (train, val, test) targets for the station split
        workers: Render processes

    Returns:
        Tuple of (manifest, manifest path)
    """
    out_dir = Path(out_dir)
    specs = scene_specs(n, stations, seed, width, height, skew, mask_road)
    paths = [out_dir / "images" / spec.station_id / f"{i:06d}.png" for i, spec in enumerate(specs)]
    jobs = [(spec, str(path)) for spec, path in zip(specs, paths)]

    logger.info(f"Rendering {n} synthetic scenes over {stations} stations with {workers} worker(s)")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_render_to_file, jobs, chunksize=8))
    else:
        for job in jobs:
            _render_to_file(job)

    samples = [
        LabeledSample(
            image_ref=path.relative_to(out_dir).as_posix(),
            camera_station_id=spec.station_id,
            weather_station_id=spec.station_id.replace("SYN-", "SYNW-"),
            timestamp=SYNTHETIC_EPOCH + SAMPLE_INTERVAL * (i // stations),
            friction_factor=spec.friction,
        )
        for i, (spec, path) in enumerate(zip(specs, paths))
    ]
    raw_histogram = bin_histogram(samples, n_bins)
    if target_size is not None:
        samples = weighted_resample(samples, n_bins, target_size, seed)

    assignment = split_by_station(samples, fractions, seed)
    train_paths = [out_dir / s.image_ref for s in samples if assignment[s.camera_station_id] == "train"]
    manifest = DatasetManifest(
        samples=samples,
        split_assignment=assignment,
        normalization=compute_normalization(train_paths, image_size),
        seed=seed,
        n_bins=n_bins,
        image_size=image_size,
        raw_histogram=raw_histogram,
    )
    manifest_path = write_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest, manifest_path
