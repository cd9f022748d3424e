"""
Label balancing and station-grouped splitting
"""
import logging
from collections import Counter
from typing import Optional

import numpy as np

from app.errors import SplitError
from app.models.dataset import SPLITS, LabeledSample, SplitName


logger = logging.getLogger(__name__)


# ============ Friction histograms ============

def friction_bin(friction: float, n_bins: int) -> int:
    """Equal-width bin index over [0, 1]; 1.0 falls in the last bin"""
    return min(int(friction * n_bins), n_bins - 1)


def bin_histogram(samples: list[LabeledSample], n_bins: int = 10) -> list[int]:
    counts = [0] * n_bins
    for sample in samples:
        counts[friction_bin(sample.friction_factor, n_bins)] += 1
    return counts


def occupied_ratio(counts: list[int]) -> float:
    """max/min over occupied bins (1.0 when fewer than two bins are occupied)"""
    occupied = [c for c in counts if c > 0]
    if len(occupied) < 2:
        return 1.0
    return max(occupied) / min(occupied)


def inverse_frequency_weights(samples: list[LabeledSample], n_bins: int = 10) -> np.ndarray:
    """
    Per-sample weights proportional to the inverse count of the sample's bin.

    Returns:
        Array of len(samples) weights summing to 1
    """
    bins = np.array([friction_bin(s.friction_factor, n_bins) for s in samples])
    counts = np.bincount(bins, minlength=n_bins)
    weights = 1.0 / counts[bins]
    return weights / weights.sum()


def _allocate(mass: np.ndarray, capacity: np.ndarray, target: int, rng: np.random.Generator) -> np.ndarray:
    """
    Split target draws over bins in proportion to their sampling mass,
    capped at bin capacity; leftovers go to bins that still have samples.
    """
    alloc = np.zeros_like(capacity)
    remaining = target
    open_bins = np.flatnonzero(capacity > 0)
    while remaining > 0 and open_bins.size:
        share = mass[open_bins] / mass[open_bins].sum()
        quotas = np.floor(remaining * share + 1e-9).astype(int)
        if quotas.sum() == 0:
            size = min(remaining, open_bins.size)
            chosen = rng.choice(open_bins, size=size, replace=False, p=share)
            alloc[chosen] += 1
            remaining -= size
        else:
            for b, quota in zip(open_bins, quotas):
                take = min(int(quota), capacity[b] - alloc[b])
                alloc[b] += take
                remaining -= take
        open_bins = np.flatnonzero(alloc < capacity)
    return alloc


def weighted_resample(
    samples: list[LabeledSample],
    n_bins: int = 10,
    target_size: Optional[int] = None,
    seed: int = 0,
) -> list[LabeledSample]:
    """
    Draw a subset without replacement where each sample's weight is the inverse
    count of its friction bin, so every occupied bin carries equal mass.

    Args:
        samples: Labelled samples (non-empty)
        n_bins: Equal-width bins over [0, 1]
        target_size: Samples to draw, capped at availability (None keeps all)
        seed: RNG seed

    Returns:
        Resampled list in original order
    """
    if not samples:
        raise ValueError("Cannot resample an empty sample list")
    if n_bins < 2:
        raise ValueError(f"n_bins must be >= 2, got {n_bins}")
    if target_size is None:
        target_size = len(samples)
    if target_size <= 0:
        raise ValueError(f"target_size must be positive, got {target_size}")

    rng = np.random.default_rng(seed)
    bins = np.array([friction_bin(s.friction_factor, n_bins) for s in samples])
    capacity = np.bincount(bins, minlength=n_bins)
    mass = np.bincount(bins, weights=inverse_frequency_weights(samples, n_bins), minlength=n_bins)
    alloc = _allocate(mass, capacity, min(target_size, len(samples)), rng)

    chosen: list[int] = []
    for b in range(n_bins):
        if alloc[b] == 0:
            continue
        members = np.flatnonzero(bins == b)
        chosen.extend(rng.choice(members, size=int(alloc[b]), replace=False).tolist())

    chosen.sort()
    result = [samples[i] for i in chosen]
    logger.info(
        f"Resampled {len(samples)} -> {len(result)} samples; "
        f"bin ratio {occupied_ratio(capacity.tolist()):.2f} -> "
        f"{occupied_ratio(bin_histogram(result, n_bins)):.2f}"
    )
    return result


# ============ Station-grouped split ============

def split_by_station(
    samples: list[LabeledSample],
    fractions: tuple[float, float, float] = (0.50, 0.15, 0.35),
    seed: int = 0,
) -> dict[str, SplitName]:
    """
    Assign whole camera stations to train/val/test.

    Stations are taken largest first and each goes to the split furthest below its
    target sample mass. When the stations left are just enough to give every empty
    split one station, only empty splits are candidates.

    Args:
        samples: Labelled samples
        fractions: Target (train, val, test) fractions, summing to 1
        seed: Breaks ties between stations of equal size

    Returns:
        Mapping camera_station_id -> split name
    """
    if len(fractions) != len(SPLITS) or any(f < 0 for f in fractions):
        raise ValueError(f"Need three non-negative fractions, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-6:
        raise ValueError(f"Split fractions must sum to 1, got {sum(fractions)}")

    counts = Counter(s.camera_station_id for s in samples)
    if len(counts) < len(SPLITS):
        raise SplitError(f"Need at least {len(SPLITS)} stations to split, got {len(counts)}")

    rng = np.random.default_rng(seed)
    names = sorted(counts)
    tiebreak = dict(zip(names, rng.permutation(len(names)).tolist()))
    ordered = sorted(names, key=lambda s: (-counts[s], tiebreak[s]))

    total = sum(counts.values())
    targets = {split: frac * total for split, frac in zip(SPLITS, fractions)}
    mass = {split: 0 for split in SPLITS}
    members: dict[SplitName, int] = {split: 0 for split in SPLITS}
    assignment: dict[str, SplitName] = {}

    for position, station in enumerate(ordered):
        left = len(ordered) - position
        empty = [split for split in SPLITS if members[split] == 0]
        candidates = empty if left <= len(empty) else list(SPLITS)
        chosen = max(candidates, key=lambda split: (targets[split] - mass[split], -SPLITS.index(split)))
        assignment[station] = chosen
        mass[chosen] += counts[station]
        members[chosen] += 1

    realized = {split: round(mass[split] / total, 3) for split in SPLITS}
    logger.info(f"Split {len(ordered)} stations; realized fractions {realized}")
    return assignment
