"""
Weighted resampling and station-grouped splitting
"""
import numpy as np
import pytest

from app.errors import SplitError
from app.models.dataset import SPLITS
from app.services.sampling import (
    bin_histogram,
    friction_bin,
    inverse_frequency_weights,
    occupied_ratio,
    split_by_station,
    weighted_resample,
)
from tests.conftest import make_samples


def test_friction_bins_cover_unit_interval():
    assert friction_bin(0.0, 10) == 0
    assert friction_bin(0.1, 10) == 1
    assert friction_bin(0.95, 10) == 9
    assert friction_bin(1.0, 10) == 9


def test_histogram_sums_to_sample_count():
    samples = make_samples(np.random.default_rng(0).uniform(size=137))
    counts = bin_histogram(samples, 10)
    assert sum(counts) == 137
    assert counts == [sum(1 for s in samples if min(int(s.friction_factor * 10), 9) == b) for b in range(10)]


def test_inverse_frequency_weights_equalize_bin_mass():
    samples = make_samples([0.05] * 90 + [0.55] * 10)
    weights = inverse_frequency_weights(samples, 10)
    assert weights.sum() == pytest.approx(1.0)
    assert weights[:90].sum() == pytest.approx(0.5)
    assert weights[90:].sum() == pytest.approx(0.5)


def test_two_bin_example_resamples_to_equal_counts():
    samples = make_samples([0.05] * 90 + [0.55] * 10)
    for seed in range(20):
        counts = bin_histogram(weighted_resample(samples, 10, target_size=20, seed=seed), 10)
        assert abs(counts[0] - 10) <= 1
        assert abs(counts[5] - 10) <= 1


def test_resampling_flattens_random_skews():
    rng = np.random.default_rng(1)
    for trial in range(100):
        a, b = rng.uniform(2.0, 8.0, size=2)
        samples = make_samples(rng.beta(a, b, size=600))
        before = occupied_ratio(bin_histogram(samples, 10))
        after = occupied_ratio(bin_histogram(weighted_resample(samples, 10, target_size=200, seed=trial), 10))
        assert after <= before, (trial, a, b, before, after)


def test_occupied_bins_get_equal_shares_from_weights():
    samples = make_samples([0.05] * 50 + [0.35] * 30 + [0.75] * 20)
    mass = np.bincount([friction_bin(s.friction_factor, 10) for s in samples],
                       weights=inverse_frequency_weights(samples, 10), minlength=10)
    assert list(mass[[0, 3, 7]]) == pytest.approx([1 / 3] * 3)
    counts = bin_histogram(weighted_resample(samples, 10, target_size=30, seed=0), 10)
    assert [counts[0], counts[3], counts[7]] == [10, 10, 10]


def test_resampling_is_deterministic_and_order_preserving():
    samples = make_samples(np.random.default_rng(2).uniform(size=80))
    first = weighted_resample(samples, 10, target_size=30, seed=4)
    second = weighted_resample(samples, 10, target_size=30, seed=4)
    assert first == second
    positions = [samples.index(s) for s in first]
    assert positions == sorted(positions)
    assert len({id(s) for s in first}) == 30


def test_target_larger_than_dataset_keeps_everything():
    samples = make_samples([0.1, 0.2, 0.3])
    assert weighted_resample(samples, 10, target_size=50, seed=0) == samples


def test_resample_rejects_empty_input():
    with pytest.raises(ValueError):
        weighted_resample([], 10)


def _station_samples(counts: list[int]):
    frictions, stations = [], []
    for k, count in enumerate(counts):
        frictions += [0.5] * count
        stations += [f"S{k}"] * count
    samples = make_samples(frictions)
    return [s.model_copy(update={"camera_station_id": st}) for s, st in zip(samples, stations)]


def test_split_example_assignment():
    assignment = split_by_station(_station_samples([100, 60, 40]), seed=0)
    assert assignment == {"S0": "train", "S1": "test", "S2": "val"}


def test_split_never_leaks_stations_and_fills_every_split():
    rng = np.random.default_rng(7)
    for trial in range(1000):
        counts = rng.integers(1, 20, size=int(rng.integers(3, 9))).tolist()
        samples = _station_samples(counts)
        assignment = split_by_station(samples, seed=trial)

        assert set(assignment) == {f"S{k}" for k in range(len(counts))}
        assert {assignment[s.camera_station_id] for s in samples} == set(SPLITS)
        for split in SPLITS:
            members = {s.camera_station_id for s in samples if assignment[s.camera_station_id] == split}
            others = {s.camera_station_id for s in samples if assignment[s.camera_station_id] != split}
            assert not members & others


def test_split_is_deterministic_for_seed():
    samples = _station_samples([5, 5, 5, 5, 5, 5])
    assert split_by_station(samples, seed=3) == split_by_station(samples, seed=3)


def test_split_needs_three_stations():
    with pytest.raises(SplitError):
        split_by_station(_station_samples([10, 10]))


def test_split_fractions_validated():
    with pytest.raises(ValueError):
        split_by_station(_station_samples([1, 1, 1]), fractions=(0.5, 0.5, 0.5))
