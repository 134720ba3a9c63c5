import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clinfusion.errors import ConfigError, DataError
from clinfusion.vitals import (N_SIGNALS, N_STEPS, PopulationStats, VitalEvent, VitalSequence, discretize, impute,
                               read_index, read_matrix, split_cohort, standardize, write_index, write_matrix)


def stats_with_default(value, L=N_SIGNALS):
    return PopulationStats(np.zeros(L), np.ones(L), np.full(L, value))


def test_bin_arithmetic():
    seq = discretize([VitalEvent("s", 0, 3.5, 1.0)], "s")
    assert seq.mask[1, 0] and seq.mask.sum() == 1


def test_last_event_in_bin_wins():
    seq = discretize([VitalEvent("s", 2, 3.9, 9.0), VitalEvent("s", 2, 2.0, 1.0)], "s")
    assert seq.values[1, 2] == 9.0


def test_window_edge_and_errors():
    seq = discretize([VitalEvent("s", 0, 48.0, 1.0), VitalEvent("s", 0, 47.99, 2.0)], "s")
    assert seq.values[23, 0] == 2.0 and seq.mask.sum() == 1
    with pytest.raises(DataError):
        discretize([VitalEvent("s", 0, -0.1, 1.0)], "s")
    with pytest.raises(DataError):
        discretize([VitalEvent("s", 17, 1.0, 1.0)], "s")


def test_unobserved_signal_fully_masked():
    seq = discretize([VitalEvent("s", 0, 1.0, 1.0)], "s")
    assert not seq.mask[:, 5].any()


@settings(max_examples=30)
@given(st.lists(st.tuples(st.integers(0, 16), st.floats(0, 100), st.floats(-5, 5)), max_size=60))
def test_shape_always_24_by_17(events):
    seq = discretize([VitalEvent("s", k, t, v) for k, t, v in events], "s")
    assert seq.values.shape == (N_STEPS, N_SIGNALS) == (24, 17)
    imp = impute(seq, stats_with_default(0.0))
    assert imp.values.shape == (24, 17)
    assert not np.isnan(imp.values).any()
    assert np.array_equal(imp.mask, seq.mask)
    assert np.array_equal(impute(imp, stats_with_default(0.0)).values, imp.values)


def test_impute_forward_fill_and_default():
    vals = np.full((4, 1), np.nan)
    vals[1, 0] = 7.0
    seq = VitalSequence("s", vals, ~np.isnan(vals))
    out = impute(seq, stats_with_default(-3.0, L=1))
    assert list(out.values[:, 0]) == [-3.0, 7.0, 7.0, 7.0]
    assert list(out.mask[:, 0]) == [False, True, False, False]


def test_impute_full_and_empty_columns():
    vals = np.array([[1.0, np.nan], [2.0, np.nan]])
    out = impute(VitalSequence("s", vals, ~np.isnan(vals)), stats_with_default(5.0, L=2))
    assert list(out.values[:, 0]) == [1.0, 2.0]
    assert list(out.values[:, 1]) == [5.0, 5.0]


def test_standardize():
    stats = PopulationStats(np.array([2.0, 4.0]), np.array([0.5, 0.0]), np.array([2.0, 4.0]))
    vals = np.array([[2.0, 4.0], [2.5, 4.0]])
    out = standardize(VitalSequence("s", vals, np.ones((2, 2), bool)), stats)
    assert list(out.values[:, 0]) == [0.0, 1.0]
    assert list(out.values[:, 1]) == [0.0, 0.0]


def test_population_stats_train_only():
    seq = discretize([VitalEvent("a", 0, 1.0, 2.0), VitalEvent("a", 0, 3.0, 4.0)], "a")
    stats = PopulationStats.from_train([seq], ["train"])
    assert stats.mean[0] == 3.0 and stats.std[0] == 1.0
    assert np.all(stats.std >= 0)
    with pytest.raises(DataError):
        PopulationStats.from_train([seq], ["test"])


def _split_counts(tags):
    return {k: sum(1 for v in tags.values() if v == k) for k in ("train", "val", "test")}


def test_split_single_stay_patients():
    ids = [f"s{i}" for i in range(100)]
    tags = split_cohort(ids, ids, seed=0)
    assert _split_counts(tags) == {"train": 70, "val": 15, "test": 15}
    assert tags == split_cohort(ids, ids, seed=0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 3), min_size=3, max_size=400), st.integers(0, 10_000))
def test_split_grouped_proportions_within_one_stay(stays_per_patient, seed):
    ids, pids = [], []
    for p, k in enumerate(stays_per_patient):
        for j in range(k):
            ids.append(f"p{p}_{j}")
            pids.append(f"p{p}")
    n = len(ids)
    if n < 3:
        return
    tags = split_cohort(ids, pids, seed)
    counts = _split_counts(tags)
    bounds = np.round(np.cumsum([0.7, 0.15, 0.15]) * n)
    # each cumulative cut lands within half a (<= 3 stay) patient of its rounded target
    assert abs(counts["train"] - bounds[0]) <= 1
    assert abs(counts["train"] + counts["val"] - bounds[1]) <= 1
    assert counts["test"] == n - counts["train"] - counts["val"]
    for p in set(pids):
        assert len({tags[s] for s, q in zip(ids, pids) if q == p}) == 1


def test_split_patient_with_three_stays_stays_together():
    ids = ["a1", "a2", "a3"] + [f"b{i}" for i in range(20)]
    pids = ["a"] * 3 + [f"b{i}" for i in range(20)]
    tags = split_cohort(ids, pids, seed=4)
    assert tags["a1"] == tags["a2"] == tags["a3"]


def test_split_needs_three_stays():
    with pytest.raises(ConfigError):
        split_cohort(["a", "b"], ["a", "b"], 0)


def test_matrix_and_index_round_trip(tmp_path, rng):
    arr = rng.normal(size=(3, 24, 17))
    write_matrix(tmp_path / "m.bin", arr)
    assert np.array_equal(read_matrix(tmp_path / "m.bin"), arr)
    assert (tmp_path / "m.bin").stat().st_size == 24 + arr.size * 8
    write_index(tmp_path / "i.ids", ["x", "y"])
    assert read_index(tmp_path / "i.ids") == ["x", "y"]
