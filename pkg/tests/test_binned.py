import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_dataset
from ecekde.binned import (
    adaptive_bins,
    assign_simplex_bins,
    doane_bins,
    ece_bin_canonical,
    ece_bin_toplabel,
)
from ecekde.core import LabeledDataset, sample_uniform_simplex
from ecekde.errors import InvalidConfig, TooFewPoints


def test_single_bin_is_global_mean(rng):
    ds = random_dataset(rng, 50, 3)
    hist = assign_simplex_bins(ds, 1)
    assert len(hist.counts) == 1
    np.testing.assert_allclose(hist.H[0], ds.one_hot().mean(axis=0), atol=1e-15)


def test_three_classes_four_bins_gives_sixteen_cells():
    probs = sample_uniform_simplex(3, 10**5, 0)
    hist = assign_simplex_bins(LabeledDataset(probs, np.zeros(10**5, int)), 4)
    assert len(hist.cells) == 16


def test_boundary_point_is_capped():
    hist = assign_simplex_bins(LabeledDataset([[0.999, 0.001]], [0]), 10)
    np.testing.assert_array_equal(hist.cells[hist.bin_of[0]], [9, 0])
    hist = assign_simplex_bins(LabeledDataset([[1.0, 0.0]], [0]), 10)
    np.testing.assert_array_equal(hist.cells[hist.bin_of[0]], [9, 0])


def test_histogram_invariants(rng):
    ds = random_dataset(rng, 300, 4)
    hist = assign_simplex_bins(ds, 3)
    assert hist.counts.sum() == 300
    assert np.all(hist.counts > 0)
    np.testing.assert_allclose(hist.H.sum(axis=1), 1.0, atol=1e-12)


def test_zero_when_points_sit_at_bin_means():
    ds = LabeledDataset([[0.5, 0.5], [0.5, 0.5]], [0, 1])
    assert ece_bin_canonical(ds, 1).value == 0.0


def test_single_bin_hand_case():
    ds = LabeledDataset([[0.3, 0.7], [0.5, 0.5]], [1, 1])
    assert ece_bin_canonical(ds, 1, 1).value == pytest.approx(0.8, abs=1e-15)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_single_bin_closed_form(rng, p):
    ds = random_dataset(rng, 40, 3)
    ybar = ds.one_hot().mean(axis=0)
    expected = np.mean(np.sum(np.abs(ybar - ds.probs) ** p, axis=1))
    assert abs(ece_bin_canonical(ds, 1, p).value - expected) < 1e-12


@given(st.integers(0, 10**6))
def test_binned_row_order_invariance(seed):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, 60, 3)
    shuffled = ds.take(rng.permutation(60))
    assert abs(ece_bin_canonical(ds, 3).value - ece_bin_canonical(shuffled, 3).value) < 1e-12
    for scheme in ("equal", "adaptive"):
        a = ece_bin_toplabel(ds, 10, scheme).value
        assert abs(a - ece_bin_toplabel(shuffled, 10, scheme).value) < 1e-12


def test_toplabel_calibrated_constant_confidence():
    rng = np.random.default_rng(2)
    n = 10**6
    labels = np.where(rng.random(n) < 0.8, 0, 1)
    ds = LabeledDataset(np.tile([0.8, 0.2], (n, 1)), labels)
    assert ece_bin_toplabel(ds, 15, "equal").value < 2e-3


def test_toplabel_single_bin_hand_case():
    ds = LabeledDataset(np.tile([0.9, 0.1], (10, 1)), [0] * 5 + [1] * 5)
    assert ece_bin_toplabel(ds, 1, "equal", 1).value == pytest.approx(0.4, abs=1e-15)


def test_adaptive_counts_balanced(rng):
    counts = np.bincount(adaptive_bins(rng.random(100), 15), minlength=15)
    assert counts.max() - counts.min() <= 1


def test_adaptive_ties_stay_in_lower_bin():
    bins = adaptive_bins(np.array([0.1, 0.5, 0.5, 0.5, 0.9, 0.95]), 3)
    assert len(set(bins[1:4])) == 1 and bins[1] == bins[0]


def test_adaptive_needs_enough_points():
    with pytest.raises(TooFewPoints):
        adaptive_bins(np.arange(5.0), 15)


def test_bin_count_validation(rng):
    with pytest.raises(InvalidConfig):
        ece_bin_canonical(random_dataset(rng, 5, 2), 0)
    with pytest.raises(InvalidConfig):
        ece_bin_toplabel(random_dataset(rng, 5, 2), 2, "quantile")


def test_doane_symmetric_sample():
    x = np.concatenate([np.linspace(-1, 1, 50), -np.linspace(-1, 1, 50)])
    assert doane_bins(x) == 8


def test_doane_three_points():
    assert doane_bins([0.0, 1.0, 2.0]) == 3


def test_doane_constant_sample():
    assert doane_bins(np.full(100, 0.3)) == 8


def test_doane_needs_three_points():
    with pytest.raises(TooFewPoints):
        doane_bins([1.0, 2.0])
