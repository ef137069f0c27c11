import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_dataset
from ecekde.core import LabeledDataset
from ecekde.debias import (
    compute_moments,
    cond_expectation_debiased,
    debias_ratio_means,
    debias_ratio_squared_means,
    moments_from_power_sums,
)
from ecekde.errors import DegenerateDenominator, LengthMismatch, TooFewPoints
from ecekde.estimators import cond_expectation
from ecekde.experiments import SyntheticSpec, gen_synthetic
from oracles import enumerated_biases

positive = st.floats(0.1, 10.0)


def test_constant_moments():
    ms = compute_moments([1, 1, 1], [1, 1, 1])
    assert ms.mu_x == ms.mu_y == 1
    for name in ("var_x", "var_y", "cov_xy", "cov_x2_y", "cov_y2_x", "cov_x2_x"):
        assert getattr(ms, name) == 0


def test_hand_covariance():
    ms = compute_moments([0, 1], [1, 0])
    assert (ms.mu_x, ms.mu_y, ms.cov_xy) == (0.5, 0.5, -0.25)


def test_covariance_against_two_pass(rng):
    x = rng.normal(size=1000)
    y = 0.3 * x + rng.normal(size=1000)
    mx = sum(x) / 1000
    my = sum(y) / 1000
    expected = sum((a - mx) * (b - my) for a, b in zip(x, y)) / 1000
    ms = compute_moments(x, y)
    assert abs(ms.cov_xy - expected) < 1e-12
    assert abs(ms.cov_x2_y - np.cov(x * x, y, bias=True)[0, 1]) < 1e-12


def test_moment_errors():
    with pytest.raises(LengthMismatch):
        compute_moments([1, 2], [1, 2, 3])
    with pytest.raises(TooFewPoints):
        compute_moments([1], [1])


def test_power_sums_match_direct_moments(rng):
    w = rng.uniform(0.1, 1, 50)
    ind = (rng.random(50) < 0.4).astype(float)
    direct = compute_moments(w, w * ind)
    ps = moments_from_power_sums(50, w.sum(), (w**2).sum(), (w**3).sum(),
                                 (w * ind).sum(), (w**2 * ind).sum(), (w**3 * ind).sum())
    for name in ("mu_x", "mu_y", "var_x", "var_y", "cov_xy", "cov_x2_y", "cov_y2_x", "cov_x2_x"):
        assert getattr(ps, name) == pytest.approx(getattr(direct, name), abs=1e-13)


def test_means_constant_inputs():
    assert debias_ratio_means(np.full(10, 2.0), np.full(10, 3.0)).corrected_ratio == 1.5


@given(st.integers(0, 10**6))
def test_means_equal_inputs(seed):
    x = np.random.default_rng(seed).uniform(0.1, 2, 12)
    assert debias_ratio_means(x, x).corrected_ratio == 1.0


def test_means_degenerate_denominator():
    with pytest.raises(DegenerateDenominator):
        debias_ratio_means(np.zeros(5), np.ones(5))


def test_means_enumeration_reduces_bias():
    b = enumerated_biases(8, 0.5, 0.7)
    assert abs(b["means_corrected"]) < abs(b["means_raw"])


@given(st.integers(0, 10**6), positive, positive)
def test_means_scale_equivariance(seed, a, b):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.1, 1, 20)
    y = rng.uniform(0, 1, 20)
    base = debias_ratio_means(x, y).corrected_ratio
    assert debias_ratio_means(a * x, b * y).corrected_ratio == pytest.approx(b / a * base, abs=1e-10)


def test_squares_constant_inputs():
    r = debias_ratio_squared_means(np.full(10, 2.0), np.full(10, 3.0)).corrected_ratio
    assert r == pytest.approx(2.25, abs=1e-15)


@given(st.integers(0, 10**6))
def test_squares_equal_inputs(seed):
    x = np.random.default_rng(seed).uniform(0.1, 2, 12)
    assert debias_ratio_squared_means(x, x).corrected_ratio == 1.0


def test_squares_errors():
    with pytest.raises(TooFewPoints):
        debias_ratio_squared_means(np.ones(5), np.ones(5))
    with pytest.raises(DegenerateDenominator):
        debias_ratio_squared_means(np.zeros(8), np.ones(8))


def test_squares_report_exposes_terms(rng):
    rep = debias_ratio_squared_means(rng.uniform(0.1, 1, 20), rng.uniform(0, 1, 20))
    assert set(rep.correction_terms) == {"r_a_star", "r_b_star", "term_a", "term_b",
                                         "term_c", "term_d", "term_e", "term_f"}


def test_squares_correction_helps_at_moderate_n():
    rng = np.random.default_rng(5)
    X = (rng.random((200000, 64)) < 0.5).astype(float)
    Y = (rng.random((200000, 64)) < 0.7).astype(float)
    rep = debias_ratio_squared_means(X, Y)
    target = (0.7 / 0.5) ** 2
    assert abs(rep.corrected_ratio.mean() - target) < abs(rep.raw_ratio.mean() - target)


@pytest.mark.parametrize("fn", [debias_ratio_means, debias_ratio_squared_means])
def test_correction_vanishes_with_n(fn):
    rng = np.random.default_rng(8)
    gaps = []
    for n in (10**2, 10**5):
        x = (rng.random(n) < 0.5).astype(float)
        y = (rng.random(n) < 0.7).astype(float)
        rep = fn(x, y)
        gaps.append(abs(rep.corrected_ratio - rep.raw_ratio))
    assert gaps[1] < 1e-2 * gaps[0]


def test_debiased_conditional_single_class(rng):
    probs = rng.dirichlet([1, 1, 1], 20)
    ds = LabeledDataset(probs, np.full(20, 1))
    np.testing.assert_array_equal(cond_expectation_debiased(probs[:4], ds, 0.3), np.tile([0, 1.0, 0], (4, 1)))


def test_debiased_conditional_identical_centers(rng):
    labels = rng.integers(0, 3, 15)
    ds = LabeledDataset(np.tile([0.2, 0.3, 0.5], (15, 1)), labels)
    out = cond_expectation_debiased([0.4, 0.4, 0.2], ds, 0.3)
    expected = np.array([debias_ratio_means(np.ones(15), (labels == k).astype(float)).corrected_ratio
                         for k in range(3)])
    np.testing.assert_allclose(out, np.clip(expected, 0, None) / np.clip(expected, 0, None).sum(), atol=1e-14)


def test_debiased_conditional_approaches_plain():
    ds, _ = gen_synthetic(SyntheticSpec(3, 10**4, 0.6, 0.6, 3))
    at = np.random.default_rng(0).dirichlet([2, 2, 2], 20)
    diffs = []
    for n in (10**3, 10**4):
        sub = ds.take(np.arange(n))
        diffs.append(np.max(np.abs(cond_expectation_debiased(at, sub, 0.1) - cond_expectation(at, sub, 0.1))))
    assert diffs[1] < 10 * diffs[0]


def test_debiased_conditional_on_simplex(rng):
    ds = random_dataset(rng, 60, 4)
    out = cond_expectation_debiased(rng.dirichlet(np.ones(4), 10), ds, 0.05)
    assert np.all(out >= 0)
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
