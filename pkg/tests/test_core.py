import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ecekde.core import (
    LabeledDataset,
    clamp_interior,
    one_hot,
    sample_labels,
    sample_uniform_simplex,
    temperature_scale,
    validate_simplex,
)
from ecekde.errors import (
    EmptyInput,
    IndexOutOfRange,
    InvalidDimension,
    NegativeCoordinate,
    NonPositiveTemperature,
    SumOutOfTolerance,
)

interior = st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6).map(
    lambda v: np.asarray(v) / np.sum(v)
)
temps = st.floats(0.2, 5.0)


def test_validate_accepts_exact_vector():
    np.testing.assert_array_equal(validate_simplex([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5])


def test_validate_rejects_bad_sum():
    with pytest.raises(SumOutOfTolerance):
        validate_simplex([0.5, 0.6])


def test_validate_single_class():
    assert validate_simplex([1.0]).shape == (1,)


def test_validate_rejects_negative_and_empty():
    with pytest.raises(NegativeCoordinate):
        validate_simplex([1.1, -0.1])
    with pytest.raises(EmptyInput):
        validate_simplex([])


def test_validate_tolerance_is_respected():
    validate_simplex([0.5, 0.5 + 5e-10])
    with pytest.raises(SumOutOfTolerance):
        validate_simplex([0.5, 0.5 + 5e-9])
    validate_simplex([0.5, 0.5 + 5e-9], tol=1e-8)


def test_uniform_is_fixed_point():
    np.testing.assert_allclose(temperature_scale([0.5, 0.5], 0.6), [0.5, 0.5], atol=1e-15)


def test_unit_temperature_is_identity():
    p = np.array([0.1, 0.2, 0.7])
    np.testing.assert_array_equal(temperature_scale(p, 1.0), p)


def test_temperature_hand_value():
    # p_k^(1/t) / sum: 0.8^2 = 0.64, 0.2^2 = 0.04
    np.testing.assert_allclose(temperature_scale([0.8, 0.2], 0.5), [0.64 / 0.68, 0.04 / 0.68],
                               rtol=1e-14)


def test_non_positive_temperature():
    with pytest.raises(NonPositiveTemperature):
        temperature_scale([0.5, 0.5], 0.0)


@given(interior, temps, temps)
def test_temperature_composition(p, t1, t2):
    twice = temperature_scale(temperature_scale(p, t1), t2)
    np.testing.assert_allclose(twice, temperature_scale(p, t1 * t2), atol=1e-12)


@given(interior, temps)
def test_temperature_inversion(p, t):
    back = temperature_scale(temperature_scale(p, t), 1.0 / t)
    np.testing.assert_allclose(back, p, atol=1e-10)


@given(interior, temps)
def test_temperature_keeps_argmax(p, t):
    if np.sort(p)[-1] - np.sort(p)[-2] < 1e-9:
        return
    assert np.argmax(temperature_scale(p, t)) == np.argmax(p)


def test_clamp_leaves_interior_rows_alone():
    p = np.array([[0.2, 0.8], [0.0, 1.0]])
    out = clamp_interior(p)
    np.testing.assert_array_equal(out[0], p[0])
    assert out[1, 0] > 0 and abs(out[1].sum() - 1) < 1e-15


def test_sample_single_class():
    np.testing.assert_array_equal(sample_uniform_simplex(1, 3, 0), np.ones((3, 1)))


def test_sample_dimension_error():
    with pytest.raises(InvalidDimension):
        sample_uniform_simplex(0, 3, 0)


def test_uniform_simplex_mean():
    x = sample_uniform_simplex(3, 10**6, 1)
    assert np.all(np.abs(x.mean(axis=0) - 1 / 3) < 0.002)


def test_uniform_simplex_variance():
    K = 4
    x = sample_uniform_simplex(K, 10**6, 2)
    target = (K - 1) / (K**2 * (K + 1))
    assert np.all(np.abs(x.var(axis=0) / target - 1) < 0.02)


@given(st.integers(1, 8), st.integers(1, 50), st.integers(0, 2**32 - 1))
def test_samples_are_valid_and_reproducible(K, n, seed):
    a = sample_uniform_simplex(K, n, seed)
    validate_simplex(a, 1e-9)
    np.testing.assert_array_equal(a, sample_uniform_simplex(K, n, seed))


def test_degenerate_labels():
    assert np.all(sample_labels(np.tile([1.0, 0.0], (100, 1)), 0) == 0)
    assert np.all(sample_labels(np.tile([0.0, 0.0, 1.0], (100, 1)), 0) == 2)


def test_label_frequency():
    y = sample_labels(np.tile([0.3, 0.7], (10**6, 1)), 3)
    assert abs(y.mean() - 0.7) < 0.002


def test_labels_reproducible():
    p = sample_uniform_simplex(5, 1000, 4)
    np.testing.assert_array_equal(sample_labels(p, 9), sample_labels(p, 9))


def test_one_hot():
    np.testing.assert_array_equal(one_hot(2, 4), [0, 0, 1, 0])
    np.testing.assert_array_equal(one_hot(0, 1), [1])
    with pytest.raises(IndexOutOfRange):
        one_hot(3, 3)


def test_dataset_validation():
    with pytest.raises(IndexOutOfRange):
        LabeledDataset([[0.5, 0.5]], [2])
    with pytest.raises(InvalidDimension):
        LabeledDataset([[0.5, 0.5]], [0, 1])
    with pytest.raises(SumOutOfTolerance):
        LabeledDataset([[0.5, 0.6]], [0])
    ds = LabeledDataset([[0.5, 0.5], [0.1, 0.9]], [0, 1])
    assert (ds.n, ds.K) == (2, 2)
    with pytest.raises(ValueError):
        ds.probs[0, 0] = 1.0


def test_boundary_rows_are_clamped():
    out = temperature_scale([1.0, 0.0], 0.5)
    assert out[1] > 0 and abs(out.sum() - 1) < 1e-15


def test_inversion_with_tiny_coordinates():
    p = np.array([1e-12, 0.5, 0.5 - 1e-12])
    np.testing.assert_allclose(temperature_scale(temperature_scale(p, 0.2), 5.0), p, rtol=1e-10, atol=0)
