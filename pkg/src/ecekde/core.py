"""Simplex-valued data, validation, sampling and temperature scaling.

Probability vectors are plain float arrays whose last axis runs over the
``K`` classes; a dataset is an ``(n, K)`` array of predictions paired with
an ``(n,)`` array of integer labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyInput,
    IndexOutOfRange,
    InvalidDimension,
    NegativeCoordinate,
    NonPositiveTemperature,
    SumOutOfTolerance,
)

TOL_SIMPLEX = 1e-9
CLAMP_EPS = 1e-10


def validate_simplex(v, tol=TOL_SIMPLEX):
    """Check that `v` is a probability vector and return it as a float array.

    Raises
    ------
    EmptyInput
        `v` has no coordinates.
    NegativeCoordinate
        Some coordinate is below zero.
    SumOutOfTolerance
        The coordinates do not sum to one within `tol`.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim == 0 or v.shape[-1] == 0:
        raise EmptyInput("probability vector has no coordinates")
    if not np.all(np.isfinite(v)):
        raise SumOutOfTolerance("probability vector has non-finite coordinates")
    if np.any(v < 0):
        raise NegativeCoordinate(f"negative coordinate {v.min()!r}")
    total = v.sum(axis=-1)
    if np.any(np.abs(total - 1.0) > tol):
        worst = np.max(np.abs(total - 1.0))
        raise SumOutOfTolerance(f"coordinates sum to 1 +/- {worst:.3g} (tol {tol:g})")
    return v


def clamp_interior(p, eps=CLAMP_EPS):
    """Pull boundary coordinates into ``[eps, 1 - eps]``.

    Only rows that actually contain a coordinate outside the interval are
    clamped and renormalised; interior rows are returned untouched, so the
    map is the identity (and differentiable) away from the boundary.
    """
    p = np.array(p, dtype=float)
    if p.shape[-1] == 1:
        return p
    bad = np.any((p < eps) | (p > 1.0 - eps), axis=-1)
    if np.any(bad):
        rows = np.clip(p[bad], eps, 1.0 - eps)
        p[bad] = rows / rows.sum(axis=-1, keepdims=True)
    return p


def temperature_scale(p, t):
    """Apply temperature scaling ``q_k = p_k^(1/t) / sum_j p_j^(1/t)``.

    Works on a single vector or on a stack of vectors (last axis = classes).
    Computed in log space.  Only rows with a zero coordinate are clamped;
    any strictly positive row is transformed as is, so the map is an exact
    group action (``t`` then ``1/t`` returns the input) however small its
    entries are.
    """
    if not t > 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {t!r}")
    p = np.array(p, dtype=float)
    on_boundary = np.any(p <= 0.0, axis=-1)
    if np.any(on_boundary):
        p[on_boundary] = clamp_interior(p[on_boundary])
    if t == 1:
        return p
    z = np.log(p) / t
    z -= z.max(axis=-1, keepdims=True)
    q = np.exp(z)
    q /= q.sum(axis=-1, keepdims=True)
    return q


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_uniform_simplex(K, n, seed):
    """Draw `n` points uniformly from the ``K``-class probability simplex.

    Uses the sorted-spacings construction: ``K - 1`` sorted uniforms on
    ``[0, 1]`` padded with the endpoints, then consecutive differences.
    `seed` is anything :func:`numpy.random.default_rng` accepts.
    """
    if K < 1 or n < 1:
        raise InvalidDimension(f"need K >= 1 and n >= 1, got K={K}, n={n}")
    if K == 1:
        return np.ones((n, 1))
    rng = _rng(seed)
    u = np.sort(rng.random((n, K - 1)), axis=1)
    edges = np.concatenate([np.zeros((n, 1)), u, np.ones((n, 1))], axis=1)
    return np.diff(edges, axis=1)


def sample_labels(probs, seed):
    """Draw one categorical label per row of `probs` (inverse-CDF sampling)."""
    probs = validate_simplex(np.atleast_2d(probs))
    rng = _rng(seed)
    u = rng.random(probs.shape[0])
    cdf = np.cumsum(probs, axis=1)
    labels = (cdf <= u[:, None]).sum(axis=1)
    return np.minimum(labels, probs.shape[1] - 1)


def one_hot(labels, K):
    """One-hot encode integer label(s) into ``K``-vectors."""
    labels = np.asarray(labels)
    if np.any(labels < 0) or np.any(labels >= K):
        raise IndexOutOfRange(f"label out of range for K={K}")
    return np.eye(K)[labels]


@dataclass(frozen=True)
class LabeledDataset:
    """Predictions ``probs`` (n x K) paired with integer ``labels`` (n,)."""

    probs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        probs = np.atleast_2d(np.asarray(self.probs, dtype=float))
        labels = np.asarray(self.labels).astype(int).ravel()
        if probs.shape[0] == 0:
            raise EmptyInput("dataset has no rows")
        if probs.shape[0] != labels.shape[0]:
            raise InvalidDimension(
                f"{probs.shape[0]} prediction rows but {labels.shape[0]} labels"
            )
        validate_simplex(probs)
        if np.any(labels < 0) or np.any(labels >= probs.shape[1]):
            raise IndexOutOfRange(f"labels must lie in [0, {probs.shape[1]})")
        probs.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.probs.shape[0]

    @property
    def K(self):
        return self.probs.shape[1]

    def one_hot(self):
        return one_hot(self.labels, self.K)

    def take(self, idx):
        """Row subset (or resample, with repeated indices)."""
        idx = np.asarray(idx)
        return LabeledDataset(self.probs[idx], self.labels[idx])
