"""Beta and Dirichlet smoothing kernels, evaluated in log space.

The Dirichlet kernel centred at a prediction ``c`` with bandwidth ``h`` is
the Dirichlet density with concentration ``alpha = c / h + 1``::

    log k(x; c) = lgamma(sum alpha) - sum lgamma(alpha) + sum (alpha - 1) log x

It is not symmetric in ``(x, c)``.  The Beta kernel is its two-class case.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from .core import CLAMP_EPS, clamp_interior
from .errors import BoundaryInput, DimensionMismatch, InvalidConfig

# Upper bound on the number of float64 entries held in one kernel block.
BLOCK_ELEMS = 1 << 22


def check_bandwidth(h):
    h = float(h)
    if not h > 0 or np.isnan(h):
        raise InvalidConfig(f"bandwidth must be positive, got {h!r}")
    return h


def _interior(p, clamp, eps=CLAMP_EPS):
    p = np.asarray(p, dtype=float)
    if clamp:
        return clamp_interior(p, eps)
    if np.any(p <= 0) or np.any(p >= 1):
        raise BoundaryInput("kernel evaluated on the simplex boundary")
    return p


def log_beta_kernel(x, center, h, clamp=True):
    """Log density at `x` of the Beta kernel centred at `center`.

    ``alpha = center / h + 1`` and ``beta = (1 - center) / h + 1``.  Inputs
    broadcast against each other.
    """
    h = check_bandwidth(h)
    x = np.asarray(x, dtype=float)
    center = np.asarray(center, dtype=float)
    if clamp:
        x = np.clip(x, CLAMP_EPS, 1.0 - CLAMP_EPS)
        center = np.clip(center, CLAMP_EPS, 1.0 - CLAMP_EPS)
    elif np.any((x <= 0) | (x >= 1)) or np.any((center <= 0) | (center >= 1)):
        raise BoundaryInput("Beta kernel evaluated on the boundary")
    # same operation order as the two-class Dirichlet path
    a = center / h
    b = (1.0 - center) / h
    return (
        gammaln(a + b + 2.0)
        - (gammaln(a + 1.0) + gammaln(b + 1.0))
        + (a * np.log(x) + b * np.log(1.0 - x))
    )


def log_dirichlet_kernel(x, center, h, clamp=True):
    """Log density at `x` of the Dirichlet kernel centred at `center`.

    Both arguments are probability vectors with the same number of classes
    (stacks broadcast along leading axes).
    """
    h = check_bandwidth(h)
    x = np.asarray(x, dtype=float)
    center = np.asarray(center, dtype=float)
    if x.shape[-1] != center.shape[-1]:
        raise DimensionMismatch(f"K={x.shape[-1]} point vs K={center.shape[-1]} center")
    x = _interior(x, clamp)
    center = _interior(center, clamp)
    a = center / h
    K = center.shape[-1]
    return (
        gammaln(a.sum(axis=-1) + K)
        - gammaln(a + 1.0).sum(axis=-1)
        + (a * np.log(x)).sum(axis=-1)
    )


def center_terms(centers, h):
    """Per-center pieces of the log kernel: ``alpha - 1`` and the log normaliser."""
    a = centers / h
    K = centers.shape[1]
    return a, gammaln(a.sum(axis=1) + K) - gammaln(a + 1.0).sum(axis=1)


def block_rows(n_cols, max_elems=BLOCK_ELEMS):
    return max(1, int(max_elems // max(n_cols, 1)))


def iter_log_kernel_blocks(at, centers, h, loo=False, max_elems=BLOCK_ELEMS):
    """Yield ``(start, stop, block)`` with ``block[r, i] = log k(at[start+r]; centers[i])``.

    With ``loo=True`` `at` must be `centers` itself and the diagonal entries
    (a point's kernel centred on itself) are set to ``-inf``.  Inputs must
    already be interior.
    """
    log_at = np.log(at)
    a, c = center_terms(centers, h)
    m, n = at.shape[0], centers.shape[0]
    step = block_rows(n, max_elems)
    for start in range(0, m, step):
        stop = min(m, start + step)
        blk = log_at[start:stop] @ a.T
        blk += c
        if loo:
            r = np.arange(stop - start)
            blk[r, start + r] = -np.inf
        yield start, stop, blk


def log_kernel_matrix(probs, h, exclude_diagonal=True):
    """Dense ``(n, n)`` matrix with ``[j, i] = log k(probs[j]; probs[i])``.

    Excluded diagonal entries are ``-inf`` so they vanish from any
    log-sum-exp.  Memory is ``O(n^2)``; the estimators use the blocked
    iterator instead.
    """
    h = check_bandwidth(h)
    probs = clamp_interior(np.atleast_2d(np.asarray(probs, dtype=float)))
    n = probs.shape[0]
    out = np.empty((n, n))
    for start, stop, blk in iter_log_kernel_blocks(probs, probs, h, loo=exclude_diagonal):
        out[start:stop] = blk
    return out


def normalized_weights(log_block):
    """Row-wise ``exp(L - max L)`` so the largest weight in each row is 1."""
    m = np.max(log_block, axis=1, keepdims=True)
    w = log_block - m
    np.exp(w, out=w)
    return w, m[:, 0]
