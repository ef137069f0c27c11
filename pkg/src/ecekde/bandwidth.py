"""Leave-one-out maximum likelihood choice of the Dirichlet kernel bandwidth."""

from __future__ import annotations

import numba
import numpy as np
from scipy.special import gammaln

from .core import clamp_interior
from .errors import InvalidConfig, TooFewPoints
from .kernels import block_rows, check_bandwidth

DEFAULT_GRID = np.logspace(-4, 1, 20)


def check_grid(grid):
    g = np.atleast_1d(np.asarray(grid, dtype=float))
    if g.size == 0:
        raise InvalidConfig("bandwidth grid is empty")
    if np.any(~np.isfinite(g)) or np.any(g <= 0):
        raise InvalidConfig("bandwidth candidates must be positive and finite")
    if np.any(np.diff(g) <= 0):
        raise InvalidConfig("bandwidth grid must be strictly increasing")
    return g


# terms this far below a row's maximum are under double precision
_NEGLIGIBLE = -50.0


@numba.njit(cache=True)
def _add_row_logsumexp(cross, norms, inv_h, start, out):
    """Add ``logsumexp_{i != j} (cross[r, i] / h + norms[g, i])`` to ``out[g]`` for every row."""
    m, n = cross.shape
    row = np.empty(n)
    for r in range(m):
        j = start + r
        for g in range(inv_h.shape[0]):
            top = -np.inf
            for i in range(n):
                v = cross[r, i] * inv_h[g] + norms[g, i]
                row[i] = v
                if i != j and v > top:
                    top = v
            acc = 0.0
            for i in range(n):
                if i != j:
                    d = row[i] - top
                    if d > _NEGLIGIBLE:
                        acc += np.exp(d)
            out[g] += np.log(acc) + top


def loo_log_likelihood_grid(probs, grid):
    """LOO log-likelihood of the sample for every candidate bandwidth.

    ``sum_j log[(1/(n-1)) sum_{i != j} k(f_j; f_i)]`` evaluated with a
    log-sum-exp per row.  The ``log f_j . f_i`` products are shared by all
    candidates, so the grid costs one matrix product per row block.
    """
    X = clamp_interior(np.atleast_2d(np.asarray(probs, dtype=float)))
    n, K = X.shape
    if n < 2:
        raise TooFewPoints(f"need at least 2 points, got {n}")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    logX = np.log(X)
    norms = np.array([gammaln(X.sum(axis=1) / h + K) - gammaln(X / h + 1.0).sum(axis=1)
                      for h in grid])
    total = np.zeros(len(grid))
    step = block_rows(n, 1 << 20)
    for start in range(0, n, step):
        stop = min(n, start + step)
        _add_row_logsumexp(logX[start:stop] @ X.T, norms, 1.0 / grid, start, total)
    return total - n * np.log(n - 1)


def loo_log_likelihood(ds, h):
    """LOO log-likelihood of the predictions in `ds` under the kernel density with bandwidth `h`."""
    h = check_bandwidth(h)
    return float(loo_log_likelihood_grid(ds.probs, [h])[0])


def select_bandwidth(ds, grid=None):
    """Candidate with the largest LOO log-likelihood; ties go to the smaller bandwidth."""
    grid = check_grid(DEFAULT_GRID if grid is None else grid)
    ll = loo_log_likelihood_grid(ds.probs, grid)
    return float(grid[int(np.argmax(ll))])
