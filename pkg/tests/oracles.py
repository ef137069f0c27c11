"""Exact expectations by exhaustive enumeration, shared by several test files."""

import itertools

import numpy as np

from ecekde.debias import (
    compute_moments,
    corrected_ratio_means,
    corrected_ratio_squared_means,
    u_square_mean,
)


def bernoulli_outcomes(n, px, py):
    """All 4^n joint outcomes of ``n`` independent (X, Y) Bernoulli pairs."""
    vals = np.array(list(itertools.product((0.0, 1.0), repeat=2 * n)))
    X, Y = vals[:, :n], vals[:, n:]
    prob = (np.prod(np.where(X == 1, px, 1 - px), axis=1)
            * np.prod(np.where(Y == 1, py, 1 - py), axis=1))
    return X, Y, prob


def enumerated_biases(n=8, px=0.5, py=0.7):
    """Exact biases of raw and corrected ratios, conditional on a usable denominator.

    Returns a dict with keys ``means_raw``, ``means_corrected``,
    ``squares_raw`` and ``squares_corrected``.
    """
    X, Y, prob = bernoulli_outcomes(n, px, py)
    out = {}
    ok = X.mean(axis=1) > 0
    ms = compute_moments(X[ok], Y[ok])
    raw = ms.mu_y / ms.mu_x
    corrected, _ = corrected_ratio_means(ms, raw)
    w = prob[ok] / prob[ok].sum()
    out["means_raw"] = float(w @ raw - py / px)
    out["means_corrected"] = float(w @ corrected - py / px)

    ux = u_square_mean(X)
    ok = ux > 0
    ms = compute_moments(X[ok], Y[ok])
    raw = u_square_mean(Y[ok]) / ux[ok]
    corrected, _ = corrected_ratio_squared_means(ms, raw)
    w = prob[ok] / prob[ok].sum()
    out["squares_raw"] = float(w @ raw - (py / px) ** 2)
    out["squares_corrected"] = float(w @ corrected - (py / px) ** 2)
    return out
