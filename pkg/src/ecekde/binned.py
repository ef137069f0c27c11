"""Histogram estimators of calibration error.

The canonical estimator cuts every coordinate of the simplex into equal
intervals and treats each occupied lattice cell as a bin; for three
classes and four intervals per class this gives the 16 triangular regions
of the usual picture.  The top-label estimators bin the confidence with
equal-width or equal-count bins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import skew

from .errors import InvalidConfig, TooFewPoints
from .estimators import CalibrationEstimate, top_label


@dataclass(frozen=True)
class HistogramEstimate:
    """Bin membership and per-bin label means.

    Attributes
    ----------
    bin_of : ndarray of int, shape (n,)
        Bin id of every point.
    cells : ndarray of int, shape (n_bins, K)
        Lattice cell (interval index per class) of each bin.
    H : ndarray, shape (n_bins, K)
        Mean one-hot label of the members of each bin.
    counts : ndarray of int, shape (n_bins,)
    """

    bin_of: np.ndarray
    cells: np.ndarray
    H: np.ndarray
    counts: np.ndarray


def _check_bins(b, what):
    if int(b) != b or b < 1:
        raise InvalidConfig(f"{what} must be a positive integer, got {b!r}")
    return int(b)


def _group_means(bin_of, values, n_bins):
    counts = np.bincount(bin_of, minlength=n_bins)
    sums = np.zeros((n_bins,) + values.shape[1:])
    np.add.at(sums, bin_of, values)
    return sums / counts.reshape((-1,) + (1,) * (values.ndim - 1)), counts


def assign_simplex_bins(ds, bins_per_class):
    """Assign points to simplex lattice cells and compute the label mean per cell."""
    B = _check_bins(bins_per_class, "bins_per_class")
    cell_of = np.minimum(np.floor(ds.probs * B).astype(int), B - 1)
    cells, bin_of = np.unique(cell_of, axis=0, return_inverse=True)
    bin_of = bin_of.ravel()
    H, counts = _group_means(bin_of, ds.one_hot(), len(cells))
    return HistogramEstimate(bin_of, cells, H, counts)


def ece_bin_canonical(ds, bins_per_class, p=1.0):
    """Binned canonical error ``mean_i ||H(bin_i) - f_i||_p^p``."""
    hist = assign_simplex_bins(ds, bins_per_class)
    diff = np.abs(hist.H[hist.bin_of] - ds.probs) ** p
    value = float(diff.sum(axis=1).mean())
    return CalibrationEstimate(value, "canonical", None, ds.n, ds.K)


def equal_width_bins(conf, n_bins):
    return np.clip(np.floor(conf * n_bins).astype(int), 0, n_bins - 1)


def adaptive_bins(conf, n_bins):
    """Equal-count bins over the sorted confidences.

    Counts differ by at most one; a run of tied values straddling a cut is
    moved entirely into the lower bin.
    """
    n = len(conf)
    if n < n_bins:
        raise TooFewPoints(f"adaptive binning needs at least {n_bins} points, got {n}")
    order = np.argsort(conf, kind="stable")
    sizes = [len(c) for c in np.array_split(order, n_bins)]
    sorted_bins = np.repeat(np.arange(n_bins), sizes)
    _, first, inv = np.unique(conf[order], return_index=True, return_inverse=True)
    sorted_bins = sorted_bins[first[inv]]
    bins = np.empty(n, dtype=int)
    bins[order] = sorted_bins
    return bins


def ece_bin_toplabel(ds, n_bins=15, scheme="adaptive", p=1.0):
    """Binned top-label error ``sum_b (n_b / n) |acc_b - conf_b|^p``."""
    n_bins = _check_bins(n_bins, "n_bins")
    conf, correct = top_label(ds.probs, ds.labels)
    if scheme == "equal":
        bins = equal_width_bins(conf, n_bins)
    elif scheme == "adaptive":
        bins = adaptive_bins(conf, n_bins)
    else:
        raise InvalidConfig(f"scheme must be equal or adaptive, got {scheme!r}")
    counts = np.bincount(bins, minlength=n_bins)
    used = counts > 0
    acc = np.bincount(bins, weights=correct, minlength=n_bins)[used] / counts[used]
    mean_conf = np.bincount(bins, weights=conf, minlength=n_bins)[used] / counts[used]
    value = float(np.sum(counts[used] / ds.n * np.abs(acc - mean_conf) ** p))
    return CalibrationEstimate(value, "toplabel", None, ds.n, ds.K)


def doane_bins(samples):
    """Doane's skewness-corrected bin count, rounded half up.

    Constant samples have skewness 0 and get the Sturges count.
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 3:
        raise TooFewPoints(f"Doane's rule needs at least 3 samples, got {n}")
    g1 = 0.0 if np.ptp(x) == 0 else float(skew(x, bias=True))
    sigma = np.sqrt(6.0 * (n - 2) / ((n + 1) * (n + 3)))
    k = 1.0 + np.log2(n) + np.log2(1.0 + abs(g1) / sigma)
    return max(1, int(np.floor(k + 0.5)))
