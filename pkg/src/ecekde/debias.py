"""Geometric-series bias correction for ratio estimators.

Two ratios are handled:

* ``mean(Y) / mean(X)``, corrected to second order in ``1/n``
  (:func:`debias_ratio_means`);
* ``mu_Y^2 / mu_X^2`` estimated by the ratio of the unbiased
  square-of-mean U-statistics, corrected to second order
  (:func:`debias_ratio_squared_means`).

Every correction is a function of a handful of plug-in moments collected in
a :class:`MomentSet`.  All functions reduce over the last axis, so a stack
of samples (e.g. one row per Monte Carlo repetition or per evaluation
point) is corrected in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import clamp_interior
from .errors import DegenerateDenominator, LengthMismatch, TooFewPoints
from .kernels import check_bandwidth, iter_log_kernel_blocks, normalized_weights

DENOM_TOL = 1e-12


@dataclass(frozen=True)
class MomentSet:
    """Plug-in (1/n normalised) moments of paired samples ``(X, Y)``.

    Fields may be scalars or arrays (one entry per stacked sample).
    """

    n: int
    mu_x: np.ndarray
    mu_y: np.ndarray
    var_x: np.ndarray
    var_y: np.ndarray
    cov_xy: np.ndarray
    cov_x2_y: np.ndarray
    cov_y2_x: np.ndarray
    cov_x2_x: np.ndarray


@dataclass(frozen=True)
class DebiasReport:
    raw_ratio: np.ndarray
    corrected_ratio: np.ndarray
    correction_terms: dict = field(default_factory=dict)
    degenerate: np.ndarray | bool = False


def _cov(a, b):
    # two-pass; var(x) is _cov(x, x) so X == Y gives bitwise equal moments
    da = a - a.mean(axis=-1, keepdims=True)
    db = b - b.mean(axis=-1, keepdims=True)
    return (da * db).mean(axis=-1)


def compute_moments(x, y):
    """Plug-in means, variances and the mixed covariances of ``(X, Y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatch(f"X has shape {x.shape}, Y has shape {y.shape}")
    n = x.shape[-1]
    if n < 2:
        raise TooFewPoints(f"need at least 2 pairs, got {n}")
    x2 = x * x
    y2 = y * y
    return MomentSet(
        n=n,
        mu_x=x.mean(axis=-1),
        mu_y=y.mean(axis=-1),
        var_x=_cov(x, x),
        var_y=_cov(y, y),
        cov_xy=_cov(x, y),
        cov_x2_y=_cov(x2, y),
        cov_y2_x=_cov(y2, x),
        cov_x2_x=_cov(x2, x),
    )


def moments_from_power_sums(m, s1, s2, s3, t1, t2, t3):
    """MomentSet of ``(X, Y = X * ind)`` for an indicator ``ind`` from power sums.

    ``s_k = sum X^k`` and ``t_k = sum X^k ind`` over ``m`` points; arrays
    broadcast (rows of a kernel block against classes).  Used by the
    kernel estimators where ``Y`` is a kernel weight times a 0/1 label.
    """
    mx = s1 / m
    my = t1 / m
    ex2 = s2 / m
    ey2 = t2 / m
    return MomentSet(
        n=m,
        mu_x=mx,
        mu_y=my,
        var_x=ex2 - mx * mx,
        var_y=ey2 - my * my,
        cov_xy=t2 / m - mx * my,
        cov_x2_y=t3 / m - ex2 * my,
        cov_y2_x=t3 / m - ey2 * mx,
        cov_x2_x=s3 / m - ex2 * mx,
    )


def _r_star(n, mu_x, mu_o, var_x, var_o, cov_xo, cov_x2_o, cov_o2_x):
    """Corrected ``Cov(X, O) / (mu_X mu_O)``.

    With ``O = Y`` this is r_a*, with ``O = X`` it reduces to r_b*.  The
    ``Cov(X^2, O)`` part is written without dividing by ``Cov(X, O)`` so
    it stays finite when that covariance vanishes.
    """
    r = cov_xo / (mu_x * mu_o)
    k = 1.0 / (n - 1)
    spread = var_x / mu_x**2 + var_o / mu_o**2 + 2.0 * r
    return (
        r * (1.0 - 4.0 * k - k * spread)
        + k * (mu_o * cov_x2_o + mu_x * cov_o2_x) / (mu_x**2 * mu_o**2)
    )


def _r_a_star(ms):
    return _r_star(ms.n, ms.mu_x, ms.mu_y, ms.var_x, ms.var_y,
                   ms.cov_xy, ms.cov_x2_y, ms.cov_y2_x)


def _r_b_star(ms):
    return _r_star(ms.n, ms.mu_x, ms.mu_x, ms.var_x, ms.var_x,
                   ms.var_x, ms.cov_x2_x, ms.cov_x2_x)


def _means_second_order(mu_x, var_x, mu_o, cov_xo, cov_x2_o):
    # the O(1/n^2) bracket splits into g(Y) - g(X)
    r_b = var_x / mu_x**2
    return ((cov_x2_o - 2.0 * mu_x * cov_xo) / (mu_x**2 * mu_o)
            - 3.0 * r_b * cov_xo / (mu_x * mu_o))


def _zero_guard(mu_y, value):
    # Y == 0 everywhere: the ratio is exactly zero and so is every correction
    return np.where(mu_y == 0, 0.0, value)


def corrected_ratio_means(ms, raw):
    """Second-order corrected ``mean(Y)/mean(X)`` given its moments."""
    n = ms.n
    # mu_Y == 0 divides by zero below; _zero_guard replaces those entries
    with np.errstate(divide="ignore", invalid="ignore"):
        ra = _r_a_star(ms)
        rb = _r_b_star(ms)
        first = -(rb - ra) / n
        second = -(
            _means_second_order(ms.mu_x, ms.var_x, ms.mu_y, ms.cov_xy, ms.cov_x2_y)
            - _means_second_order(ms.mu_x, ms.var_x, ms.mu_x, ms.var_x, ms.cov_x2_x)
        ) / n**2
        corrected = _zero_guard(ms.mu_y, raw * (1.0 + first + second))
    terms = {"r_a_star": ra, "r_b_star": rb, "first_order": first, "second_order": second}
    return corrected, terms


def _term_ab(n, ms_o, r_star):
    mu_x, mu_o, cov_xo = ms_o
    return (12.0 / (n * (n - 1)) * cov_xo**2 / (mu_x**2 * mu_o**2)
            + 24.0 / n * r_star)


def _term_cd(n, ms_o, r_star, var_x, cov_x2_o):
    mu_x, mu_o, cov_xo = ms_o
    return (
        32.0 * (n - 2) / (n * (n - 1) ** 2)
        * (cov_x2_o / (mu_x**2 * mu_o) + 2.0 * cov_xo * (var_x + mu_x**2) / (mu_x**3 * mu_o))
        + 4.0 * (n - 2) * (n - 3) / (n * (n - 1))
        * (8.0 / n * r_star + 12.0 / (n * (n - 1)) * cov_xo**2 / (mu_x**2 * mu_o**2))
    )


def _term_ef(n, ms_o, r_star, var_x, cov_x2_o):
    mu_x, mu_o, cov_xo = ms_o
    return (
        24.0 * (n - 2) * (n - 3) * (n - 4) / (n**2 * (n - 1) ** 3)
        * (cov_x2_o / (mu_o * mu_x**2) + 4.0 * cov_xo * (var_x + mu_x**2) / (mu_o * mu_x**3))
        + (n - 2) * (n - 3) * (n - 4) * (n - 5) / (n**2 * (n - 1) ** 2)
        * (12.0 / n * r_star + 30.0 / (n * (n - 1)) * cov_xo**2 / (mu_x**2 * mu_o**2))
    )


def corrected_ratio_squared_means(ms, raw):
    """Second-order corrected ``mu_Y^2 / mu_X^2`` given its moments."""
    n = ms.n
    oy = (ms.mu_x, ms.mu_y, ms.cov_xy)
    ox = (ms.mu_x, ms.mu_x, ms.var_x)
    with np.errstate(divide="ignore", invalid="ignore"):
        ra = _r_a_star(ms)
        rb = _r_b_star(ms)
        terms = {
            "r_a_star": ra,
            "r_b_star": rb,
            "term_a": _term_ab(n, oy, ra),
            "term_b": _term_ab(n, ox, rb),
            "term_c": _term_cd(n, oy, ra, ms.var_x, ms.cov_x2_y),
            "term_d": _term_cd(n, ox, rb, ms.var_x, ms.cov_x2_x),
            "term_e": _term_ef(n, oy, ra, ms.var_x, ms.cov_x2_y),
            "term_f": _term_ef(n, ox, rb, ms.var_x, ms.cov_x2_x),
        }
        bracket = (
            1.0
            + (terms["term_a"] - terms["term_b"])
            - (terms["term_c"] - terms["term_d"])
            + (terms["term_e"] - terms["term_f"])
        )
        corrected = _zero_guard(ms.mu_y, raw * bracket)
    return corrected, terms


def u_square_mean(x):
    """Unbiased estimate of ``mean(X)^2``: the mean of ``X_i X_j`` over ``i != j``."""
    n = x.shape[-1]
    return (x.sum(axis=-1) ** 2 - (x * x).sum(axis=-1)) / (n * (n - 1))


def debias_ratio_means(x, y):
    """Bias-corrected estimate of ``mu_Y / mu_X`` from paired samples.

    Raises
    ------
    DegenerateDenominator
        ``|mean(X)|`` is below 1e-12 for some sample.
    """
    ms = compute_moments(x, y)
    if np.any(np.abs(ms.mu_x) <= DENOM_TOL):
        raise DegenerateDenominator("mean of X is (numerically) zero")
    raw = ms.mu_y / ms.mu_x
    corrected, terms = corrected_ratio_means(ms, raw)
    return DebiasReport(raw, corrected, terms)


def debias_ratio_squared_means(x, y):
    """Bias-corrected estimate of ``mu_Y^2 / mu_X^2`` from paired samples.

    The uncorrected ratio divides the U-statistic estimates of the two
    squared means; at least six pairs are needed by the correction.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] < 6:
        raise TooFewPoints(f"need at least 6 pairs, got {x.shape[-1]}")
    ms = compute_moments(x, y)
    ux = u_square_mean(x)
    if np.any(np.abs(ux) <= DENOM_TOL):
        raise DegenerateDenominator("U-statistic of mean(X)^2 is (numerically) zero")
    raw = u_square_mean(y) / ux
    corrected, terms = corrected_ratio_squared_means(ms, raw)
    return DebiasReport(raw, corrected, terms)


def project_to_simplex(corrected, fallback):
    """Clip negative entries and renormalise rows; rows that cannot be rescued use `fallback`."""
    e = np.clip(corrected, 0.0, None)
    total = e.sum(axis=1, keepdims=True)
    ok = (total[:, 0] > 0) & np.all(np.isfinite(e), axis=1)
    return np.where(ok[:, None], e / np.where(total > 0, total, 1.0), fallback)


def cond_expectation_debiased(at, ds, h, exclude=None):
    """Kernel conditional expectation with each class ratio bias-corrected.

    For every class ``k`` the ratio ``sum w_i 1[y_i = k] / sum w_i`` is
    corrected with the ratio-of-means scheme (``X`` = kernel weights,
    ``Y`` = weights times the class indicator).  Negative corrected entries
    are clipped and the vector is renormalised onto the simplex.
    """
    h = check_bandwidth(h)
    at = np.asarray(at, dtype=float)
    single = at.ndim == 1
    at = clamp_interior(np.atleast_2d(at))
    keep = np.ones(ds.n, dtype=bool)
    if exclude is not None:
        keep[exclude] = False
    m = int(keep.sum())
    if m < 2:
        raise TooFewPoints(f"need at least 2 included points, got {m}")
    centers = clamp_interior(ds.probs[keep])
    Y = ds.one_hot()[keep]
    out = np.empty((at.shape[0], ds.K))
    for start, stop, blk in iter_log_kernel_blocks(at, centers, h):
        w, _ = normalized_weights(blk)
        w2 = w * w
        w3 = w2 * w
        s1 = w.sum(axis=1, keepdims=True)
        ms = moments_from_power_sums(
            m, s1, w2.sum(axis=1, keepdims=True), w3.sum(axis=1, keepdims=True),
            w @ Y, w2 @ Y, w3 @ Y,
        )
        raw = ms.mu_y / ms.mu_x
        corrected, _ = corrected_ratio_means(ms, raw)
        out[start:stop] = project_to_simplex(corrected, raw)
    return out[0] if single else out
