"""Kernel estimators of calibration error.

The conditional expectation ``E[y | f(x) = at]`` is estimated by the
kernel-weighted mean of one-hot labels.  Evaluated at each sample point
with that point left out, it gives the leave-one-out estimates from which
the canonical, marginal and top-label calibration errors are built.

All estimators report the ``p``-th power of the Lp error; take the
``1/p`` root to get the error itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma

from .core import CLAMP_EPS, LabeledDataset, clamp_interior
from .debias import (
    corrected_ratio_means,
    corrected_ratio_squared_means,
    debias_ratio_squared_means,
    moments_from_power_sums,
    project_to_simplex,
    u_square_mean,
)
from .errors import (
    InvalidConfig,
    NotBinary,
    TooFewPoints,
    UnsupportedNorm,
)
from .kernels import (
    check_bandwidth,
    iter_log_kernel_blocks,
    log_beta_kernel,
    normalized_weights,
)

DEBIAS_LEVELS = ("none", "first_order", "second_order")


@dataclass(frozen=True)
class KdeConfig:
    """Settings shared by the kernel estimators.

    Parameters
    ----------
    h : float
        Kernel bandwidth.
    p : float
        Order of the Lp norm, at least 1.
    debias : {"none", "first_order", "second_order"}
        Bias correction applied to the leave-one-out ratios.  The second
        order correction estimates squared conditional means directly and
        is only defined for ``p = 2``.
    clamp_eps : float
        Boundary coordinates are pulled to ``[clamp_eps, 1 - clamp_eps]``.
    """

    h: float
    p: float = 1.0
    debias: str = "none"
    clamp_eps: float = CLAMP_EPS

    def __post_init__(self):
        check_bandwidth(self.h)
        if not self.p >= 1:
            raise InvalidConfig(f"norm order must be >= 1, got {self.p!r}")
        if self.debias not in DEBIAS_LEVELS:
            raise InvalidConfig(f"debias must be one of {DEBIAS_LEVELS}, got {self.debias!r}")
        if self.debias == "second_order" and self.p != 2:
            raise InvalidConfig("second_order debiasing needs p = 2")
        if not 0 < self.clamp_eps <= 1e-3:
            raise InvalidConfig(f"clamp_eps must lie in (0, 1e-3], got {self.clamp_eps!r}")


@dataclass(frozen=True)
class CalibrationEstimate:
    value: float
    kind: str
    config: KdeConfig | None
    n: int
    K: int


@dataclass(frozen=True)
class RegularizationWeights:
    """Weight ``lam`` of the calibration penalty and ``gamma = lam / (1 + lam)``."""

    lam: float
    gamma: float | None = None

    def __post_init__(self):
        if not self.lam >= 0:
            raise InvalidConfig(f"lambda must be >= 0, got {self.lam!r}")
        implied = self.lam / (1.0 + self.lam)
        if self.gamma is None:
            object.__setattr__(self, "gamma", implied)
        elif abs(self.gamma - implied) > 1e-12:
            raise InvalidConfig(f"gamma={self.gamma!r} inconsistent with lambda={self.lam!r}")


def _as_dataset(ds):
    if isinstance(ds, LabeledDataset):
        return ds
    probs, labels = ds
    return LabeledDataset(probs, labels)


def _loo_power_sums(points, targets, h, powers=1):
    """Leave-one-out kernel sums ``sum_i w_ji^q`` and ``sum_i w_ji^q targets_i``.

    Weights in each row are scaled so their maximum is 1, which leaves
    every ratio used downstream unchanged.  Returns two lists indexed by
    ``q - 1``: row sums ``(n,)`` and target sums ``(n, m)``.
    """
    n = points.shape[0]
    s = [np.empty(n) for _ in range(powers)]
    t = [np.empty((n, targets.shape[1])) for _ in range(powers)]
    for start, stop, blk in iter_log_kernel_blocks(points, points, h, loo=True):
        w, _ = normalized_weights(blk)
        wq = w
        for q in range(powers):
            if q:
                wq = wq * w
            s[q][start:stop] = wq.sum(axis=1)
            t[q][start:stop] = wq @ targets
    return s, t


def _first_order_conditional(s, t, m):
    ms = moments_from_power_sums(
        m, s[0][:, None], s[1][:, None], s[2][:, None], t[0], t[1], t[2]
    )
    raw = t[0] / s[0][:, None]
    corrected, _ = corrected_ratio_means(ms, raw)
    return raw, corrected, ms


def _coordinate_errors(points, targets, h, p, debias):
    """Per-point, per-coordinate estimate of ``|E[y_k | f] - f_k|^p`` (LOO)."""
    n = points.shape[0]
    if n < 2:
        raise TooFewPoints(f"need at least 2 points, got {n}")
    if debias == "none":
        s, t = _loo_power_sums(points, targets, h, powers=1)
        # targets sum to one per row, so this is the weight total; a single
        # class then gives its vertex exactly
        cond = t[0] / t[0].sum(axis=1, keepdims=True)
        return np.abs(cond - points) ** p
    if n < 3:
        raise TooFewPoints(f"debiasing needs at least 3 points, got {n}")
    s, t = _loo_power_sums(points, targets, h, powers=3)
    raw, corrected, ms = _first_order_conditional(s, t, n - 1)
    if debias == "first_order":
        cond = project_to_simplex(corrected, raw)
        return np.abs(cond - points) ** p
    if n < 7:
        raise TooFewPoints(f"second order debiasing needs at least 7 points, got {n}")
    # E_k^2 from the corrected ratio of squared means, E_k from the first order ratio
    m = n - 1
    ux = (s[0] ** 2 - s[1]) / (m * (m - 1))
    uy = (t[0] ** 2 - t[1]) / (m * (m - 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        sq_raw = uy / ux[:, None]
        sq, _ = corrected_ratio_squared_means(ms, sq_raw)
    sq = np.where(np.isfinite(sq), sq, raw * raw)
    lin = np.where(np.isfinite(corrected), corrected, raw)
    return sq - 2.0 * points * lin + points * points


def cond_expectation(at, ds, h, exclude=None):
    """Kernel estimate of ``E[one_hot(y) | f(x) = at]``.

    Parameters
    ----------
    at : array_like, shape (K,) or (m, K)
        Evaluation point(s) on the simplex.
    ds : LabeledDataset
    h : float
        Bandwidth.
    exclude : int, optional
        Index of a dataset row to leave out of the sums.

    Returns
    -------
    ndarray
        Same shape as `at`; every row is a probability vector.
    """
    ds = _as_dataset(ds)
    h = check_bandwidth(h)
    at = np.asarray(at, dtype=float)
    single = at.ndim == 1
    at = clamp_interior(np.atleast_2d(at))
    centers = clamp_interior(ds.probs)
    Y = ds.one_hot()
    keep = np.ones(ds.n, dtype=bool)
    if exclude is not None:
        if ds.n < 2:
            raise TooFewPoints("cannot leave a point out of a one-point dataset")
        keep[exclude] = False
    out = np.empty((at.shape[0], ds.K))
    for start, stop, blk in iter_log_kernel_blocks(at, centers[keep], h):
        w, _ = normalized_weights(blk)
        num = w @ Y[keep]
        out[start:stop] = num / num.sum(axis=1, keepdims=True)
    return out[0] if single else out


def loo_cond_expectation(ds, h, debias="none"):
    """Leave-one-out conditional expectation at every sample point, ``(n, K)``."""
    ds = _as_dataset(ds)
    h = check_bandwidth(h)
    points = clamp_interior(ds.probs)
    if ds.n < 2:
        raise TooFewPoints(f"need at least 2 points, got {ds.n}")
    if debias == "none":
        _, t = _loo_power_sums(points, ds.one_hot(), h)
        return t[0] / t[0].sum(axis=1, keepdims=True)
    if debias != "first_order":
        raise InvalidConfig(f"conditional expectation supports none or first_order, got {debias!r}")
    s, t = _loo_power_sums(points, ds.one_hot(), h, powers=3)
    raw, corrected, _ = _first_order_conditional(s, t, ds.n - 1)
    return project_to_simplex(corrected, raw)


def _binary_reduction(score, indicator, eps):
    score = np.clip(score, eps, 1.0 - eps)
    pts = np.stack([score, 1.0 - score], axis=1)
    tgt = np.stack([indicator, 1.0 - indicator], axis=1).astype(float)
    return pts, tgt


def ece_kde_canonical(ds, cfg):
    """Canonical calibration error ``mean_j ||E_j - f_j||_p^p`` with LOO kernel estimates."""
    ds = _as_dataset(ds)
    points = clamp_interior(ds.probs, cfg.clamp_eps)
    err = _coordinate_errors(points, ds.one_hot(), cfg.h, cfg.p, cfg.debias)
    value = max(float(err.sum(axis=1).mean()), 0.0)
    return CalibrationEstimate(value, "canonical", cfg, ds.n, ds.K)


def top_label(probs, labels):
    """Confidence ``max_k f_k`` and correctness of the arg-max (lowest index on ties)."""
    probs = np.asarray(probs, dtype=float)
    pred = np.argmax(probs, axis=1)
    conf = probs[np.arange(len(pred)), pred]
    return conf, (pred == np.asarray(labels)).astype(float)


def ece_kde_toplabel(ds, cfg):
    """Top-label calibration error with a Beta kernel on the confidences."""
    ds = _as_dataset(ds)
    conf, correct = top_label(ds.probs, ds.labels)
    pts, tgt = _binary_reduction(conf, correct, cfg.clamp_eps)
    err = _coordinate_errors(pts, tgt, cfg.h, cfg.p, cfg.debias)
    value = max(float(err[:, 0].mean()), 0.0)
    return CalibrationEstimate(value, "toplabel", cfg, ds.n, ds.K)


def ece_kde_marginal(ds, cfg):
    """Marginal calibration error: one-vs-rest Beta kernel errors summed over classes."""
    ds = _as_dataset(ds)
    total = 0.0
    for k in range(ds.K):
        pts, tgt = _binary_reduction(ds.probs[:, k], ds.labels == k, cfg.clamp_eps)
        err = _coordinate_errors(pts, tgt, cfg.h, cfg.p, cfg.debias)
        total += float(err[:, 0].mean())
    return CalibrationEstimate(max(total, 0.0), "marginal", cfg, ds.n, ds.K)


def _require_binary(ds, min_n):
    if ds.K != 2:
        raise NotBinary(f"needs K = 2, got K = {ds.K}")
    if ds.n < min_n:
        raise TooFewPoints(f"needs at least {min_n} points, got {ds.n}")


def _u2(z):
    # n(n-1) times the U-statistic of the squared mean, per row
    return z.sum(axis=-1) ** 2 - (z * z).sum(axis=-1)


def sharpness_partial(ds, h):
    """Mean over points of the LOO ratio of square-mean U-statistics.

    Estimates ``E[E[y | f]^2]`` for binary data, ``y`` being the indicator
    of class 1.
    """
    ds = _as_dataset(ds)
    _require_binary(ds, 3)
    h = check_bandwidth(h)
    points = clamp_interior(ds.probs)
    y = (ds.labels == 1).astype(float)
    ratios = np.empty(ds.n)
    for start, stop, blk in iter_log_kernel_blocks(points, points, h, loo=True):
        w, _ = normalized_weights(blk)
        num = _u2(w * y)
        den = _u2(w)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = num / den
        # a single surviving weight leaves nothing to pair: fall back to the plain square
        plain = ((w @ y) / w.sum(axis=1)) ** 2
        ratios[start:stop] = np.where(den > 0, r, plain)
    return CalibrationEstimate(float(ratios.mean()), "sharpness", None, ds.n, ds.K)


def sharpness_weights(point, positive_scores, h):
    """Kernel weights ``k(point; f_i)`` of a binary location, scaled to max 1."""
    logw = log_beta_kernel(point, positive_scores, h)
    return np.exp(logw - logw.max(axis=-1, keepdims=True))


def sharpness_at(point, ds, h, debias="partial"):
    """Square-mean ratio of the kernel-weighted labels at a single location.

    Parameters
    ----------
    point : float
        Location in ``(0, 1)`` on the class-1 probability axis.
    debias : {"partial", "second_order"}
        ``partial`` returns the plain ratio of U-statistics; ``second_order``
        applies the squared-means correction.
    """
    ds = _as_dataset(ds)
    _require_binary(ds, 3)
    h = check_bandwidth(h)
    w = sharpness_weights(point, ds.probs[:, 1], h)
    y = (ds.labels == 1).astype(float)
    if debias == "partial":
        return float(u_square_mean(w * y) / u_square_mean(w))
    if debias == "second_order":
        return float(debias_ratio_squared_means(w, w * y).corrected_ratio)
    raise InvalidConfig(f"debias must be partial or second_order, got {debias!r}")


def mse_ce_objective(ds, h, weights):
    """Squared error of the class-1 probability plus ``gamma`` times the sharpness term."""
    ds = _as_dataset(ds)
    _require_binary(ds, 3)
    y = (ds.labels == 1).astype(float)
    mse = float(np.mean((ds.probs[:, 1] - y) ** 2))
    if weights.gamma == 0:
        return mse
    return mse + weights.gamma * sharpness_partial(ds, h).value


def mse_identity_sides(f, y, cond):
    """Both sides of the pointwise split of the squared error.

    ``mean[(f - y)^2 - (E - f)^2]`` and ``mean[(E - y)(2f - y - E)]`` agree
    for any ``E``; returned as a pair so callers can compare them.
    """
    f, y, cond = (np.asarray(a, dtype=float) for a in (f, y, cond))
    lhs = np.mean((f - y) ** 2 - (cond - f) ** 2)
    rhs = np.mean((cond - y) * (2.0 * f - y - cond))
    return float(lhs), float(rhs)


def canonical_objective(probs, labels, cfg):
    """Value of :func:`ece_kde_canonical` as a function of unconstrained coordinates.

    `probs` need not sum to one; this is the function whose gradient
    :func:`grad_ece_kde_canonical` returns, handy for finite differences.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    targets = np.eye(probs.shape[1])[np.asarray(labels)]
    err = _coordinate_errors(probs, targets, cfg.h, cfg.p, cfg.debias)
    return float(err.sum(axis=1).mean())


def grad_ece_kde_canonical(ds, cfg):
    """Gradient of :func:`ece_kde_canonical` with respect to the predictions.

    Coordinates are treated as free variables (no simplex constraint); the
    result has the shape of ``ds.probs``.  Only ``p`` in ``{1, 2}`` and
    ``debias="none"`` are supported; at ``p = 1`` exact ties get
    subgradient 0.
    """
    ds = _as_dataset(ds)
    if cfg.p not in (1, 2):
        raise UnsupportedNorm(f"gradient available for p in {{1, 2}}, got {cfg.p!r}")
    if cfg.debias != "none":
        raise InvalidConfig("gradient is available for the plain estimator only")
    n, K = ds.n, ds.K
    if n < 2:
        raise TooFewPoints(f"need at least 2 points, got {n}")
    h = cfg.h
    X = clamp_interior(ds.probs, cfg.clamp_eps)
    Y = ds.one_hot()
    logX = np.log(X)
    grad = np.zeros((n, K))
    col_a = np.zeros(n)
    at_logx = np.zeros((n, K))
    for start, stop, blk in iter_log_kernel_blocks(X, X, h, loo=True):
        w, _ = normalized_weights(blk)
        w /= w.sum(axis=1, keepdims=True)
        E = w @ Y
        D = E - X[start:stop]
        G = (cfg.p / n) * np.sign(D) * (np.abs(D) if cfg.p == 2 else 1.0)
        # derivative of the value with respect to each log kernel entry
        A = w * (G @ Y.T - (G * E).sum(axis=1, keepdims=True))
        grad[start:stop] += -G + (A @ X) / (h * X[start:stop])
        col_a += A.sum(axis=0)
        at_logx += A.T @ logX[start:stop]
    alpha = X / h + 1.0
    psi = digamma(alpha.sum(axis=1, keepdims=True)) - digamma(alpha)
    grad += (col_a[:, None] * psi + at_logx) / h
    return grad
