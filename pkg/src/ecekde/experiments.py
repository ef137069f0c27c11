"""Synthetic benchmarks with known ground truth.

Data are generated as follows: ``z`` uniform on the simplex, the
calibrated probabilities ``q = ts(z, t1)``, labels ``y ~ Categorical(q)``,
and the reported predictions ``f = ts(q, t2)`` where ``ts`` is temperature
scaling.  Because temperature scaling is invertible, ``E[y | f] = q``
exactly and the true calibration error is a plain expectation that Monte
Carlo evaluates to any precision.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import linregress

from .core import (
    LabeledDataset,
    clamp_interior,
    sample_labels,
    sample_uniform_simplex,
    temperature_scale,
)
from .debias import corrected_ratio_squared_means, compute_moments, u_square_mean
from .errors import (
    InsufficientGrid,
    InvalidConfig,
    InvalidDimension,
    InvalidLevel,
    NonPositiveError,
    TooFewRows,
)
from .estimators import sharpness_weights

CSV_COLUMNS = ("n", "estimator", "mean", "std", "reference")


@dataclass(frozen=True)
class SyntheticSpec:
    K: int
    n: int
    t1: float = 0.6
    t2: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if self.K < 2 or self.n < 2:
            raise InvalidDimension(f"need K >= 2 and n >= 2, got K={self.K}, n={self.n}")


@dataclass(frozen=True)
class GroundTruth:
    value: float
    stderr: float
    samples: int


@dataclass
class StudyResult:
    """Per-``(n, estimator)`` summaries plus fitted log-log error slopes.

    Each row is a dict with the CSV columns ``n, estimator, mean, std,
    reference`` and an extra ``abs_error`` (mean absolute deviation of the
    per-seed estimates from the reference).
    """

    rows: list
    slopes: dict
    seed: object
    meta: dict = field(default_factory=dict)

    def select(self, estimator):
        return [r for r in self.rows if r["estimator"] == estimator]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in self.rows:
                writer.writerow([r["n"], r["estimator"]] + [repr(float(r[c])) for c in CSV_COLUMNS[2:]])

    def to_dict(self):
        return {
            "rows": self.rows,
            "slopes": {k: {"slope": s, "stderr": e} for k, (s, e) in self.slopes.items()},
            "seed": self.seed,
            "meta": self.meta,
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def _seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def gen_synthetic(spec):
    """Draw a synthetic dataset and its exact conditional ``E[y | f]``.

    Returns
    -------
    ds : LabeledDataset
        Predictions ``f`` and labels.
    truth : ndarray, shape (n, K)
        The calibrated probabilities ``q``, equal to ``E[y | f]``.
    """
    sim_seed, label_seed = _seed_sequence(spec.seed).spawn(2)
    z = sample_uniform_simplex(spec.K, spec.n, np.random.default_rng(sim_seed))
    q = clamp_interior(temperature_scale(z, spec.t1))
    y = sample_labels(q, np.random.default_rng(label_seed))
    f = temperature_scale(q, spec.t2)
    return LabeledDataset(f, y), q


def ground_truth_ce(K, t1, t2, p=1.0, mc_samples=10**7, seed=0, chunk=10**6):
    """Monte Carlo value of ``E ||E[y | f] - f||_p^p`` under the synthetic model.

    Labels are not needed: the conditional is known in closed form, so
    each draw of ``z`` contributes an exact integrand value.
    """
    if mc_samples < 10**4:
        raise InvalidConfig(f"mc_samples must be at least 1e4, got {mc_samples}")
    rng = np.random.default_rng(_seed_sequence(seed))
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < mc_samples:
        m = min(chunk, mc_samples - done)
        q = clamp_interior(temperature_scale(sample_uniform_simplex(K, m, rng), t1))
        f = temperature_scale(q, t2)
        v = (np.abs(q - f) ** p).sum(axis=1)
        total += v.sum()
        total_sq += (v * v).sum()
        done += m
    mean = total / mc_samples
    var = max(total_sq / mc_samples - mean * mean, 0.0)
    return GroundTruth(float(mean), float(np.sqrt(var / (mc_samples - 1))), mc_samples)


def fit_loglog_slope(rows):
    """Least-squares slope of ``log|error|`` against ``log n``.

    Parameters
    ----------
    rows : sequence of (n, error) pairs

    Returns
    -------
    slope, stderr : float
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 3:
        raise TooFewRows("need at least 3 (n, error) rows")
    if np.any(rows[:, 1] <= 0) or np.any(rows[:, 0] <= 0):
        raise NonPositiveError("sizes and errors must be positive to take logs")
    fit = linregress(np.log(rows[:, 0]), np.log(rows[:, 1]))
    return float(fit.slope), float(fit.stderr)


def bootstrap_ci(ds, estimator, B=100, level=0.95, seed=0):
    """Percentile bootstrap interval of ``estimator(ds)`` over row resamples."""
    if not 0 < level < 1:
        raise InvalidLevel(f"level must lie in (0, 1), got {level!r}")
    if B < 10:
        raise InvalidConfig(f"need at least 10 bootstrap samples, got {B}")
    rng = np.random.default_rng(_seed_sequence(seed))
    stats = np.empty(B)
    for b in range(B):
        stats[b] = float(estimator(ds.take(rng.integers(0, ds.n, ds.n))))
    tail = 50.0 * (1.0 - level)
    lo, hi = np.percentile(stats, [tail, 100.0 - tail])
    return float(lo), float(hi)


def _summary_row(n, name, values, reference):
    values = np.asarray(values, dtype=float)
    return {
        "n": int(n),
        "estimator": name,
        "mean": float(values.mean()),
        "std": float(values.std(ddof=1)) if values.size > 1 else 0.0,
        "reference": float(reference),
        "abs_error": float(np.mean(np.abs(values - reference))),
    }


def _slopes(rows, key):
    slopes = {}
    for name in dict.fromkeys(r["estimator"] for r in rows):
        pts = [(r["n"], r[key]) for r in rows if r["estimator"] == name]
        if len(pts) >= 3 and all(e > 0 for _, e in pts):
            slopes[name] = fit_loglog_slope(pts)
    return slopes


def convergence_study(grid, estimators, seeds, p=1.0, reference=None,
                      mc_samples=10**7, reference_seed=None):
    """Mean and spread of each estimator across seeds, for every dataset size.

    Parameters
    ----------
    grid : sequence of SyntheticSpec
        Dataset sizes to run; all must share ``K``, ``t1`` and ``t2``.
        Replicate ``s`` of a spec uses a seed derived from ``(spec.seed, s)``.
    estimators : dict
        Maps a name to ``fn(ds, n) -> float``.  ``n`` lets an estimator
        cache per-size work (such as a bandwidth) across replicates.
    seeds : int
        Replicates per size.
    reference : GroundTruth, optional
        Computed with :func:`ground_truth_ce` when omitted.
    """
    grid = list(grid)
    sizes = sorted({s.n for s in grid})
    if len(sizes) < 2:
        raise InsufficientGrid("a convergence study needs at least 2 distinct n")
    if len({(s.K, s.t1, s.t2) for s in grid}) != 1:
        raise InvalidConfig("all specs in a study must share K, t1 and t2")
    K, t1, t2 = grid[0].K, grid[0].t1, grid[0].t2
    if reference is None:
        ref_seed = reference_seed if reference_seed is not None else [grid[0].seed, 2**31]
        reference = ground_truth_ce(K, t1, t2, p, mc_samples, ref_seed)
    rows = []
    for spec in sorted(grid, key=lambda s: s.n):
        values = {name: [] for name in estimators}
        for child in _seed_sequence(spec.seed).spawn(seeds):
            ds, _ = gen_synthetic(SyntheticSpec(K, spec.n, t1, t2, child))
            for name, fn in estimators.items():
                values[name].append(fn(ds, spec.n))
        for name in estimators:
            rows.append(_summary_row(spec.n, name, values[name], reference.value))
    meta = {"K": K, "t1": t1, "t2": t2, "p": p, "seeds": seeds,
            "reference_stderr": reference.stderr, "reference_samples": reference.samples}
    return StudyResult(rows, _slopes(rows, "abs_error"), [s.seed for s in grid][0], meta)


def sharpness_batch(location, positive_scores, labels, h):
    """Partial and second-order sharpness at `location` for a stack of samples.

    `positive_scores` and `labels` have shape ``(reps, n)``; returns two
    ``(reps,)`` arrays.
    """
    w = sharpness_weights(location, positive_scores, h)
    y = w * labels
    partial = u_square_mean(y) / u_square_mean(w)
    second, _ = corrected_ratio_squared_means(compute_moments(w, y), partial)
    return partial, second


def _binary_draws(n, t1, t2, seed):
    ds, _ = gen_synthetic(SyntheticSpec(2, n, t1, t2, seed))
    return ds.probs[:, 1], (ds.labels == 1).astype(float)


def debias_study(n_values, reps=2000, h=0.5, location=0.17, seed=0,
                 t1=0.6, t2=0.6, reference_n=10**7, max_elems=1 << 22):
    """Bias of the partial and second-order sharpness ratios at one location.

    Binary synthetic data (the sigmoid of a scaled logit is temperature
    scaling with two classes).  The reference is the partial ratio on one
    sample of size `reference_n`.
    """
    n_values = sorted(int(n) for n in n_values)
    if len(n_values) < 1 or n_values[0] < 8 or n_values[-1] > 10**6:
        raise InvalidConfig("n values must lie in [8, 1e6]")
    if reps < 100:
        raise InvalidConfig(f"need at least 100 repetitions, got {reps}")
    ref_seed, *size_seeds = _seed_sequence(seed).spawn(1 + len(n_values))
    f_ref, y_ref = _binary_draws(reference_n, t1, t2, ref_seed)
    reference, _ = sharpness_batch(location, f_ref, y_ref, h)
    reference = float(reference)
    rows = []
    for n, ss in zip(n_values, size_seeds):
        per_chunk = max(1, max_elems // n)
        partial, second = [], []
        for child in ss.spawn(-(-reps // per_chunk)):
            m = min(per_chunk, reps - sum(len(a) for a in partial))
            f, y = _binary_draws(m * n, t1, t2, child)
            a, b = sharpness_batch(location, f.reshape(m, n), y.reshape(m, n), h)
            partial.append(a)
            second.append(b)
        partial = np.concatenate(partial)
        second = np.concatenate(second)
        for name, vals in (("partial", partial), ("second_order", second)):
            row = _summary_row(n, name, vals, reference)
            row["bias"] = abs(row["mean"] - reference)
            row["stderr"] = row["std"] / np.sqrt(reps)
            rows.append(row)
    meta = {"h": h, "location": location, "reps": reps, "t1": t1, "t2": t2,
            "reference_n": reference_n}
    return StudyResult(rows, _slopes(rows, "bias"), seed, meta)
