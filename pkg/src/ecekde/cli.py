"""Command line interface.

Every command prints exactly one JSON document on stdout; diagnostics go
to stderr.  Exit status is 0 on success, 1 for unreadable or invalid data
and 2 for bad arguments.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np
from scipy.special import softmax

from . import binned, estimators
from .bandwidth import DEFAULT_GRID, check_grid, loo_log_likelihood_grid
from .core import LabeledDataset
from .errors import (
    CalibrationError,
    InsufficientGrid,
    InvalidConfig,
    InvalidDimension,
    InvalidLevel,
    NonPositiveTemperature,
    UnsupportedNorm,
)
from .experiments import (
    SyntheticSpec,
    bootstrap_ci,
    convergence_study,
    debias_study,
    gen_synthetic,
)

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2

# library errors that mean the flags were wrong rather than the data
ARGUMENT_ERRORS = (
    InsufficientGrid,
    InvalidConfig,
    InvalidDimension,
    InvalidLevel,
    NonPositiveTemperature,
    UnsupportedNorm,
)

DEBIAS_FLAGS = {"none": "none", "first": "first_order", "second": "second_order"}


class DataError(Exception):
    pass


class UsageError(Exception):
    pass


def format_float(x):
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def dumps(obj):
    """JSON with every float written to 17 significant digits."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _parse_float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected a comma separated list of numbers, got {text!r}")


def _parse_int_list(text):
    values = _parse_float_list(text)
    if any(v != int(v) for v in values):
        raise UsageError(f"expected integers, got {text!r}")
    return [int(v) for v in values]


def read_predictions(path, logits=False):
    """Load a prediction file: CSV ``label,p_0,...`` or JSON lines ``{"label", "probs"}``."""
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(str(exc))
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path}: no records")
    try:
        if lines[0].lstrip().startswith("{"):
            records = [json.loads(ln) for ln in lines]
            labels = [r["label"] for r in records]
            rows = [r["probs"] for r in records]
        else:
            reader = list(csv.reader(lines))
            header, body = reader[0], reader[1:]
            if not header or header[0].strip() != "label":
                raise DataError(f"{path}: header must start with 'label'")
            if not body:
                raise DataError(f"{path}: no records")
            labels = [r[0] for r in body]
            rows = [[float(v) for v in r[1:]] for r in body]
        if len({len(r) for r in rows}) != 1:
            raise DataError(f"{path}: rows have different numbers of classes")
        lab = np.array([float(v) for v in labels])
        if np.any(lab != np.round(lab)):
            raise DataError(f"{path}: labels must be integers")
        probs = np.array(rows, dtype=float)
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        raise DataError(f"{path}: {exc}")
    if probs.ndim != 2 or probs.shape[1] == 0:
        raise DataError(f"{path}: no probability columns")
    if logits:
        probs = softmax(probs, axis=1)
    try:
        return LabeledDataset(probs, lab.astype(int))
    except CalibrationError as exc:
        raise DataError(f"{path}: {exc}")


def write_predictions(path, probs, labels=None, prefix="p"):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        K = probs.shape[1]
        head = [f"{prefix}_{k}" for k in range(K)]
        writer.writerow((["label"] if labels is not None else []) + head)
        for i, row in enumerate(probs):
            cells = [format(float(v), ".17g") for v in row]
            writer.writerow(([int(labels[i])] if labels is not None else []) + cells)


def _bandwidth_for(ds, args):
    if args.bandwidth is not None and args.bandwidth_grid is not None:
        raise UsageError("give either --bandwidth or --bandwidth-grid, not both")
    if args.bandwidth is not None:
        return args.bandwidth
    grid = check_grid(DEFAULT_GRID if args.bandwidth_grid is None
                      else _parse_float_list(args.bandwidth_grid))
    # the top-label kernel lives on the confidences; the others on the full vectors
    if args.kind == "toplabel":
        conf, _ = estimators.top_label(ds.probs, ds.labels)
        points = np.stack([conf, 1.0 - conf], axis=1)
    else:
        points = ds.probs
    ll = loo_log_likelihood_grid(points, grid)
    return float(grid[int(np.argmax(ll))])


def cmd_estimate(args):
    ds = read_predictions(args.file, args.logits)
    if args.method == "bin" and args.kind == "marginal":
        raise UsageError("binned estimation supports canonical and toplabel only")
    if args.method == "bin" and args.debias != "none":
        raise UsageError("--debias applies to the kernel method only")
    record = {"kind": args.kind, "method": args.method, "p": args.p}
    if args.method == "kde":
        if args.bins is not None:
            raise UsageError("--bins applies to the binned method only")
        h = _bandwidth_for(ds, args)
        cfg = estimators.KdeConfig(h, args.p, DEBIAS_FLAGS[args.debias])
        fn = {"canonical": estimators.ece_kde_canonical,
              "toplabel": estimators.ece_kde_toplabel,
              "marginal": estimators.ece_kde_marginal}[args.kind]

        def estimate(d):
            return fn(d, cfg).value

        record.update(bandwidth=h, debias=args.debias, bins=None)
    else:
        if args.bandwidth is not None or args.bandwidth_grid is not None:
            raise UsageError("bandwidth flags apply to the kernel method only")
        bins_arg = args.bins or "doane"
        if bins_arg == "doane":
            sample = (estimators.top_label(ds.probs, ds.labels)[0]
                      if args.kind == "toplabel" else ds.probs.ravel())
            n_bins = binned.doane_bins(sample)
        else:
            try:
                n_bins = int(bins_arg)
            except ValueError:
                raise UsageError(f"--bins must be an integer or 'doane', got {bins_arg!r}")

        if args.kind == "canonical":
            def estimate(d):
                return binned.ece_bin_canonical(d, n_bins, args.p).value
        else:
            def estimate(d):
                return binned.ece_bin_toplabel(d, n_bins, args.scheme, args.p).value

        record.update(bandwidth=None, debias="none", bins=n_bins,
                      scheme=args.scheme if args.kind == "toplabel" else None)

    def report(v):
        return v ** (1.0 / args.p) if args.root else v

    value = estimate(ds)
    ci = None
    if args.bootstrap:
        lo, hi = bootstrap_ci(ds, estimate, args.bootstrap, args.level, args.seed)
        ci = {"lo": report(max(lo, 0.0)), "hi": report(max(hi, 0.0)), "level": args.level,
              "B": args.bootstrap}
    record.update(estimate=report(max(value, 0.0)), root=args.root, n=ds.n, K=ds.K,
                  seed=args.seed, ci=ci)
    return record


def cmd_bandwidth(args):
    ds = read_predictions(args.file, args.logits)
    grid = check_grid(DEFAULT_GRID if args.grid is None else _parse_float_list(args.grid))
    ll = loo_log_likelihood_grid(ds.probs, grid)
    best = int(np.argmax(ll))
    return {"bandwidth": float(grid[best]), "grid": grid.tolist(),
            "log_likelihood": ll.tolist(), "n": ds.n, "K": ds.K}


def _sidecar(path):
    root, ext = os.path.splitext(path)
    return f"{root}.truth{ext or '.csv'}"


def cmd_synth(args):
    ds, truth = gen_synthetic(SyntheticSpec(args.K, args.n, args.t1, args.t2, args.seed))
    try:
        write_predictions(args.out, ds.probs, ds.labels)
        write_predictions(_sidecar(args.out), truth, prefix="q")
    except OSError as exc:
        raise DataError(str(exc))
    return {"data": args.out, "truth": _sidecar(args.out), "K": args.K, "n": args.n,
            "t1": args.t1, "t2": args.t2, "seed": args.seed}


def _kde_runner(p, bandwidth, grid):
    chosen = {}

    def run(ds, n):
        # bandwidth picked by LOO likelihood on the first replicate of each size
        if n not in chosen:
            if bandwidth is not None:
                chosen[n] = bandwidth
            else:
                ll = loo_log_likelihood_grid(ds.probs, grid)
                chosen[n] = float(grid[int(np.argmax(ll))])
        return estimators.ece_kde_canonical(ds, estimators.KdeConfig(chosen[n], p)).value

    return run, chosen


def build_estimators(names, p, bandwidth=None, grid=DEFAULT_GRID):
    """Map estimator names (``kde`` or ``bin:B``) to study callables."""
    out = {}
    chosen = None
    for name in names:
        if name == "kde":
            out[name], chosen = _kde_runner(p, bandwidth, grid)
        elif name.startswith("bin:"):
            try:
                B = int(name[4:])
            except ValueError:
                raise UsageError(f"bad estimator {name!r}")
            out[name] = lambda ds, n, B=B: binned.ece_bin_canonical(ds, B, p).value
        else:
            raise UsageError(f"unknown estimator {name!r}; use kde or bin:B")
    return out, chosen


def _write_study(result, prefix):
    try:
        result.to_csv(prefix + ".csv")
        with open(prefix + ".json", "w") as fh:
            fh.write(dumps(result.to_dict()))
    except OSError as exc:
        raise DataError(str(exc))
    return {"csv": prefix + ".csv", "json": prefix + ".json",
            "slopes": {k: {"slope": s, "stderr": e} for k, (s, e) in result.slopes.items()},
            "seed": result.seed}


def cmd_converge(args):
    sizes = _parse_int_list(args.n_grid)
    names = [s.strip() for s in args.estimators.split(",") if s.strip()]
    fns, chosen = build_estimators(names, args.p, args.bandwidth)
    grid = [SyntheticSpec(args.K, n, args.t1, args.t2, args.seed) for n in sizes]
    result = convergence_study(grid, fns, args.seeds, p=args.p, mc_samples=args.mc_samples)
    if chosen is not None:
        result.meta["bandwidths"] = {str(n): h for n, h in chosen.items()}
    return _write_study(result, args.out)


def cmd_debias_demo(args):
    if args.reps < 100:
        raise UsageError("--reps must be at least 100")
    result = debias_study(_parse_int_list(args.n_list), args.reps, args.h, args.location,
                          args.seed, reference_n=args.reference_n)
    out = _write_study(result, args.out)
    out["reference"] = result.rows[0]["reference"]
    return out


def build_parser():
    parser = argparse.ArgumentParser(prog="ecekde", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate calibration error of a prediction file")
    est.add_argument("file")
    est.add_argument("--kind", choices=["canonical", "marginal", "toplabel"], default="canonical")
    est.add_argument("--method", choices=["kde", "bin"], default="kde")
    est.add_argument("--p", type=float, default=1.0)
    est.add_argument("--bandwidth", type=float)
    est.add_argument("--bandwidth-grid")
    est.add_argument("--debias", choices=sorted(DEBIAS_FLAGS), default="none")
    est.add_argument("--bins", help="bin count or 'doane' (binned method)")
    est.add_argument("--scheme", choices=["equal", "adaptive"], default="adaptive")
    est.add_argument("--root", action="store_true", help="report the error rather than its p-th power")
    est.add_argument("--bootstrap", type=int, default=0, metavar="B")
    est.add_argument("--level", type=float, default=0.95)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--logits", action="store_true", help="apply softmax to each row first")
    est.set_defaults(func=cmd_estimate)

    bw = sub.add_parser("bandwidth", help="select a bandwidth by LOO likelihood")
    bw.add_argument("file")
    bw.add_argument("--grid")
    bw.add_argument("--logits", action="store_true")
    bw.set_defaults(func=cmd_bandwidth)

    syn = sub.add_parser("synth", help="write a synthetic prediction file and its true conditional")
    syn.add_argument("--K", type=int, default=4)
    syn.add_argument("--n", type=int, default=20000)
    syn.add_argument("--t1", type=float, default=0.6)
    syn.add_argument("--t2", type=float, default=0.6)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--out", required=True)
    syn.set_defaults(func=cmd_synth)

    con = sub.add_parser("converge", help="error of estimators against the exact value as n grows")
    con.add_argument("--K", type=int, default=2)
    con.add_argument("--t1", type=float, default=0.6)
    con.add_argument("--t2", type=float, default=0.6)
    con.add_argument("--p", type=float, default=1.0)
    con.add_argument("--n-grid", default="250,500,1000,2000,4000,8000,16000")
    con.add_argument("--seeds", type=int, default=20)
    con.add_argument("--estimators", default="kde")
    con.add_argument("--bandwidth", type=float)
    con.add_argument("--mc-samples", type=int, default=10**7)
    con.add_argument("--seed", type=int, default=0)
    con.add_argument("--out", required=True, help="output prefix for .csv and .json")
    con.set_defaults(func=cmd_converge)

    deb = sub.add_parser("debias-demo", help="bias of partial vs second-order sharpness")
    deb.add_argument("--n-list", default="32,64,128,256,512,1024,2048,4096,8192,16384")
    deb.add_argument("--reps", type=int, default=2000)
    deb.add_argument("--h", type=float, default=0.5)
    deb.add_argument("--location", type=float, default=0.17)
    deb.add_argument("--reference-n", type=int, default=10**7)
    deb.add_argument("--seed", type=int, default=0)
    deb.add_argument("--out", required=True, help="output prefix for .csv and .json")
    deb.set_defaults(func=cmd_debias_demo)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        record = args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ARGUMENT_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CalibrationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    record["runtime_ms"] = (time.perf_counter() - start) * 1e3
    sys.stdout.write(dumps(record) + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
