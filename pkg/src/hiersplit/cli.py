"""Experiment harness.

Subcommands:

* ``svm``  — train the hierarchical / soft-margin / QP-oracle classifiers on
  an Iris-format CSV and emit a JSON record plus an iteration-trace CSV;
* ``trex`` — run (H)TREX on synthetic or file data, emit the selection JSON
  and the best-over-j trace CSV;
* ``selftest`` — fast invariant suite, exit 0 iff green.

Outputs are written atomically (temp file + rename) and are byte-identical
for identical configuration and seed.  Options may come from an INI config
file (section per subcommand); command-line flags win.
"""

import argparse
import configparser
import csv
import io
import json
import os
import sys

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    HiersplitError,
    NumericalError,
    StructuralError,
)
from .selftest import run_selftest
from .svm import (
    SvmConfig,
    error_count,
    hinge_loss,
    iris_subsets,
    m2lehl_train,
    original_svm_qp,
    softmargin_train,
)
from .trex import RegressionData, TrexSpec, htrex_solve, smooth_diff_psi, \
    synth_generate, trex_solve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4
EXIT_SELFTEST = 5

_IRIS_CLASSES = {"setosa": 0, "versicolor": 1, "virginica": 2}


def atomic_write(path, text):
    """Write text to ``path`` via a temp file so failures leave no partial file."""
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_iris_csv(path):
    """Parse a standard 150 x 5 Iris CSV (4 numeric features + species label).

    A single header row is tolerated.  Species names may carry an
    ``Iris-`` prefix.  Malformed rows raise :class:`DataError` with the line
    number.
    """
    features, species = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 5:
                raise DataError(f"{path}:{lineno}: expected 5 columns, got {len(row)}")
            try:
                vals = [float(c) for c in row[:4]]
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise DataError(f"{path}:{lineno}: non-numeric feature values")
            name = row[4].strip().lower().removeprefix("iris-")
            if name not in _IRIS_CLASSES:
                raise DataError(f"{path}:{lineno}: unknown species {row[4]!r}")
            features.append(vals)
            species.append(_IRIS_CLASSES[name])
    if len(features) != 150:
        raise DataError(f"{path}: expected 150 samples, got {len(features)}")
    return np.asarray(features), np.asarray(species)


def read_matrix_csv(path, expect_cols=None):
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                if lineno == 1:
                    continue
                raise DataError(f"{path}:{lineno}: non-numeric entry")
            if expect_cols is not None and len(rows[-1]) != expect_cols:
                raise DataError(
                    f"{path}:{lineno}: expected {expect_cols} columns"
                )
    if not rows:
        raise DataError(f"{path}: no numeric rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DataError(f"{path}: ragged rows (widths {sorted(widths)})")
    return np.asarray(rows)


def _json_text(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _trace_text(trace):
    buf = io.StringIO()
    trace.write_csv(buf)
    return buf.getvalue()


def _load_config(path, section):
    if path is None:
        return {}
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path!r} not found")
    out = {}
    for sec in ("common", section):
        if parser.has_section(sec):
            out.update(dict(parser.items(sec)))
    return out


def _resolve(args, section, casts):
    """Fill unset CLI options from the config file, then cast."""
    cfg = _load_config(args.config, section)
    for key, cast in casts.items():
        if getattr(args, key, None) is None and key in cfg:
            try:
                setattr(args, key, cast(cfg[key]))
            except ValueError as exc:
                raise ConfigError(f"config key {key}: {exc}")
    return args


def _float_or_inf(text):
    if str(text).lower() in ("inf", "infinity", "none"):
        return float("inf")
    return float(text)


def run_svm(args):
    args = _resolve(args, "svm", {
        "subset": str, "mode": str, "alpha": float, "lambda0": float,
        "max_iter": int, "radius": float, "c": float,
    })
    subset = args.subset or "sep"
    mode = args.mode or "all"
    features, species = read_iris_csv(args.data)
    dataset = iris_subsets(features, species)[subset]
    cfg = SvmConfig(
        radius=args.radius,
        alpha=args.alpha if args.alpha is not None else 0.5,
        lambda0=args.lambda0 if args.lambda0 is not None else 1.0,
        max_iter=args.max_iter if args.max_iter is not None else 50_000,
    )
    record = {"subset": subset, "mode": mode, "classifiers": {}}
    trace = None
    if mode in ("m2lehl", "all"):
        clf, trace = m2lehl_train(dataset, cfg)
        record["classifiers"]["m2lehl"] = clf.to_record(dataset)
    if mode in ("softmargin", "all"):
        clf = softmargin_train(dataset, C=args.c if args.c is not None else 1.0,
                               cfg=cfg)
        record["classifiers"]["softmargin"] = clf.to_record(dataset)
    if mode in ("qp", "all"):
        try:
            clf = original_svm_qp(dataset)
            record["classifiers"]["qp"] = clf.to_record(dataset)
        except StructuralError as exc:
            if mode == "qp":
                raise
            record["classifiers"]["qp"] = {"infeasible": str(exc)}
    if args.out:
        atomic_write(args.out, _json_text(record))
    if args.trace and trace is not None:
        atomic_write(args.trace, _trace_text(trace))
    return EXIT_OK


def run_trex(args):
    args = _resolve(args, "trex", {
        "mode": str, "q": float, "beta": float, "psi": str, "n": int, "p": int,
        "snr": _float_or_inf, "seed": int, "max_iter": int, "alpha": float,
        "lambda0": float, "workers": int,
    })
    mode = args.mode or "trex"
    q = args.q if args.q is not None else 2.0
    beta = args.beta if args.beta is not None else 0.5
    alpha = args.alpha if args.alpha is not None else 1.95
    lambda0 = args.lambda0 if args.lambda0 is not None else 1.0
    max_iter = args.max_iter if args.max_iter is not None else 10_000
    btru = None
    if args.x or args.z:
        if not (args.x and args.z):
            raise ConfigError("file input needs both --x and --z")
        X = read_matrix_csv(args.x)
        zcol = read_matrix_csv(args.z)
        if zcol.shape[1] != 1:
            raise DataError(f"{args.z}: expected a single column")
        data = RegressionData(X, zcol[:, 0])
        meta = {"source": {"x": args.x, "z": args.z}}
    else:
        n = args.n if args.n is not None else 30
        p = args.p if args.p is not None else 20
        snr = args.snr if args.snr is not None else float("inf")
        seed = args.seed if args.seed is not None else 0
        data, btru = synth_generate(n, p, snr, seed)
        meta = {"source": {"n": n, "p": p, "seed": seed,
                           "snr": "inf" if np.isinf(snr) else snr}}
    spec = TrexSpec(data, q=q, beta=beta)
    psi_name = args.psi or ("smoothdiff" if mode == "htrex" else "none")
    if mode == "htrex":
        if psi_name == "none":
            raise ConfigError("htrex needs a psi (try --psi smoothdiff)")
        psi = smooth_diff_psi(spec.p)
        result = htrex_solve(spec, psi, alpha=alpha, lambda0=lambda0,
                             max_iter=max_iter, parallel=args.parallel,
                             workers=args.workers, btru=btru)
    else:
        result = trex_solve(spec, alpha=alpha, max_iter=max_iter,
                            parallel=args.parallel, workers=args.workers,
                            btru=btru)
    record = {
        "mode": mode,
        "q": q,
        "beta": beta,
        "alpha": alpha,
        "max_iter": max_iter,
        **meta,
        "result": result.to_record(btru),
    }
    if args.out:
        atomic_write(args.out, _json_text(record))
    if args.trace:
        atomic_write(args.trace, _trace_text(result.aggregate_trace()))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hiersplit",
        description="hierarchical convex optimization experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_svm = sub.add_parser("svm", help="hierarchical SVM experiments (Iris CSV)")
    p_svm.add_argument("--data", required=True, help="Iris-format CSV path")
    p_svm.add_argument("--subset", choices=("sep", "nsep"))
    p_svm.add_argument("--mode", choices=("m2lehl", "softmargin", "qp", "all"))
    p_svm.add_argument("--alpha", type=float)
    p_svm.add_argument("--lambda0", type=float)
    p_svm.add_argument("--max-iter", dest="max_iter", type=int)
    p_svm.add_argument("--radius", type=float)
    p_svm.add_argument("--c", type=float, help="soft-margin tradeoff (default 1)")
    p_svm.add_argument("--out", help="JSON output path")
    p_svm.add_argument("--trace", help="trace CSV path")
    p_svm.add_argument("--config", help="INI config file")
    p_svm.set_defaults(func=run_svm)

    p_trex = sub.add_parser("trex", help="(hierarchical) TREX experiments")
    p_trex.add_argument("--mode", choices=("trex", "htrex"))
    p_trex.add_argument("--q", type=float)
    p_trex.add_argument("--beta", type=float)
    p_trex.add_argument("--psi", choices=("none", "smoothdiff"))
    p_trex.add_argument("--n", type=int)
    p_trex.add_argument("--p", type=int)
    p_trex.add_argument("--snr", type=_float_or_inf, help="dB; inf = noise-free")
    p_trex.add_argument("--seed", type=int)
    p_trex.add_argument("--max-iter", dest="max_iter", type=int)
    p_trex.add_argument("--alpha", type=float)
    p_trex.add_argument("--lambda0", type=float)
    p_trex.add_argument("--x", help="design matrix CSV (instead of synthetic)")
    p_trex.add_argument("--z", help="response CSV, one column")
    p_trex.add_argument("--parallel", action="store_true",
                        help="run the 2p subproblems in parallel")
    p_trex.add_argument("--workers", type=int)
    p_trex.add_argument("--out", help="JSON output path")
    p_trex.add_argument("--trace", help="trace CSV path")
    p_trex.add_argument("--config", help="INI config file")
    p_trex.set_defaults(func=run_trex)

    p_self = sub.add_parser("selftest", help="fast invariant suite")
    p_self.set_defaults(func=lambda args: run_selftest())

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, StructuralError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DivergenceError, NumericalError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except HiersplitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
