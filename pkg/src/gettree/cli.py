"""Command-line entry point: ``gettree train|predict|tune|bench``.

Exit codes: 0 success, 1 user or data error, 2 internal error.
Progress goes to stderr; machine-readable output goes to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .dataset import DataError, SplitSpec, load_csv, normalize, read_matrix, split
from .evaluation import (MODEL_KINDS, RF_TREES, EvaluationError, format_table, r2,
                         run_benchmark, tune_depth)
from .modelio import load_model, save_model
from .polish import polish
from .train import TrainConfig, TrainError, fit
from .tree import ModelError, ObliqueTree, predict

log = logging.getLogger("gettree")

USER_ERRORS = (DataError, ModelError, EvaluationError, TrainError, ValueError, OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _float_pair(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'low,high', got {text!r}") from None
    return lo, hi


def _int_range(text):
    """``1:12`` or ``1,2,4``."""
    try:
        if ":" in text:
            lo, hi = (int(v) for v in text.split(":"))
            return list(range(lo, hi + 1))
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo:hi' or a comma list, got {text!r}") from None


def _target(text):
    return int(text) if text.lstrip("-").isdigit() else text


def _add_data(p, target_required=True):
    p.add_argument("--data", required=True, help="CSV file")
    p.add_argument("--target", type=_target, required=target_required,
                   help="target column name (needs --header) or 0-based index")
    p.add_argument("--header", action="store_true", help="first row is a header")
    p.add_argument("--seed", type=int, default=0)


def _add_training(p):
    p.add_argument("--leaf", choices=("constant", "linear"), default="constant")
    p.add_argument("--starts", type=int, default=10)
    p.add_argument("--epochs", type=int, default=3000)
    p.add_argument("--alpha-small", type=_float_pair, default=(5.0, 25.0))
    p.add_argument("--alpha-large", type=_float_pair, default=(50.0, 150.0))
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--optimizer", choices=("adam", "gd"), default="adam")
    p.add_argument("--polish", dest="polish", action="store_true", default=None,
                   help="run the subtree polish pass (default: on for constant leaves)")
    p.add_argument("--no-polish", dest="polish", action="store_false")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)


def build_parser():
    parser = _Parser(prog="gettree", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gettree {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one oblique tree")
    _add_data(p)
    _add_training(p)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--split", default=None, help="75/25 or 50/25/25; default trains on all rows")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--report", help="training report JSON path")

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--target", type=_target, default=None,
                   help="column to drop before predicting, if the file contains one")
    p.add_argument("--out", default="-", help="output file (default stdout)")

    p = sub.add_parser("tune", help="choose depth by validation R^2")
    _add_data(p)
    _add_training(p)
    p.add_argument("--model", choices=MODEL_KINDS, default="get")
    p.add_argument("--depths", type=_int_range, default=list(range(1, 13)))
    p.add_argument("--split", default="50/25/25", help="50/25/25 or cv:<k>")
    p.add_argument("--rf-trees", type=int, default=100)
    p.add_argument("--out", help="model JSON path for the retrained winner")
    p.add_argument("--report", help="tuning report JSON path")

    p = sub.add_parser("bench", help="compare models on one or more datasets")
    p.add_argument("--data", action="append", required=True, help="CSV file (repeatable)")
    p.add_argument("--target", type=_target, required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    _add_training(p)
    p.add_argument("--models", default="get,get-linear,cart,rf")
    p.add_argument("--depths", type=_int_range, default=list(range(1, 13)))
    p.add_argument("--rf-trees", type=_int_range, default=list(RF_TREES))
    p.add_argument("--rf-depths", default=None,
                   help="comma list of RF depths, 'none' for unlimited (default: none + --depths)")
    p.add_argument("--timing-reps", type=int, default=100)
    p.add_argument("--report", help="benchmark report JSON path")
    return parser


def _config(args, depth=1):
    return TrainConfig(depth=depth, leaf_mode=args.leaf, n_start=args.starts, n_epoch=args.epochs,
                       alpha_small=args.alpha_small, alpha_large=args.alpha_large, lr=args.lr,
                       lam=args.lam, optimizer=args.optimizer, seed=args.seed,
                       threads=args.threads, polish=args.polish)


def _flags(args):
    return {k: v for k, v in vars(args).items() if k != "func"}


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def cmd_train(args):
    raw = load_csv(args.data, args.target, args.header)
    n = len(raw.y)
    part = None
    if args.split is None:
        train_idx = np.arange(n)
    else:
        spec = SplitSpec.parse(args.split, args.seed)
        if spec.mode == "kfold":
            raise UsageError("train does not take cv:<k>; use `tune` for cross validation")
        part = split(n, spec)
        train_idx = part.train
    ds = normalize(raw, fit_rows=train_idx)
    dtrain = ds.subset(train_idx)
    config = _config(args, args.depth)
    log.info("training depth-%d %s tree on %d samples", config.depth, config.leaf_mode, dtrain.n)
    tree, report = fit(dtrain, config)
    if config.use_polish:
        log.info("polishing subtrees")
        tree, preport = polish(tree, dtrain, config)
        report.polish = preport.to_dict()
    save_model(args.out, tree, ds.norm)
    doc = report.to_dict()
    doc["flags"] = _flags(args)
    doc["train_r2"] = _safe_r2(dtrain.y, predict(tree, dtrain.X))
    if part is not None:
        for name in ("validation", "test"):
            idx = getattr(part, name)
            if idx is not None:
                d = ds.subset(idx)
                doc[f"{name}_r2"] = _safe_r2(d.y, predict(tree, d.X))
    if args.report:
        _write_json(args.report, doc)
    log.info("done: training R^2 %.4f", doc["train_r2"] if doc["train_r2"] is not None else float("nan"))
    return 0


def _safe_r2(y, yhat):
    try:
        return r2(y, yhat).r2
    except EvaluationError:
        return None


def cmd_predict(args):
    model, norm = load_model(args.model)
    X, header = read_matrix(args.data, has_header=args.header, allow_empty=True)
    if args.target is not None and X.shape[1] > 0:
        if isinstance(args.target, str):
            if header is None or args.target not in header:
                raise DataError(f"missing target column {args.target!r}")
            col = header.index(args.target)
        else:
            col = args.target % X.shape[1]
        X = np.delete(X, col, axis=1)
    n_features = model.p if isinstance(model, ObliqueTree) else model.n_features
    if X.shape[0] == 0:
        preds = np.zeros(0)
    else:
        if X.shape[1] != n_features:
            raise DataError(f"dimension mismatch: model expects {n_features} feature columns, "
                            f"data has {X.shape[1]}")
        Xn = norm.transform_X(X) if norm is not None else X
        preds = predict(model, Xn) if isinstance(model, ObliqueTree) else model.predict(Xn)
        if norm is not None:
            preds = norm.inverse_y(preds)
    text = "".join(f"{v!r}\n" for v in preds.tolist())
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


def cmd_tune(args):
    raw = load_csv(args.data, args.target, args.header)
    spec = SplitSpec.parse(args.split, args.seed)
    if spec.mode == "holdout_75_25":
        raise UsageError("tune needs a validation partition: use 50/25/25 or cv:<k>")
    part = split(len(raw.y), spec)
    config = _config(args)
    doc = {"flags": _flags(args), "model": args.model}
    if spec.mode == "kfold":
        ds = normalize(raw)
        scores = {d: [] for d in args.depths}
        for k, (tr, va) in enumerate(part.folds):
            _, _, res = tune_depth(ds, args.model, args.depths, config, (tr, va), args.seed,
                                   args.rf_trees)
            for d, s in res.scores.items():
                scores[d].append(s)
        mean = {d: float(np.mean(v)) for d, v in scores.items() if len(v) == len(part.folds)}
        if not mean:
            raise EvaluationError("every depth failed in some fold")
        best = max(sorted(mean), key=lambda d: (mean[d], -d))
        from .evaluation import train_model
        model = train_model(args.model, ds, best, config, args.rf_trees, args.seed)
        doc.update(best_depth=best, validation_r2={str(d): v for d, v in mean.items()})
    else:
        non_test = np.concatenate([part.train, part.validation])
        ds = normalize(raw, fit_rows=non_test)
        best, model, res = tune_depth(ds, args.model, args.depths, config,
                                      (part.train, part.validation), args.seed, args.rf_trees)
        test = ds.subset(part.test)
        pred = predict(model, test.X) if isinstance(model, ObliqueTree) else model.predict(test.X)
        doc.update(best_depth=best, validation_r2={str(d): v for d, v in res.scores.items()},
                   failures={str(d): v for d, v in res.failures.items()},
                   test_r2=_safe_r2(test.y, pred))
    if args.out:
        save_model(args.out, model, ds.norm)
    if args.report:
        _write_json(args.report, doc)
    sys.stdout.write(json.dumps({"best_depth": doc["best_depth"],
                                 "validation_r2": doc["validation_r2"]}) + "\n")
    return 0


def cmd_bench(args):
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    unknown = [m for m in models if m not in MODEL_KINDS]
    if unknown:
        raise UsageError(f"unknown model(s) {unknown}; choose from {', '.join(MODEL_KINDS)}")
    rf_depths = None
    if args.rf_depths:
        rf_depths = [None if v.strip().lower() == "none" else int(v)
                     for v in args.rf_depths.split(",")]
    datasets = {}
    for path in args.data:
        name = os.path.splitext(os.path.basename(path))[0]
        datasets[name] = load_csv(path, args.target, args.header)
    report = run_benchmark(datasets, models, args.depths, _config(args), args.rf_trees,
                           rf_depths, args.seed, args.timing_reps)
    report["flags"] = _flags(args)
    if args.report:
        _write_json(args.report, report)
    sys.stdout.write(format_table(report) + "\n")
    return 0


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "tune": cmd_tune, "bench": cmd_bench}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, *USER_ERRORS) as exc:
        sys.stderr.write(f"gettree {args.command}: error: {exc}\n")
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort boundary
        log.exception("internal error")
        sys.stderr.write(f"gettree {args.command}: internal error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
