"""Scores, statistical comparisons, depth tuning and benchmark assembly."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special, stats
from threadpoolctl import threadpool_limits

from . import baselines
from .dataset import Dataset, SplitSpec, normalize, split
from .polish import polish
from .train import TrainConfig, fit
from .tree import ObliqueTree, count_parameters, predict

log = logging.getLogger(__name__)

MODEL_KINDS = ("get", "get-linear", "cart", "rf")
RF_TREES = (50, 100, 200, 300, 400, 500)


class EvaluationError(ValueError):
    pass


@dataclass
class Score:
    r2: float
    sse: float
    n_eval: int


def r2(y_true, y_pred) -> Score:
    """Coefficient of determination against the evaluation-set mean."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.size < 2:
        raise EvaluationError("r2 needs two equal-length vectors with at least 2 entries")
    resid = y_true - y_pred
    sse = float(resid @ resid)
    dev = y_true - y_true.mean()
    sst = float(dev @ dev)
    if sst == 0:
        raise EvaluationError("R^2 undefined: y_true is constant")
    return Score(1.0 - sse / sst, sse, int(y_true.size))


@dataclass
class TTestResult:
    t_statistic: float
    p_value: float
    dof: int
    ci95: tuple


def student_t_sf2(t, dof):
    """Two-sided tail probability P(|T| >= |t|) via the regularized incomplete beta."""
    if math.isinf(t):
        return 0.0
    return float(special.betainc(0.5 * dof, 0.5, dof / (dof + t * t)))


def paired_ttest(scores_a, scores_b) -> TTestResult:
    """Two-sided paired Student t-test on ``a - b``.

    All-zero differences give ``t = 0, p = 1``; zero spread with a nonzero
    mean gives an infinite statistic and ``p = 0``.
    """
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise EvaluationError("paired t-test needs two equal-length score lists (length >= 2)")
    d = a - b
    n = d.size
    dof = n - 1
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0:
        if mean == 0:
            return TTestResult(0.0, 1.0, dof, (0.0, 0.0))
        return TTestResult(math.copysign(math.inf, mean), 0.0, dof, (mean, mean))
    se = sd / math.sqrt(n)
    t = mean / se
    half = float(stats.t.ppf(0.975, dof)) * se
    return TTestResult(t, student_t_sf2(t, dof), dof, (mean - half, mean + half))


def friedman_rank(score_table):
    """Mean rank per model (columns) over datasets (rows); rank 1 is the highest score.

    Tied scores share the mean of the ranks they span.
    """
    table = np.asarray(score_table, dtype=float)
    if table.ndim != 2 or table.size == 0:
        raise EvaluationError("score table must be a non-empty datasets x models matrix")
    if not np.all(np.isfinite(table)):
        raise EvaluationError("score table has missing entries")
    ranks = np.vstack([stats.rankdata(-row, method="average") for row in table])
    return ranks.mean(axis=0)


def measure_prediction_time(model, X, repetitions=100):
    """Mean seconds per full-batch prediction, after one untimed warm-up call."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    fn = _predictor(model)
    with threadpool_limits(1):
        fn(X)
        t0 = time.perf_counter()
        for _ in range(repetitions):
            fn(X)
        return (time.perf_counter() - t0) / repetitions


def _predictor(model):
    if isinstance(model, ObliqueTree):
        return lambda X: predict(model, X)
    return model.predict


def model_parameters(model):
    if isinstance(model, ObliqueTree):
        return count_parameters(model)
    return model.count_parameters()


def train_model(kind, ds, depth, config: Optional[TrainConfig] = None, n_trees=100, seed=0):
    """Fit one model of ``kind`` at ``depth`` (``None`` = unlimited for rf)."""
    if kind in ("get", "get-linear"):
        base = config or TrainConfig()
        cfg = dataclasses.replace(base, depth=depth,
                                  leaf_mode="constant" if kind == "get" else "linear")
        tree, report = fit(ds, cfg)
        if cfg.use_polish:
            tree, preport = polish(tree, ds, cfg)
            report.polish = preport.to_dict()
        return tree
    if kind == "cart":
        return baselines.fit_cart(ds, depth)
    if kind == "rf":
        threads = config.threads if config is not None else 1
        return baselines.fit_forest(ds, n_trees=n_trees, max_depth=depth, seed=seed,
                                    threads=threads)
    raise EvaluationError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


@dataclass
class TuneResult:
    best: object
    model: object
    scores: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)


def _tune(ds, train_idx, val_idx, grid, make):
    """Score each setting on the validation rows, retrain the winner on train+validation."""
    dtrain, dval = ds.subset(train_idx), ds.subset(val_idx)
    scores, failures = {}, {}
    best, best_r2 = None, -math.inf
    for setting in grid:
        try:
            model = make(dtrain, setting)
            s = r2(dval.y, _predictor(model)(dval.X)).r2
        except Exception as exc:  # noqa: BLE001 - a failed setting is recorded, not fatal
            failures[setting] = f"{type(exc).__name__}: {exc}"
            log.warning("setting %r failed: %s", setting, exc)
            continue
        scores[setting] = s
        # grid order decides ties: earlier (smaller) setting wins
        if s > best_r2:
            best, best_r2 = setting, s
    if best is None:
        raise EvaluationError(f"every setting failed: {failures}")
    merged = np.sort(np.concatenate([train_idx, val_idx]))
    return TuneResult(best, make(ds.subset(merged), best), scores, failures)


def tune_depth(ds, model_kind, depth_grid, config=None, partition=None, seed=0, n_trees=100):
    """Pick the depth with the best validation R^2 and retrain on train+validation.

    ``partition`` is a ``(train_idx, val_idx)`` pair; by default a 2:1
    split of ``ds`` drawn with ``seed``. Returns ``(depth, model, TuneResult)``.
    """
    depth_grid = list(depth_grid)
    if not depth_grid:
        raise EvaluationError("empty depth grid")
    if partition is None:
        perm = np.random.default_rng(seed).permutation(ds.n)
        cut = int(round(2 * ds.n / 3))
        partition = (np.sort(perm[:cut]), np.sort(perm[cut:]))
    res = _tune(ds, *partition, sorted(depth_grid),
                lambda d, depth: train_model(model_kind, d, depth, config, n_trees, seed))
    return res.best, res.model, res


def run_benchmark(datasets, models=MODEL_KINDS, depth_grid=range(1, 13), config=None,
                  rf_trees=RF_TREES, rf_depths=None, seed=0, timing_reps=100):
    """Tune, train and score every model on every dataset.

    ``datasets`` maps a name to a :class:`~gettree.dataset.RawData`. Each
    dataset is split 50/25/25; settings are tuned on the validation part and
    the winner retrained on train+validation, then scored on the test part.
    Returns a JSON-ready report dict.
    """
    config = config or TrainConfig(seed=seed)
    depth_grid = sorted(depth_grid)
    rf_depths = list(rf_depths) if rf_depths is not None else [None] + depth_grid
    report = {"models": list(models), "datasets": {}, "aggregate": {}}
    for name, raw in datasets.items():
        part = split(len(raw.y), SplitSpec("holdout_50_25_25", seed))
        fit_rows = np.concatenate([part.train, part.validation])
        ds = normalize(raw, fit_rows=fit_rows)
        test = ds.subset(part.test)
        entry = {}
        for kind in models:
            t0 = time.perf_counter()
            try:
                if kind == "rf":
                    grid = [(t, d) for t in rf_trees for d in rf_depths]
                    res = _tune(ds, part.train, part.validation, grid,
                                lambda d, s: baselines.fit_forest(d, n_trees=s[0], max_depth=s[1],
                                                                  seed=seed,
                                                                  threads=config.threads))
                    n_trees, depth = res.best
                    model = res.model
                    val_scores = {f"{k[0]}x{k[1]}": v for k, v in res.scores.items()}
                else:
                    depth, model, res = tune_depth(ds, kind, depth_grid, config,
                                                   (part.train, part.validation), seed)
                    n_trees = 1
                    val_scores = {str(k): v for k, v in res.scores.items()}
                train_time = time.perf_counter() - t0
                score = r2(test.y, _predictor(model)(test.X))
                entry[kind] = {
                    "test_r2": score.r2,
                    "depth": depth if kind != "rf" else (model.trees[0].max_depth),
                    "realized_depth": (max(t.depth() for t in model.trees) if kind == "rf"
                                       else depth),
                    "n_trees": n_trees,
                    "parameters": model_parameters(model),
                    "train_time": train_time,
                    "predict_time": measure_prediction_time(model, test.X, timing_reps),
                    "validation_r2": val_scores,
                    "status": "ok",
                }
            except Exception as exc:  # noqa: BLE001 - per-model failures are recorded
                log.error("%s on %s failed: %s", kind, name, exc)
                entry[kind] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
        report["datasets"][name] = entry
    _aggregate(report)
    return report


def _aggregate(report):
    models = report["models"]
    names = list(report["datasets"])
    ok = [m for m in models if all(report["datasets"][n][m]["status"] == "ok" for n in names)]
    agg = report["aggregate"]
    agg["mean_test_r2"] = {
        m: float(np.mean([report["datasets"][n][m]["test_r2"] for n in names])) for m in ok}
    if ok and names:
        table = [[report["datasets"][n][m]["test_r2"] for m in ok] for n in names]
        agg["friedman_rank"] = dict(zip(ok, friedman_rank(table).tolist()))
    agg["ttests"] = {}
    if len(names) >= 2:
        for i, a in enumerate(ok):
            for b in ok[i + 1:]:
                res = paired_ttest([report["datasets"][n][a]["test_r2"] for n in names],
                                   [report["datasets"][n][b]["test_r2"] for n in names])
                agg["ttests"][f"{a} vs {b}"] = dataclasses.asdict(res)
    return report


def format_table(report):
    """Column-aligned text summary: model, trees, depth, test R^2 (%), rank."""
    rows = [("dataset", "model", "trees", "depth", "test R2 (%)", "params")]
    for name, entry in report["datasets"].items():
        for m in report["models"]:
            e = entry[m]
            if e["status"] != "ok":
                rows.append((name, m, "-", "-", "failed", "-"))
                continue
            depth = e["realized_depth"] if m == "rf" else e["depth"]
            rows.append((name, m, str(e["n_trees"]), str(depth), f"{100 * e['test_r2']:.2f}",
                         str(e["parameters"]["total"])))
    agg = report["aggregate"]
    for m in report["models"]:
        if m in agg.get("mean_test_r2", {}):
            rows.append(("MEAN", m, "", "", f"{100 * agg['mean_test_r2'][m]:.2f}",
                         f"rank {agg['friedman_rank'][m]:.2f}"))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)
