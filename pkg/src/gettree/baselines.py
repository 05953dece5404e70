"""Greedy axis-aligned regression trees and a bagged forest of them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# relative SSE difference treated as a tie between candidate splits
TIE_RTOL = 1e-12


@dataclass
class AxisTree:
    """Flat node arrays; ``feature[i] == -1`` marks a leaf.

    A sample goes to ``left[i]`` when ``x[feature[i]] <= threshold[i]``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    max_depth: Optional[int]
    min_samples_split: int = 2
    n_features: int = 0

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def n_leaves(self):
        return int(np.sum(self.feature < 0))

    def depth(self):
        d = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return int(d.max())

    def count_parameters(self):
        branches = self.n_nodes - self.n_leaves
        return {"branch_params": 2 * branches, "leaf_params": self.n_leaves,
                "total": 2 * branches + self.n_leaves}

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"dimension mismatch: model expects {self.n_features} features, "
                             f"got shape {X.shape}")
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            active = f >= 0
            if not active.any():
                break
            a = rows[active]
            na = node[active]
            go_left = X[a, f[active]] <= self.threshold[na]
            node[active] = np.where(go_left, self.left[na], self.right[na])
        return self.value[node]

    def to_dict(self):
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist(), "max_depth": self.max_depth,
                "min_samples_split": self.min_samples_split, "n_features": self.n_features}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["feature"], dtype=np.int64), np.asarray(d["threshold"], float),
                   np.asarray(d["left"], dtype=np.int64), np.asarray(d["right"], dtype=np.int64),
                   np.asarray(d["value"], float), d["max_depth"], d["min_samples_split"],
                   d["n_features"])


def best_split(X, y, features):
    """Lowest weighted-child-SSE axis split over ``features``.

    Candidates are midpoints between consecutive distinct sorted values.
    Returns ``(feature, threshold, sse)`` or ``None`` when no feature varies.
    Ties go to the lower feature index, then the lower threshold.
    """
    n = len(y)
    best = None
    total_sq = float(y @ y)
    for f in sorted(features):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        distinct = np.flatnonzero(xs[1:] > xs[:-1])
        if distinct.size == 0:
            continue
        csum = np.cumsum(ys)
        n_left = distinct + 1.0
        s_left = csum[distinct]
        s_right = csum[-1] - s_left
        sse = total_sq - s_left ** 2 / n_left - s_right ** 2 / (n - n_left)
        i = int(np.argmin(sse))
        # first index within tie tolerance of the minimum, i.e. the lowest threshold
        tol = TIE_RTOL * max(abs(sse[i]), total_sq, 1e-300)
        i = int(np.flatnonzero(sse <= sse[i] + tol)[0])
        cand = (f, 0.5 * (xs[distinct[i]] + xs[distinct[i] + 1]), float(sse[i]))
        if best is None or cand[2] < best[2] - TIE_RTOL * max(abs(best[2]), total_sq, 1e-300):
            best = cand
    return best


def _grow(X, y, max_depth, min_samples_split, rng=None, m=None):
    feature, threshold, left, right, value = [], [], [], [], []
    p = X.shape[1]

    def new_node(rows):
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        value.append(float(y[rows].mean()))
        return len(feature) - 1

    root = new_node(np.arange(len(y)))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, rows, d = stack.pop()
        if (max_depth is not None and d >= max_depth) or len(rows) < min_samples_split:
            continue
        yr = y[rows]
        if np.all(yr == yr[0]):
            continue
        feats = range(p) if m is None or m >= p else rng.choice(p, size=m, replace=False)
        found = best_split(X[rows], yr, feats)
        if found is None:
            continue
        f, thr, _ = found
        go_left = X[rows, f] <= thr
        lrows, rrows = rows[go_left], rows[~go_left]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(lrows)
        right[node] = new_node(rrows)
        # right pushed first so the left child is expanded first
        stack.append((right[node], rrows, d + 1))
        stack.append((left[node], lrows, d + 1))
    return AxisTree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=float),
                    np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                    np.array(value), max_depth, min_samples_split, p)


def fit_cart(ds, max_depth, min_samples_split=2):
    """Greedy variance-reduction tree on ``ds.X``, ``ds.y``."""
    if max_depth is None or max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if min_samples_split < 2:
        raise ValueError("min_samples_split must be >= 2")
    return _grow(np.asarray(ds.X, float), np.asarray(ds.y, float), max_depth, min_samples_split)


@dataclass
class Forest:
    trees: list
    seeds: list
    m: int
    max_depth: Optional[int] = None
    bootstrap: bool = True
    n_features: int = 0

    def predict(self, X):
        return np.mean([t.predict(X) for t in self.trees], axis=0)

    def count_parameters(self):
        parts = [t.count_parameters() for t in self.trees]
        return {k: sum(c[k] for c in parts) for k in ("branch_params", "leaf_params", "total")}

    def to_dict(self):
        return {"trees": [t.to_dict() for t in self.trees], "seeds": self.seeds, "m": self.m,
                "max_depth": self.max_depth, "bootstrap": self.bootstrap,
                "n_features": self.n_features}

    @classmethod
    def from_dict(cls, d):
        return cls([AxisTree.from_dict(t) for t in d["trees"]], d["seeds"], d["m"],
                   d["max_depth"], d["bootstrap"], d["n_features"])


def _grow_member(args):
    X, y, max_depth, min_samples_split, m, seed, bootstrap = args
    rng = np.random.default_rng(seed)
    rows = rng.integers(0, len(y), size=len(y)) if bootstrap else np.arange(len(y))
    return _grow(X[rows], y[rows], max_depth, min_samples_split, rng, m)


def fit_forest(ds, n_trees=100, max_depth=None, m=None, seed=0, bootstrap=True,
               min_samples_split=2, threads=1):
    """Bagged axis-aligned trees with per-split feature subsampling.

    ``m`` defaults to ``max(1, p // 3)``.
    """
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    X = np.asarray(ds.X, float)
    y = np.asarray(ds.y, float)
    p = X.shape[1]
    m = max(1, p // 3) if m is None else int(m)
    seeds = [int(s) for s in np.random.SeedSequence(int(seed)).generate_state(n_trees)]
    jobs = [(X, y, max_depth, min_samples_split, m, s, bootstrap) for s in seeds]
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(_grow_member, jobs, chunksize=max(1, n_trees // (4 * threads))))
    else:
        trees = [_grow_member(j) for j in jobs]
    return Forest(trees, seeds, m, max_depth, bootstrap, p)


def predict_baseline(model, X):
    return model.predict(X)
