"""Closed-form leaf refitting for fixed hard splits.

Constant leaves take the mean target of the samples they receive; linear
leaves take the least-squares affine fit. Degenerate leaves fall back:

* no samples: mean of the nearest ancestor subtree that has samples (k = 0);
* one sample: that sample's target (k = 0);
* fewer than p + 1 samples, or cond(X'X) above ``COND_LIMIT``: ridge on k
  with penalty ``RIDGE``, intercept unpenalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tree import leaf_index

COND_LIMIT = 1e10
RIDGE = 1e-8


@dataclass
class LeafFitReport:
    counts: np.ndarray
    kinds: list
    K: np.ndarray
    h: np.ndarray

    def to_dict(self):
        return {"counts": self.counts.tolist(), "kinds": list(self.kinds)}


def _ancestor_means(leaf, y, depth):
    """Means of ``y`` per node over the whole tree (NaN where a subtree is empty)."""
    nl = 2 ** depth
    counts = np.zeros(2 * nl)
    sums = np.zeros(2 * nl)
    counts[nl:] = np.bincount(leaf, minlength=nl)
    sums[nl:] = np.bincount(leaf, weights=y, minlength=nl)
    for t in range(nl - 1, 0, -1):
        counts[t] = counts[2 * t] + counts[2 * t + 1]
        sums[t] = sums[2 * t] + sums[2 * t + 1]
    return counts, sums


def _inherited_value(t, counts, sums):
    node = t // 2
    while counts[node] == 0:
        node //= 2
    return sums[node] / counts[node]


def _linear_leaf(Xt, yt):
    n, p = Xt.shape
    design = np.hstack([Xt, np.ones((n, 1))])
    if n >= p + 1:
        coef, _, rank, sv = np.linalg.lstsq(design, yt, rcond=None)
        cond = np.inf if sv[-1] == 0 else (sv[0] / sv[-1]) ** 2
        if rank == p + 1 and cond <= COND_LIMIT:
            return coef[:p], float(coef[p]), "least_squares"
    xm = Xt.mean(axis=0)
    ym = yt.mean()
    aug = np.vstack([Xt - xm, np.sqrt(RIDGE) * np.eye(p)])
    rhs = np.concatenate([yt - ym, np.zeros(p)])
    k = np.linalg.lstsq(aug, rhs, rcond=None)[0]
    return k, float(ym - xm @ k), "ridge_fallback"


def fit_leaf_params(leaf, X, y, depth, linear):
    """Leaf parameters from hard assignments ``leaf`` (0-based leaf positions).

    Returns ``(K, h, counts, kinds)``.
    """
    nl = 2 ** depth
    p = X.shape[1]
    K = np.zeros((nl, p))
    h = np.zeros(nl)
    kinds = []
    node_counts, node_sums = _ancestor_means(leaf, y, depth)
    order = np.argsort(leaf, kind="stable")
    bounds = np.searchsorted(leaf[order], np.arange(nl + 1))
    for j in range(nl):
        rows = order[bounds[j]:bounds[j + 1]]
        m = len(rows)
        if m == 0:
            h[j] = _inherited_value(j + nl, node_counts, node_sums)
            kinds.append("inherited")
        elif not linear:
            h[j] = node_sums[j + nl] / m
            kinds.append("mean")
        elif m == 1:
            h[j] = y[rows[0]]
            kinds.append("mean")
        else:
            K[j], h[j], kind = _linear_leaf(X[rows], y[rows])
            kinds.append(kind)
    return K, h, node_counts[nl:].astype(int), kinds


def refit_leaves(tree, ds):
    """Refit leaves in the tree's own mode. Returns ``(tree, LeafFitReport)``."""
    X = np.asarray(ds.X, dtype=float)
    y = np.asarray(ds.y, dtype=float)
    linear = tree.leaf_mode == "linear"
    K, h, counts, kinds = fit_leaf_params(leaf_index(tree, X), X, y, tree.depth, linear)
    new = tree.replace(K=K, h=h)
    return new, LeafFitReport(counts, kinds, new.K, new.h)


def refit_constant(tree, ds):
    if tree.leaf_mode != "constant":
        raise ValueError("refit_constant needs a constant-mode tree")
    return refit_leaves(tree, ds)


def refit_linear(tree, ds):
    if tree.leaf_mode != "linear":
        raise ValueError("refit_linear needs a linear-mode tree")
    return refit_leaves(tree, ds)
