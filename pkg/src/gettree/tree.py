"""Complete oblique regression tree: indexing, hard routing, prediction, I/O.

Nodes are numbered breadth-first from 1. Branch node ``t`` (``1 <= t < 2**D``)
sends a sample left to ``2t`` when ``b_t - a_t . x > 0`` and right to ``2t+1``
otherwise, so a sample lying exactly on a hyperplane goes right.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import NormalizationTransform

FORMAT_VERSION = 1
LEAF_MODES = ("constant", "linear")


class ModelError(ValueError):
    """Schema or consistency violation in a model document or tree."""


@dataclass(frozen=True)
class ObliqueTree:
    depth: int
    A: np.ndarray  # (2**D - 1, p) split weights, row t-1 for node t
    b: np.ndarray  # (2**D - 1,) thresholds
    K: np.ndarray  # (2**D, p) leaf coefficients, row t - 2**D for leaf t
    h: np.ndarray  # (2**D,) leaf intercepts
    leaf_mode: str = "constant"

    def __post_init__(self):
        D = int(self.depth)
        if D < 1:
            raise ModelError("depth must be >= 1")
        A = np.array(self.A, dtype=float, ndmin=2)
        b = np.array(self.b, dtype=float).ravel()
        K = np.array(self.K, dtype=float, ndmin=2)
        h = np.array(self.h, dtype=float).ravel()
        nb, nl = 2 ** D - 1, 2 ** D
        p = A.shape[1]
        if A.shape != (nb, p) or b.shape != (nb,):
            raise ModelError(f"depth {D} needs {nb} splits; got A{A.shape}, b{b.shape}")
        if K.shape != (nl, p) or h.shape != (nl,):
            raise ModelError(f"depth {D} needs {nl} leaves with p={p}; got K{K.shape}, h{h.shape}")
        if self.leaf_mode not in LEAF_MODES:
            raise ModelError(f"leaf_mode must be one of {LEAF_MODES}")
        if self.leaf_mode == "constant" and np.any(K != 0):
            raise ModelError("constant-mode tree must have all-zero leaf coefficients")
        for arr in (A, b, K, h):
            arr.setflags(write=False)
        object.__setattr__(self, "depth", D)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "h", h)

    @property
    def p(self):
        return self.A.shape[1]

    @property
    def n_branch(self):
        return 2 ** self.depth - 1

    @property
    def n_leaves(self):
        return 2 ** self.depth

    def replace(self, **changes):
        fields = dict(depth=self.depth, A=self.A, b=self.b, K=self.K, h=self.h,
                      leaf_mode=self.leaf_mode)
        fields.update(changes)
        return ObliqueTree(**fields)


def ancestor_sets(depth):
    """Left/right ancestor lists (root first) for every leaf of a depth-``depth`` tree.

    Returns a dict ``{leaf_index: (left_ancestors, right_ancestors)}``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    out = {}
    for t in range(2 ** depth, 2 ** (depth + 1)):
        left, right = [], []
        node = t
        while node > 1:
            parent = node // 2
            (left if node % 2 == 0 else right).append(parent)
            node = parent
        out[t] = (left[::-1], right[::-1])
    return out


def node_depth(t):
    """Depth of node ``t`` (root is 0)."""
    return int(t).bit_length() - 1


def _check_X(tree, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != tree.p:
        raise ModelError(f"dimension mismatch: tree expects {tree.p} features, got shape {X.shape}")
    return X


def branch_tests(tree, X):
    """Hard branching test ``I[i, j] = 1(b_j - a_j . x_i > 0)`` for every branch node."""
    X = _check_X(tree, X)
    return (tree.b[None, :] - X @ tree.A.T > 0).astype(float)


def hard_route(tree, X):
    """Hard routing matrix (n, 2**D) built from the ancestor product form."""
    I = branch_tests(tree, X)
    P = np.ones((I.shape[0], tree.n_leaves))
    for t, (left, right) in ancestor_sets(tree.depth).items():
        col = t - tree.n_leaves
        for j in left:
            P[:, col] *= I[:, j - 1]
        for j in right:
            P[:, col] *= 1.0 - I[:, j - 1]
    return P


def leaf_index(tree, X):
    """Position (0-based, in ``0..2**D - 1``) of the leaf each sample reaches."""
    X = _check_X(tree, X)
    node = np.ones(X.shape[0], dtype=np.int64)
    for _ in range(tree.depth):
        j = node - 1
        goes_left = tree.b[j] - np.einsum("ij,ij->i", X, tree.A[j]) > 0
        node = 2 * node + (~goes_left)
    return node - tree.n_leaves


def predict(tree, X):
    X = _check_X(tree, X)
    leaf = leaf_index(tree, X)
    if tree.leaf_mode == "constant":
        return tree.h[leaf].copy()
    return np.einsum("ij,ij->i", X, tree.K[leaf]) + tree.h[leaf]


def hard_loss(tree, ds_or_X, y=None):
    """Sum of squared residuals under hard routing."""
    if y is None:
        X, y = ds_or_X.X, ds_or_X.y
    else:
        X = ds_or_X
    r = np.asarray(y, dtype=float) - predict(tree, X)
    return float(r @ r)


def count_parameters(tree=None, *, depth=None, p=None, leaf_mode=None):
    """Branch, leaf and total parameter counts for a complete tree."""
    if tree is not None:
        depth, p, leaf_mode = tree.depth, tree.p, tree.leaf_mode
    branch = (2 ** depth - 1) * (p + 1)
    leaf = 2 ** depth * (1 if leaf_mode == "constant" else p + 1)
    return {"branch_params": branch, "leaf_params": leaf, "total": branch + leaf}


def to_dict(tree, norm: Optional[NormalizationTransform] = None):
    doc = {
        "format_version": FORMAT_VERSION,
        "model_kind": "oblique_tree",
        "depth": tree.depth,
        "p": tree.p,
        "leaf_mode": tree.leaf_mode,
        "splits": [{"a": a.tolist(), "b": float(b)} for a, b in zip(tree.A, tree.b)],
        "leaves": [{"k": k.tolist(), "h": float(h)} for k, h in zip(tree.K, tree.h)],
    }
    if norm is not None:
        doc["norm"] = norm.to_dict()
    return doc


def from_dict(doc):
    """Rebuild a tree from :func:`to_dict` output. Returns ``(tree, norm_or_None)``."""
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    for key in ("format_version", "depth", "p", "leaf_mode", "splits", "leaves"):
        if key not in doc:
            raise ModelError(f"model document missing {key!r}")
    if doc["format_version"] != FORMAT_VERSION:
        raise ModelError(f"unsupported format_version {doc['format_version']!r}")
    if doc.get("model_kind", "oblique_tree") != "oblique_tree":
        raise ModelError(f"not an oblique tree document: model_kind={doc['model_kind']!r}")
    try:
        A = np.array([s["a"] for s in doc["splits"]], dtype=float)
        b = np.array([s["b"] for s in doc["splits"]], dtype=float)
        K = np.array([lf["k"] for lf in doc["leaves"]], dtype=float)
        h = np.array([lf["h"] for lf in doc["leaves"]], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed splits/leaves: {exc}") from None
    p = int(doc["p"])
    tree = ObliqueTree(int(doc["depth"]), A.reshape(-1, p), b, K.reshape(-1, p), h,
                       doc["leaf_mode"])
    norm = NormalizationTransform.from_dict(doc["norm"]) if doc.get("norm") else None
    return tree, norm


def serialize(tree, norm=None):
    return json.dumps(to_dict(tree, norm), indent=1)


def deserialize(text):
    return from_dict(json.loads(text))
