"""Synthetic regression data drawn from a random oblique tree."""

from __future__ import annotations

import numpy as np

from .dataset import Dataset
from .tree import ObliqueTree, leaf_index


def random_oblique_tree(depth, p, rng, leaf_mode="constant"):
    """Unit-norm hyperplanes through points near the cube centre; leaf values spread over [0, 1]."""
    nb, nl = 2 ** depth - 1, 2 ** depth
    A = rng.standard_normal((nb, p))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    anchors = rng.uniform(0.3, 0.7, size=(nb, p))
    b = np.einsum("ij,ij->i", A, anchors)
    # a shuffled even grid keeps neighbouring leaves distinguishable
    h = rng.permutation(np.linspace(0.0, 1.0, nl))
    K = rng.uniform(-0.5, 0.5, size=(nl, p)) if leaf_mode == "linear" else np.zeros((nl, p))
    return ObliqueTree(depth, A, b, K, h, leaf_mode)


def path_margin(tree, X):
    """Smallest ``|b_j - a_j . x|`` over the branch nodes on each sample's path."""
    node = np.ones(X.shape[0], dtype=np.int64)
    margin = np.full(X.shape[0], np.inf)
    for _ in range(tree.depth):
        j = node - 1
        z = tree.b[j] - np.einsum("ij,ij->i", X, tree.A[j])
        margin = np.minimum(margin, np.abs(z))
        node = 2 * node + (z <= 0)
    return margin


def make_oblique_data(n=2000, p=5, depth=2, noise=0.02, margin=0.0, seed=0,
                      leaf_mode="constant"):
    """Uniform features with targets from a random oblique tree plus Gaussian noise.

    Samples closer than ``margin`` to a hyperplane on their path are redrawn.
    Returns ``(Dataset, generating_tree)``; the dataset is not renormalized.
    """
    rng = np.random.default_rng(seed)
    tree = random_oblique_tree(depth, p, rng, leaf_mode)
    X = np.empty((0, p))
    while len(X) < n:
        cand = rng.uniform(0.0, 1.0, size=(2 * n, p))
        if margin > 0:
            cand = cand[path_margin(tree, cand) >= margin]
        X = np.vstack([X, cand])
    X = X[:n]
    leaf = leaf_index(tree, X)
    y = tree.h[leaf] + np.einsum("ij,ij->i", X, tree.K[leaf]) + noise * rng.standard_normal(n)
    return Dataset(X, y), tree
