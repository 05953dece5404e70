"""Scaled-sigmoid relaxation of the tree loss and its analytic gradient.

The soft routing weight of a leaf is the product of relaxed branch tests
along its path. Both the forward pass (path products, top-down) and the
backward pass (residual mass of each subtree, bottom-up) run one tree
level at a time, so the derivative with respect to a branch test never
divides by a possibly saturated sigmoid value.

Reductions are plain numpy sums in fixed array order, so results are
deterministic for a fixed BLAS thread count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

# |alpha * z| beyond this already gives exactly 0.0 / 1.0 in float64
_CLAMP = 745.0


def scaled_sigmoid(z, alpha):
    """``1 / (1 + exp(-alpha * z))`` without overflow."""
    if not alpha > 0:
        raise ValueError("scale factor must be positive")
    with np.errstate(over="ignore"):
        az = alpha * np.asarray(z, dtype=float)
    return expit(np.clip(az, -_CLAMP, _CLAMP))


def scaled_sigmoid_grad(z, alpha):
    """Derivative ``alpha * S(z) * (1 - S(z))``; 1 - S is evaluated as S(-z)."""
    return alpha * scaled_sigmoid(z, alpha) * scaled_sigmoid(-np.asarray(z, dtype=float), alpha)


@dataclass
class SoftEvaluation:
    loss: float
    grad_A: np.ndarray
    grad_b: np.ndarray
    grad_K: Optional[np.ndarray]
    grad_h: np.ndarray
    soft_routing: np.ndarray


def _forward(A, b, X, alpha):
    """Relaxed tests and per-level path products.

    Returns ``(I, J, Q)`` where ``I = S(b - A x)``, ``J = S(-(b - A x)) = 1 - I``
    and ``Q[d]`` has shape (n, 2**d): the soft mass reaching each depth-d node.
    """
    Z = np.clip(alpha * (b[None, :] - X @ A.T), -_CLAMP, _CLAMP)
    I = expit(Z)
    J = expit(-Z)
    n = X.shape[0]
    depth = int(np.log2(A.shape[0] + 1))
    Q = [np.ones((n, 1))]
    for d in range(depth):
        lo, hi = 2 ** d - 1, 2 ** (d + 1) - 1
        q = Q[-1]
        Q.append(np.stack((q * I[:, lo:hi], q * J[:, lo:hi]), axis=2).reshape(n, -1))
    return I, J, Q


def soft_route(tree, X, alpha):
    """Soft routing matrix (n, 2**D); rows sum to one."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != tree.p:
        raise ValueError(f"dimension mismatch: tree expects {tree.p} features, got shape {X.shape}")
    return _forward(tree.A, tree.b, X, alpha)[2][-1]


def evaluate(A, b, K, h, X, y, alpha, lam=0.0, linear=False):
    """Soft loss and gradients on raw parameter arrays.

    Loss is ``sum_i sum_t P[i,t] (y_i - k_t.x_i - h_t)**2 + lam * sum |A|``.
    Returns ``(loss, gA, gb, gK_or_None, gh, P)``.
    """
    I, J, Q = _forward(A, b, X, alpha)
    P = Q[-1]
    pred = h[None, :] + (X @ K.T if linear else 0.0)
    R = y[:, None] - pred
    R2 = R * R
    loss = float(np.sum(P * R2))

    n = X.shape[0]
    depth = len(Q) - 1
    V = R2
    gI = np.empty_like(I)
    for d in range(depth - 1, -1, -1):
        lo, hi = 2 ** d - 1, 2 ** (d + 1) - 1
        pairs = V.reshape(n, -1, 2)
        VL, VR = pairs[..., 0], pairs[..., 1]
        gI[:, lo:hi] = Q[d] * (VL - VR)
        V = I[:, lo:hi] * VL + J[:, lo:hi] * VR
    gZ = gI * (alpha * I * J)
    gb = gZ.sum(axis=0)
    gA = -(gZ.T @ X)

    W = P * R
    gh = -2.0 * W.sum(axis=0)
    gK = -2.0 * (W.T @ X) if linear else None

    if lam:
        loss += lam * float(np.abs(A).sum())
        gA = gA + lam * np.sign(A)
    return loss, gA, gb, gK, gh, P


def _first_bad_node(tree, gA, gb, gK, gh):
    bad = ~np.isfinite(gb) | ~np.all(np.isfinite(gA), axis=1)
    if bad.any():
        return f"branch node {int(np.argmax(bad)) + 1}"
    badl = ~np.isfinite(gh)
    if gK is not None:
        badl |= ~np.all(np.isfinite(gK), axis=1)
    if badl.any():
        return f"leaf node {int(np.argmax(badl)) + tree.n_leaves}"
    return None


def soft_loss_and_grad(tree, ds, alpha, lam=0.0) -> SoftEvaluation:
    """Relaxed loss and exact gradients for every trainable parameter.

    ``ds`` is a :class:`~gettree.dataset.Dataset` (or anything with ``X``
    and ``y``). ``grad_K`` is ``None`` for constant-leaf trees. The L1
    subgradient at zero is zero.
    """
    if lam < 0:
        raise ValueError("regularization strength must be >= 0")
    X = np.asarray(ds.X, dtype=float)
    if X.shape[1] != tree.p:
        raise ValueError(f"dimension mismatch: tree expects {tree.p} features, got {X.shape[1]}")
    linear = tree.leaf_mode == "linear"
    loss, gA, gb, gK, gh, P = evaluate(tree.A, tree.b, tree.K, tree.h, X,
                                       np.asarray(ds.y, dtype=float), alpha, lam, linear)
    where = None if np.isfinite(loss) else "loss"
    where = where or _first_bad_node(tree, gA, gb, gK, gh)
    if where is not None:
        raise FloatingPointError(f"non-finite value in soft evaluation at {where}")
    return SoftEvaluation(loss, gA, gb, gK, gh, P)
