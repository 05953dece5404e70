"""Multi-start gradient training of a complete oblique tree.

Each start initializes a tree, draws an ascending list of sigmoid scale
factors and, for each scale factor in turn, runs full-batch gradient
descent on the relaxed loss, warm-started from the previous candidate.
After every descent phase the leaves are refit in closed form on the hard
routing and the candidate is scored by its hard loss; the best candidate
over all starts is returned.

Descent steps use the relaxed loss divided by ``n`` so one learning rate
works across dataset sizes; losses in reports are un-normalized sums.
"""

from __future__ import annotations

import hashlib
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .leaf_fit import fit_leaf_params
from .softgrad import evaluate
from .tree import ObliqueTree, count_parameters, leaf_index

log = logging.getLogger(__name__)


class TrainError(RuntimeError):
    """Every start failed."""


@dataclass
class TrainConfig:
    depth: int = 2
    leaf_mode: str = "constant"
    n_start: int = 10
    n_epoch: int = 3000
    alpha_small: tuple = (5.0, 25.0)
    alpha_large: tuple = (50.0, 150.0)
    # when set, [alpha_min, alpha_max] is cut into this many equal sub-ranges
    alpha_count: Optional[int] = None
    alpha_range: tuple = (5.0, 150.0)
    # fixed schedule, bypasses sampling (e.g. [1.0] for a plain sigmoid)
    alphas: Optional[tuple] = None
    lr: float = 0.01
    lr_min: float = 1e-4
    lr_period: int = 100
    lr_mult: int = 2
    optimizer: str = "adam"
    lam: float = 0.0
    seed: int = 0
    threads: int = 1
    polish: Optional[bool] = None
    polish_budget: float = 0.5

    def __post_init__(self):
        self.alpha_small = tuple(float(a) for a in self.alpha_small)
        self.alpha_large = tuple(float(a) for a in self.alpha_large)
        self.alpha_range = tuple(float(a) for a in self.alpha_range)
        if self.alphas is not None:
            self.alphas = tuple(float(a) for a in self.alphas)
        self.validate()

    def validate(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.leaf_mode not in ("constant", "linear"):
            raise ValueError("leaf_mode must be 'constant' or 'linear'")
        if self.n_start < 1 or self.n_epoch < 1:
            raise ValueError("n_start and n_epoch must be >= 1")
        for lo, hi in (self.alpha_small, self.alpha_large, self.alpha_range):
            if not 0 < lo <= hi:
                raise ValueError(f"invalid scale-factor range [{lo}, {hi}]")
        if self.alpha_count is not None and self.alpha_count < 1:
            raise ValueError("alpha_count must be >= 1")
        if self.alphas is not None and (not self.alphas or min(self.alphas) <= 0):
            raise ValueError("fixed scale factors must be positive")
        if self.lr < 0 or self.lr_min < 0 or self.lr_period < 1 or self.lr_mult < 1:
            raise ValueError("invalid learning-rate schedule")
        if self.optimizer not in ("gd", "adam"):
            raise ValueError("optimizer must be 'gd' or 'adam'")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def use_polish(self):
        return self.leaf_mode == "constant" if self.polish is None else bool(self.polish)

    def to_dict(self):
        return asdict(self)


def cosine_warm_restarts(epoch, lr, lr_min, period, mult):
    """Learning rate at ``epoch`` for cosine annealing with warm restarts."""
    t_i, t_cur = period, epoch
    while t_cur >= t_i:
        t_cur -= t_i
        t_i *= mult
    return lr_min + 0.5 * (lr - lr_min) * (1.0 + math.cos(math.pi * t_cur / t_i))


def start_rng(seed, start):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(start)]))


def init_tree(depth, p, ds, seed, leaf_mode="constant"):
    """Random unit-norm hyperplanes through randomly chosen training samples.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    nb = 2 ** depth - 1
    A = rng.standard_normal((nb, p))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    anchors = ds.X[rng.integers(0, ds.n, size=nb)]
    b = np.einsum("ij,ij->i", A, anchors)
    h = ds.y.mean() + rng.uniform(-0.01, 0.01, size=2 ** depth)
    return ObliqueTree(depth, A, b, np.zeros((2 ** depth, p)), h, leaf_mode)


def sample_alpha_schedule(config, rng):
    """Ascending scale factors for one start."""
    if config.alphas is not None:
        return sorted(config.alphas)
    if config.alpha_count is None:
        draws = [rng.uniform(*config.alpha_small), rng.uniform(*config.alpha_large)]
    else:
        edges = np.linspace(*config.alpha_range, config.alpha_count + 1)
        draws = [rng.uniform(lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
    return sorted(float(a) for a in draws)


def params_digest(*arrays):
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=float).tobytes())
    return h.hexdigest()


@dataclass
class PhaseResult:
    A: np.ndarray
    b: np.ndarray
    K: np.ndarray
    h: np.ndarray
    best_loss: float
    first_loss: float
    last_loss: float
    epochs: int
    aborted: bool = False


def gradient_descent_phase(tree, ds, alpha, config) -> PhaseResult:
    """Run ``config.n_epoch`` full-batch updates at scale factor ``alpha``.

    Returns the parameters with the lowest relaxed loss seen (the starting
    point included). A non-finite loss stops the phase early.
    """
    if not alpha > 0:
        raise ValueError("scale factor must be positive")
    X, y = ds.X, ds.y
    n = X.shape[0]
    linear = tree.leaf_mode == "linear"
    A, b, K, h = (np.array(v, dtype=float) for v in (tree.A, tree.b, tree.K, tree.h))
    params = [A, b, K, h] if linear else [A, b, h]
    with np.errstate(over="ignore", invalid="ignore"):
        return _descend(A, b, K, h, params, X, y, n, alpha, config, linear)


def _descend(A, b, K, h, params, X, y, n, alpha, config, linear):
    adam = config.optimizer == "adam"
    if adam:
        m1 = [np.zeros_like(v) for v in params]
        m2 = [np.zeros_like(v) for v in params]
        beta1, beta2, eps = 0.9, 0.999, 1e-8
    best = None
    best_loss = math.inf
    first_loss = last_loss = math.nan
    aborted = False
    epoch = 0
    for epoch in range(config.n_epoch + 1):
        loss, gA, gb, gK, gh, _ = evaluate(A, b, K, h, X, y, alpha, config.lam, linear)
        if not np.isfinite(loss):
            aborted = True
            break
        if epoch == 0:
            first_loss = loss
        last_loss = loss
        if loss < best_loss:
            best_loss = loss
            best = (A.copy(), b.copy(), K.copy(), h.copy())
        if epoch == config.n_epoch:
            break
        grads = [gA, gb, gK, gh] if linear else [gA, gb, gh]
        if not all(np.all(np.isfinite(g)) for g in grads):
            aborted = True
            break
        lr = cosine_warm_restarts(epoch, config.lr, config.lr_min, config.lr_period, config.lr_mult)
        if adam:
            for i, (v, g) in enumerate(zip(params, grads)):
                g = g / n
                m1[i] = beta1 * m1[i] + (1 - beta1) * g
                m2[i] = beta2 * m2[i] + (1 - beta2) * g * g
                mhat = m1[i] / (1 - beta1 ** (epoch + 1))
                vhat = m2[i] / (1 - beta2 ** (epoch + 1))
                v -= lr * mhat / (np.sqrt(vhat) + eps)
        else:
            step = lr / n
            for v, g in zip(params, grads):
                v -= step * g
    if best is None:
        best = (A, b, K, h)
    return PhaseResult(*best, best_loss=best_loss, first_loss=first_loss, last_loss=last_loss,
                       epochs=epoch, aborted=aborted)


def _run_start(ds, config, start, warm: Optional[ObliqueTree] = None):
    """One start of the multi-start loop; returns a plain dict record."""
    rng = start_rng(config.seed, start)
    linear = config.leaf_mode == "linear"
    tree = warm if warm is not None else init_tree(config.depth, ds.p, ds, rng, config.leaf_mode)
    if warm is not None:
        # consume the same draws a random init would, keeping alpha draws aligned
        init_tree(config.depth, ds.p, ds, rng, config.leaf_mode)
    alphas = sample_alpha_schedule(config, rng)
    rec = {"start": start, "alphas": alphas, "soft_losses": [], "hard_losses": [],
           "entry_digests": [], "exit_digests": [], "epochs": 0, "aborted": [],
           "candidates": [], "status": "ok", "error": None}
    try:
        for alpha in alphas:
            rec["entry_digests"].append(params_digest(tree.A, tree.b, tree.K, tree.h))
            res = gradient_descent_phase(tree, ds, alpha, config)
            trained = tree.replace(A=res.A, b=res.b, K=res.K if linear else tree.K, h=res.h)
            K, h, _, _ = fit_leaf_params(leaf_index(trained, ds.X), ds.X, ds.y, config.depth, linear)
            tree = trained.replace(K=K, h=h)
            r = ds.y - _predict_fast(tree, ds.X)
            hl = float(r @ r)
            rec["soft_losses"].append(res.best_loss)
            rec["hard_losses"].append(hl)
            rec["aborted"].append(res.aborted)
            rec["epochs"] += res.epochs
            rec["exit_digests"].append(params_digest(tree.A, tree.b, tree.K, tree.h))
            rec["candidates"].append(tree)
    except (FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
        rec["status"] = "failed"
        rec["error"] = f"{type(exc).__name__}: {exc}"
    return rec


def _predict_fast(tree, X):
    leaf = leaf_index(tree, X)
    out = tree.h[leaf]
    if tree.leaf_mode == "linear":
        out = out + np.einsum("ij,ij->i", X, tree.K[leaf])
    return out


def _run_start_limited(args):
    with threadpool_limits(1):
        return _run_start(*args)


@dataclass
class TrainReport:
    config: dict
    starts: list = field(default_factory=list)
    best_history: list = field(default_factory=list)
    best_hard_loss: float = math.inf
    best_start: int = -1
    wall_time: float = 0.0
    epochs: int = 0
    parameters: dict = field(default_factory=dict)
    polish: Optional[dict] = None

    def to_dict(self):
        d = asdict(self)
        for s in d["starts"]:
            s.pop("candidates", None)
        return d


def fit(ds, config: TrainConfig, warm_start: Optional[ObliqueTree] = None):
    """Train a tree; returns ``(best_tree, TrainReport)``.

    ``warm_start`` replaces the random initialization of start 0.
    """
    config.validate()
    if not (np.all(np.isfinite(ds.X)) and np.all(np.isfinite(ds.y))):
        raise ValueError("training data contains non-finite values")
    if warm_start is not None and (warm_start.depth != config.depth or warm_start.p != ds.p):
        raise ValueError("warm start tree does not match depth/feature count")
    t0 = time.perf_counter()
    jobs = [(ds, config, s, warm_start if s == 0 else None) for s in range(config.n_start)]
    if config.threads > 1 and config.n_start > 1:
        with ProcessPoolExecutor(max_workers=min(config.threads, config.n_start)) as pool:
            records = list(pool.map(_run_start_limited, jobs))
    else:
        records = [_run_start_limited(j) for j in jobs]

    report = TrainReport(config=config.to_dict())
    best_tree = None
    for rec in records:
        # strict '<' keeps the earlier start on ties
        for it, (tree, hl) in enumerate(zip(rec["candidates"], rec["hard_losses"])):
            if hl < report.best_hard_loss:
                report.best_hard_loss = hl
                report.best_start = rec["start"]
                best_tree = tree
                report.best_history.append({"start": rec["start"], "iteration": it, "loss": hl})
        report.epochs += rec["epochs"]
        if rec["status"] != "ok":
            log.warning("start %d failed: %s", rec["start"], rec["error"])
        report.starts.append(rec)
    report.wall_time = time.perf_counter() - t0
    if best_tree is None:
        errors = "; ".join(str(r["error"]) for r in records)
        raise TrainError(f"all {config.n_start} starts failed: {errors}")
    report.parameters = count_parameters(best_tree)
    return best_tree, report
