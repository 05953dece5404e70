"""One pass of subtree re-optimization over every branch node.

For each branch node in breadth-first order, the subtree rooted there is
retrained on the samples that reach it, warm-started from the current
tree, and spliced back in only if the full-tree hard loss strictly drops.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from .leaf_fit import refit_leaves
from .train import TrainError, fit
from .tree import ObliqueTree, hard_loss, leaf_index, node_depth

log = logging.getLogger(__name__)

IMPROVE_TOL = 1e-12


@dataclass
class PolishReport:
    initial_loss: float
    final_loss: float = float("nan")
    steps: list = field(default_factory=list)

    @property
    def n_accepted(self):
        return sum(s["accepted"] for s in self.steps)

    def to_dict(self):
        return {"initial_loss": self.initial_loss, "final_loss": self.final_loss,
                "n_accepted": self.n_accepted, "steps": self.steps}


def node_subset(tree, ds, t):
    """Indices of samples whose hard route passes through branch node ``t``."""
    if not 1 <= t <= tree.n_branch:
        raise ValueError(f"node {t} is not a branch node of a depth-{tree.depth} tree")
    leaf_nodes = leaf_index(tree, ds.X) + tree.n_leaves
    return np.flatnonzero(leaf_nodes >> (tree.depth - node_depth(t)) == t)


def subtree_nodes(t, depth, sub_depth):
    """Branch-node and leaf-node indices of the depth-``sub_depth`` subtree at ``t``."""
    branches = [t * 2 ** l + i for l in range(sub_depth) for i in range(2 ** l)]
    leaves = [t * 2 ** sub_depth + i for i in range(2 ** sub_depth)]
    return np.array(branches), np.array(leaves)


def extract_subtree(tree, t):
    sub_depth = tree.depth - node_depth(t)
    br, lv = subtree_nodes(t, tree.depth, sub_depth)
    lv0 = lv - tree.n_leaves
    return ObliqueTree(sub_depth, tree.A[br - 1], tree.b[br - 1], tree.K[lv0], tree.h[lv0],
                       tree.leaf_mode)


def splice_subtree(tree, t, sub):
    br, lv = subtree_nodes(t, tree.depth, sub.depth)
    A, b, K, h = (np.array(v) for v in (tree.A, tree.b, tree.K, tree.h))
    A[br - 1], b[br - 1] = sub.A, sub.b
    K[lv - tree.n_leaves], h[lv - tree.n_leaves] = sub.K, sub.h
    return tree.replace(A=A, b=b, K=K, h=h)


def subtree_config(config, t, sub_depth):
    scale = config.polish_budget
    seed = int(np.random.SeedSequence([int(config.seed), 7919, int(t)]).generate_state(1)[0])
    return dataclasses.replace(
        config,
        depth=sub_depth,
        n_start=max(1, int(round(config.n_start * scale))),
        n_epoch=max(1, int(round(config.n_epoch * scale))),
        seed=seed,
    )


def polish(tree, ds, config):
    """Polish ``tree`` on ``ds``. Returns ``(tree, PolishReport)``."""
    current = tree
    cur_loss = hard_loss(current, ds)
    report = PolishReport(initial_loss=cur_loss)
    for t in range(1, tree.n_branch + 1):
        idx = node_subset(current, ds, t)
        step = {"node": t, "subset_size": int(len(idx)), "skipped": False, "reason": None,
                "pre_loss": cur_loss, "post_loss": cur_loss, "accepted": False}
        report.steps.append(step)
        if len(idx) <= 1 or np.unique(ds.y[idx]).size <= 1:
            step["skipped"] = True
            step["reason"] = "too few samples" if len(idx) <= 1 else "constant targets"
            continue
        sub_ds = ds.subset(idx)
        sub_depth = tree.depth - node_depth(t)
        try:
            sub, _ = fit(sub_ds, subtree_config(config, t, sub_depth),
                         warm_start=extract_subtree(current, t))
        except TrainError as exc:
            step["skipped"] = True
            step["reason"] = f"subtree optimization failed: {exc}"
            continue
        candidate = splice_subtree(current, t, sub)
        new_loss = hard_loss(candidate, ds)
        step["post_loss"] = new_loss
        if new_loss < cur_loss - IMPROVE_TOL:
            current, cur_loss = candidate, new_loss
            step["accepted"] = True
        log.debug("polish node %d: %s (%.6g)", t, "accepted" if step["accepted"] else "rejected",
                  new_loss)
    refit, _ = refit_leaves(current, ds)
    # refit minimizes each leaf's SSE; guard against float noise increasing the loss
    if hard_loss(refit, ds) <= cur_loss:
        current = refit
    report.final_loss = hard_loss(current, ds)
    return current, report
