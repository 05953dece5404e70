"""
Fitting an oblique regression tree
==================================

Data drawn from a random depth-2 oblique tree is easy for a tree whose
splits are hyperplanes and hard for one limited to axis-aligned splits.
"""

import numpy as np

from gettree import TrainConfig, fit, fit_cart, polish, predict, r2
from gettree.synthetic import make_oblique_data

ds, truth = make_oblique_data(n=2000, p=5, depth=2, noise=0.02, seed=0)

# a short run: 2 random starts, 500 epochs per scale-factor phase
config = TrainConfig(depth=2, n_start=2, n_epoch=500, seed=0, threads=1)
tree, report = fit(ds, config)
print("best start:", report.best_start, " hard loss:", round(report.best_hard_loss, 4))

# one pass of subtree re-optimization; never makes the training loss worse
tree, polish_report = polish(tree, ds, config)
print("polish accepted", polish_report.n_accepted, "of", len(polish_report.steps), "nodes")

cart = fit_cart(ds, max_depth=2)
print("oblique tree training R^2: %.4f" % r2(ds.y, predict(tree, ds.X)).r2)
print("depth-2 CART training R^2: %.4f" % r2(ds.y, cart.predict(ds.X)).r2)

# hyperplanes are only defined up to scale; compare directions
cos = np.abs(np.sum(tree.A * truth.A, axis=1)) / (
    np.linalg.norm(tree.A, axis=1) * np.linalg.norm(truth.A, axis=1))
print("|cosine| between learned and true root hyperplane: %.3f" % cos[0])
