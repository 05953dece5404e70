"""
Linear models in the leaves
===========================

With ``leaf_mode="linear"`` every leaf predicts ``k . x + h``. After
training, leaves are refit by least squares on the samples they receive.
"""

from gettree import TrainConfig, fit, predict, r2
from gettree.synthetic import make_oblique_data

ds, _ = make_oblique_data(n=1000, p=3, depth=2, noise=0.02, seed=4, leaf_mode="linear")

for mode in ("constant", "linear"):
    cfg = TrainConfig(depth=2, leaf_mode=mode, n_start=2, n_epoch=400, seed=0, threads=1)
    tree, report = fit(ds, cfg)
    print(f"{mode:8s} leaves: training R^2 {r2(ds.y, predict(tree, ds.X)).r2:.4f}, "
          f"{report.parameters['total']} parameters")

# a small L1 penalty on hyperplane weights nudges them toward sparsity
cfg = TrainConfig(depth=2, leaf_mode="linear", n_start=2, n_epoch=400, seed=0, lam=1e-3,
                  threads=1)
tree, _ = fit(ds, cfg)
print("with lambda=1e-3, smallest |a| per split:", abs(tree.A).min(axis=1).round(4))
