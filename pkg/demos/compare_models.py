"""
Comparing against CART and a random forest
==========================================

Each dataset is split 50/25/25. Depth (and tree count for the forest) is
chosen on the validation part, the winner is retrained on train plus
validation and scored on the test part.
"""

import json

from gettree import TrainConfig
from gettree.dataset import RawData
from gettree.evaluation import format_table, run_benchmark
from gettree.synthetic import make_oblique_data

datasets = {}
for seed in range(3):
    ds, _ = make_oblique_data(n=600, p=4, depth=3, noise=0.05, seed=seed)
    datasets[f"synthetic-{seed}"] = RawData(ds.X, ds.y, None)

report = run_benchmark(datasets, models=("get", "cart", "rf"), depth_grid=[2, 3, 4],
                       config=TrainConfig(n_start=1, n_epoch=300, threads=1),
                       rf_trees=(50, 100), rf_depths=[None, 6], timing_reps=5)
print(format_table(report))
print()
print("paired t-tests on test R^2:")
print(json.dumps(report["aggregate"]["ttests"], indent=1))
