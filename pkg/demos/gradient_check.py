"""
Checking the relaxed-loss gradient
==================================

The training loss replaces each hard branch test with a scaled sigmoid.
Its analytic gradient is compared here against central differences.
"""

import numpy as np

from gettree import Dataset, ObliqueTree, soft_loss_and_grad
from gettree.softgrad import evaluate

rng = np.random.default_rng(1)
depth, p, n = 3, 4, 40
# small weights keep the sigmoids away from saturation at every alpha
tree = ObliqueTree(depth, 0.05 * rng.normal(size=(7, p)), 0.05 * rng.normal(size=7),
                   rng.normal(size=(8, p)), rng.random(8), leaf_mode="linear")
X, y = rng.random((n, p)), rng.random(n)

for alpha in (1.0, 10.0, 50.0):
    ev = soft_loss_and_grad(tree, Dataset(X, y), alpha)

    # perturb one split offset and one leaf slope
    def loss(b=tree.b, K=tree.K):
        return evaluate(tree.A, b, K, tree.h, X, y, alpha, linear=True)[0]

    eps = 1e-6
    e = np.zeros(7)
    e[2] = eps
    fd_b = (loss(b=tree.b + e) - loss(b=tree.b - e)) / (2 * eps)
    E = np.zeros((8, p))
    E[5, 1] = eps
    fd_k = (loss(K=tree.K + E) - loss(K=tree.K - E)) / (2 * eps)
    print(f"alpha={alpha:5.1f}  d/db_3: {ev.grad_b[2]: .8f} vs {fd_b: .8f}   "
          f"d/dk_13,2: {ev.grad_K[5, 1]: .8f} vs {fd_k: .8f}")

# rows of the soft routing matrix are distributions over leaves
print("routing row sums:", np.round(ev.soft_routing.sum(axis=1)[:5], 15))
