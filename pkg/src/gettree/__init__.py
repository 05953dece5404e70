"""Gradient-based entire-tree optimization for hard-split oblique regression trees."""

from .dataset import Dataset, NormalizationTransform, SplitSpec, load_csv, normalize, split
from .tree import ObliqueTree, ancestor_sets, count_parameters, hard_loss, hard_route, predict
from .softgrad import scaled_sigmoid, scaled_sigmoid_grad, soft_loss_and_grad, soft_route
from .leaf_fit import refit_constant, refit_linear, refit_leaves
from .train import TrainConfig, TrainReport, fit, init_tree, sample_alpha_schedule
from .polish import PolishReport, node_subset, polish
from .baselines import AxisTree, Forest, fit_cart, fit_forest, predict_baseline
from .evaluation import Score, TTestResult, friedman_rank, paired_ttest, r2

__version__ = "0.1.0"

__all__ = [
    "AxisTree",
    "Dataset",
    "Forest",
    "NormalizationTransform",
    "ObliqueTree",
    "PolishReport",
    "Score",
    "SplitSpec",
    "TTestResult",
    "TrainConfig",
    "TrainReport",
    "ancestor_sets",
    "count_parameters",
    "fit",
    "fit_cart",
    "fit_forest",
    "friedman_rank",
    "hard_loss",
    "hard_route",
    "init_tree",
    "load_csv",
    "node_subset",
    "normalize",
    "paired_ttest",
    "polish",
    "predict",
    "predict_baseline",
    "r2",
    "refit_constant",
    "refit_leaves",
    "refit_linear",
    "sample_alpha_schedule",
    "scaled_sigmoid",
    "scaled_sigmoid_grad",
    "soft_loss_and_grad",
    "soft_route",
    "split",
]
