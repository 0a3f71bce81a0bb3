"""Attribution methods and their aggregation."""

from .aggregate import (aggregate_cluster, aggregate_global, n_windows, rank_agreement,
                        window_average, window_means)
from .gradients import grad_cam, grad_cam_map, gradient_shap
from .sets import ExplanationSet, explain_network, explain_trees, tree_gain_set
from .shapley import (Attribution, brute_force_shapley, ensemble_conditional_shapley,
                      shapley_from_value_function)
from .treeshap import treeshap

__all__ = [
    "Attribution", "ExplanationSet", "aggregate_cluster", "aggregate_global",
    "brute_force_shapley", "ensemble_conditional_shapley", "explain_network", "explain_trees",
    "grad_cam", "grad_cam_map", "gradient_shap", "n_windows", "rank_agreement",
    "shapley_from_value_function", "tree_gain_set", "treeshap", "window_average",
    "window_means",
]
