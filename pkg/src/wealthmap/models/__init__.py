from .cv import FAMILIES, TREE_FAMILIES, CvReport, ModelSpec, fit_model, fold_assignment, k_fold_cv, r_squared
from .ensemble import (ForestParams, GbdtParams, TreeEnsemble, fit_gbdt, fit_random_forest)
from .linear import LinearModel, fit_linear_family, lasso_kill_threshold
from .selection import draw_params, random_search, recursive_feature_elimination
from .serialize import load_model, save_model
from .tree import RegressionTree, TreeParams, fit_regression_tree

__all__ = [
    "FAMILIES", "TREE_FAMILIES", "CvReport", "ModelSpec", "fit_model", "fold_assignment", "k_fold_cv",
    "r_squared", "ForestParams", "GbdtParams", "TreeEnsemble", "fit_gbdt", "fit_random_forest",
    "LinearModel", "fit_linear_family", "lasso_kill_threshold", "draw_params", "random_search",
    "recursive_feature_elimination", "load_model", "save_model", "RegressionTree", "TreeParams",
    "fit_regression_tree",
]
