"""Binary classifiers with calibrated probability outputs."""

from .gbt import GbtModel, Tree, TreeNode, predict_proba_gbt, train_gbt
from .persist import load_model, save_model
from .standardize import Standardizer
from .svm import (
    KERNEL_LINEAR,
    KERNEL_RBF,
    ProbabilityPair,
    SvmModel,
    dual_objective,
    fit_platt,
    predict_proba_svm,
    probability_pair,
    train_svm,
)

__all__ = [
    "GbtModel",
    "KERNEL_LINEAR",
    "KERNEL_RBF",
    "ProbabilityPair",
    "Standardizer",
    "SvmModel",
    "Tree",
    "TreeNode",
    "dual_objective",
    "fit_platt",
    "load_model",
    "predict_proba_gbt",
    "predict_proba_svm",
    "probability_pair",
    "save_model",
    "train_gbt",
    "train_svm",
]
