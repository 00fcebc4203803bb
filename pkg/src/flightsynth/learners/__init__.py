"""Supervised learners, fold plans and metrics built on numpy."""
from .folds import FoldError, FoldPlan, kfold, stratified_kfold
from .linear import SingularError
from .metrics import MetricError, classification_metrics, mae, r2, regression_metrics, rmse
from .roster import (
    CLASSIFIER_DEFAULTS, CLASSIFIERS, REGRESSOR_DEFAULTS, REGRESSORS, Dataset, LearnerError,
    LearnerSpec, train_classifier, train_regressor,
)

__all__ = [
    "CLASSIFIERS", "CLASSIFIER_DEFAULTS", "REGRESSORS", "REGRESSOR_DEFAULTS", "Dataset", "FoldError",
    "FoldPlan", "LearnerError", "LearnerSpec", "MetricError", "SingularError", "classification_metrics",
    "kfold", "mae", "r2", "regression_metrics", "rmse", "stratified_kfold", "train_classifier", "train_regressor",
]
