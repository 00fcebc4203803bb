"""Learner specifications, datasets and the train entry points."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .ensemble import (
    BoostingRegressor, DecisionTree, ForestRegressor, GradientBoosting, RandomForest, TreeRegressor,
)
from .linear import (
    OLS, Lasso, LogisticRegression, PcaOLS, Ridge, SGDClassifier, SGDRegressor,
)
from .neighbors import GaussianNB, KNNClassifier, KNNRegressor


class LearnerError(ValueError):
    pass


CLASSIFIER_DEFAULTS: dict[str, dict] = {
    "random_forest": {"n_trees": 100, "max_depth": 12, "max_features": "sqrt"},
    "gradient_boosting": {"n_rounds": 100, "max_depth": 3, "learning_rate": 0.1},
    "knn": {"k": 5},
    "decision_tree": {"max_depth": 12},
    "gaussian_nb": {},
    "logistic_regression": {"lr": 0.1, "iterations": 500},
    "sgd_linear": {"epochs": 5, "lr": 1e-3, "l2": 1e-4},
}
REGRESSOR_DEFAULTS: dict[str, dict] = {
    "ols": {},
    "ridge": {"lam": 1.0},
    "lasso": {"lam": 0.1},
    "knn_reg": {"k": 5},
    "tree_reg": {"max_depth": 12},
    "forest_reg": {"n_trees": 100, "max_depth": 12, "max_features": "sqrt"},
    "boosting_reg": {"n_rounds": 100, "max_depth": 3, "learning_rate": 0.1},
    "sgd_reg": {"epochs": 5, "lr": 1e-3, "l2": 1e-4},
    "pca_ols": {"variance": 0.95},
}
CLASSIFIERS = tuple(CLASSIFIER_DEFAULTS)
REGRESSORS = tuple(REGRESSOR_DEFAULTS)

_BUILD = {
    "random_forest": RandomForest, "gradient_boosting": GradientBoosting, "knn": KNNClassifier,
    "decision_tree": DecisionTree, "gaussian_nb": GaussianNB,
    "logistic_regression": LogisticRegression, "sgd_linear": SGDClassifier,
    "ols": OLS, "ridge": Ridge, "lasso": Lasso, "knn_reg": KNNRegressor, "tree_reg": TreeRegressor,
    "forest_reg": ForestRegressor, "boosting_reg": BoostingRegressor, "sgd_reg": SGDRegressor,
    "pca_ols": PcaOLS,
}
_SEEDED = {"random_forest", "gradient_boosting", "decision_tree", "sgd_linear", "tree_reg",
           "forest_reg", "boosting_reg", "sgd_reg"}

# (low, high, integer?) for every tunable; bounds are inclusive
_RANGES = {
    "n_trees": (1, 10_000, True), "n_rounds": (1, 10_000, True), "max_depth": (1, 64, True),
    "k": (1, 10_000, True), "iterations": (1, 1_000_000, True), "epochs": (1, 10_000, True),
    "min_samples_leaf": (1, 1_000_000, True), "max_bins": (2, 65_536, True),
    "learning_rate": (1e-6, 1.0, False), "lr": (1e-9, 10.0, False), "l2": (0.0, 10.0, False),
    "lam": (0.0, 1e9, False), "variance": (1e-6, 1.0, False), "smoothing": (0.0, 1.0, False),
    "tol": (0.0, 1.0, False), "max_sweeps": (1, 10_000_000, True),
}


@dataclass
class LearnerSpec:
    name: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.name not in _BUILD:
            raise LearnerError(f"unknown learner {self.name!r}; choose from {sorted(_BUILD)}")
        defaults = {**CLASSIFIER_DEFAULTS, **REGRESSOR_DEFAULTS}[self.name]
        self.params = {**defaults, **dict(self.params)}
        for key, value in self.params.items():
            if key == "max_features":
                if value not in ("sqrt", "all", None) and not (isinstance(value, int) and value >= 1):
                    raise LearnerError(f"{self.name}: max_features must be 'sqrt', 'all' or a positive int")
                continue
            if key == "bootstrap":
                continue
            if key not in _RANGES:
                raise LearnerError(f"{self.name}: unknown hyperparameter {key!r}")
            lo, hi, integral = _RANGES[key]
            if integral and (not isinstance(value, (int, np.integer)) or isinstance(value, bool)):
                raise LearnerError(f"{self.name}: {key} must be an integer")
            if not lo <= value <= hi:
                raise LearnerError(f"{self.name}: {key}={value} outside [{lo}, {hi}]")

    @property
    def is_classifier(self) -> bool:
        return self.name in CLASSIFIER_DEFAULTS

    def build(self):
        kwargs = dict(self.params)
        if self.name in _SEEDED:
            kwargs["seed"] = self.seed
        return _BUILD[self.name](**kwargs)

    def to_json(self) -> dict:
        return {"name": self.name, "params": self.params, "seed": self.seed}

    @classmethod
    def from_json(cls, obj) -> "LearnerSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(obj["name"], obj.get("params", {}), int(obj.get("seed", 0)))


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.x.ndim != 2:
            raise LearnerError("feature matrix must be two-dimensional")
        if len(self.x) != len(self.y):
            raise LearnerError(f"{len(self.x)} feature rows but {len(self.y)} targets")
        if not np.isfinite(self.x).all():
            raise LearnerError("feature matrix holds NaN or Inf")
        if self.y.dtype != object and not np.isfinite(np.asarray(self.y, dtype=np.float64)).all():
            raise LearnerError("target holds NaN or Inf")
        if self.feature_names and len(self.feature_names) != self.x.shape[1]:
            raise LearnerError("feature name count differs from column count")

    def take(self, rows) -> "Dataset":
        return Dataset(self.x[rows], self.y[rows], self.feature_names)


def train_classifier(spec: LearnerSpec, data: Dataset):
    if not spec.is_classifier:
        raise LearnerError(f"{spec.name} is a regressor")
    if len(set(np.asarray(data.y, dtype=object).tolist())) < 2:
        raise LearnerError("classification data holds a single class")
    return spec.build().fit(data.x, np.asarray(data.y, dtype=object))


def train_regressor(spec: LearnerSpec, data: Dataset):
    if spec.is_classifier:
        raise LearnerError(f"{spec.name} is a classifier")
    return spec.build().fit(data.x, np.asarray(data.y, dtype=np.float64))
