"""Decision trees, random forests and gradient boosting."""
from __future__ import annotations

import math

import numpy as np

from ..numkit import rng_stream
from .tree import MAX_BINS, build_tree, fit_binning


class _Classifier:
    """Label bookkeeping shared by the classifiers: ``classes_`` holds the
    sorted distinct labels, models work on their indices."""

    def _encode_labels(self, y):
        y = np.asarray(y, dtype=object)
        self.classes_ = np.array(sorted(set(y.tolist())), dtype=object)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        lookup = {c: i for i, c in enumerate(self.classes_.tolist())}
        return np.array([lookup[v] for v in y.tolist()], dtype=np.int64)

    def predict(self, x):
        p = self.predict_proba(x)
        return self.classes_[np.argmax(p, axis=1)]


def _max_features(rule, d: int) -> int | None:
    if rule is None or rule == "all":
        return None
    if rule == "sqrt":
        return max(1, int(math.sqrt(d)))
    return int(rule)


class DecisionTree(_Classifier):
    def __init__(self, max_depth=12, min_samples_leaf=1, max_features=None, seed=0, max_bins=MAX_BINS):
        self.max_depth, self.min_samples_leaf = max_depth, min_samples_leaf
        self.max_features, self.seed, self.max_bins = max_features, seed, max_bins

    def fit(self, x, y):
        yi = self._encode_labels(y)
        binning = fit_binning(x, self.max_bins)
        self.tree_ = build_tree(binning.transform(x), binning, yi, "classification", len(self.classes_),
                                self.max_depth, self.min_samples_leaf,
                                _max_features(self.max_features, x.shape[1]), rng_stream(self.seed, 0))
        return self

    def predict_proba(self, x):
        return self.tree_.predict_value(x)


class TreeRegressor:
    def __init__(self, max_depth=12, min_samples_leaf=1, max_features=None, seed=0, max_bins=MAX_BINS):
        self.max_depth, self.min_samples_leaf = max_depth, min_samples_leaf
        self.max_features, self.seed, self.max_bins = max_features, seed, max_bins

    def fit(self, x, y):
        binning = fit_binning(x, self.max_bins)
        self.tree_ = build_tree(binning.transform(x), binning, np.asarray(y, dtype=np.float64),
                                "regression", 0, self.max_depth, self.min_samples_leaf,
                                _max_features(self.max_features, x.shape[1]), rng_stream(self.seed, 0))
        return self

    def predict(self, x):
        return self.tree_.predict_value(x)[:, 0]


def _grow_forest(x, y, task, n_classes, n_trees, max_depth, min_samples_leaf, max_features,
                 bootstrap, seed, max_bins):
    binning = fit_binning(x, max_bins)
    bins = binning.transform(x)
    mf = _max_features(max_features, x.shape[1])
    n = len(x)
    trees = []
    for t in range(n_trees):
        # tree t owns stream t: the first tree of a forest without bootstrap
        # matches a lone tree grown with the same seed
        rng = rng_stream(seed, t)
        if bootstrap:
            counts = np.bincount(rng_stream(seed, 100_000 + t).integers(0, n, n), minlength=n)
            rows = np.flatnonzero(counts)
            trees.append(build_tree(bins[rows], binning, y[rows], task, n_classes, max_depth,
                                    min_samples_leaf, mf, rng, counts[rows]))
        else:
            trees.append(build_tree(bins, binning, y, task, n_classes, max_depth,
                                    min_samples_leaf, mf, rng))
    return trees


class RandomForest(_Classifier):
    def __init__(self, n_trees=100, max_depth=12, min_samples_leaf=1, max_features="sqrt",
                 bootstrap=True, seed=0, max_bins=MAX_BINS):
        self.n_trees, self.max_depth, self.min_samples_leaf = n_trees, max_depth, min_samples_leaf
        self.max_features, self.bootstrap, self.seed, self.max_bins = max_features, bootstrap, seed, max_bins

    def fit(self, x, y):
        yi = self._encode_labels(y)
        self.trees_ = _grow_forest(x, yi, "classification", len(self.classes_), self.n_trees,
                                   self.max_depth, self.min_samples_leaf, self.max_features,
                                   self.bootstrap, self.seed, self.max_bins)
        return self

    def predict_proba(self, x):
        return sum(t.predict_value(x) for t in self.trees_) / len(self.trees_)


class ForestRegressor:
    def __init__(self, n_trees=100, max_depth=12, min_samples_leaf=1, max_features="sqrt",
                 bootstrap=True, seed=0, max_bins=MAX_BINS):
        self.n_trees, self.max_depth, self.min_samples_leaf = n_trees, max_depth, min_samples_leaf
        self.max_features, self.bootstrap, self.seed, self.max_bins = max_features, bootstrap, seed, max_bins

    def fit(self, x, y):
        self.trees_ = _grow_forest(x, np.asarray(y, dtype=np.float64), "regression", 0, self.n_trees,
                                   self.max_depth, self.min_samples_leaf, self.max_features,
                                   self.bootstrap, self.seed, self.max_bins)
        return self

    def predict(self, x):
        return sum(t.predict_value(x)[:, 0] for t in self.trees_) / len(self.trees_)


def _softmax(f):
    f = f - f.max(axis=1, keepdims=True)
    e = np.exp(f)
    return e / e.sum(axis=1, keepdims=True)


class GradientBoosting(_Classifier):
    """Log-loss boosting with regression trees and Newton leaf values; one
    tree per round for two classes, one per class and round otherwise."""

    def __init__(self, n_rounds=100, max_depth=3, learning_rate=0.1, min_samples_leaf=1, seed=0,
                 max_bins=MAX_BINS):
        self.n_rounds, self.max_depth, self.learning_rate = n_rounds, max_depth, learning_rate
        self.min_samples_leaf, self.seed, self.max_bins = min_samples_leaf, seed, max_bins

    def _newton_leaves(self, tree, bins_leaf, resid, hess):
        num = np.bincount(bins_leaf, weights=resid, minlength=len(tree.feature))
        den = np.bincount(bins_leaf, weights=hess, minlength=len(tree.feature))
        vals = np.where(den > 1e-12, num / np.maximum(den, 1e-12), 0.0)
        tree.value = vals[:, None]

    def fit(self, x, y):
        yi = self._encode_labels(y)
        k = len(self.classes_)
        binning = fit_binning(x, self.max_bins)
        bins = binning.transform(x)
        n = len(x)
        onehot = np.zeros((n, k))
        onehot[np.arange(n), yi] = 1.0
        prior = np.clip(onehot.mean(axis=0), 1e-12, 1.0)
        self.trees_ = []
        self.train_loss_ = []
        if k == 2:
            p1 = prior[1]
            self.init_ = np.array([math.log(p1 / (1 - p1))])
            f = np.full(n, self.init_[0])
            target = onehot[:, 1]
            for r in range(self.n_rounds):
                p = 1.0 / (1.0 + np.exp(-f))
                resid = target - p
                tree = build_tree(bins, binning, resid, "regression", 0, self.max_depth,
                                  self.min_samples_leaf, None, rng_stream(self.seed, r))
                self._newton_leaves(tree, tree.apply(x), resid, p * (1 - p))
                f = f + self.learning_rate * tree.predict_value(x)[:, 0]
                self.trees_.append([tree])
                self.train_loss_.append(float(np.mean(np.logaddexp(0, f) - target * f)))
        else:
            self.init_ = np.log(prior)
            f = np.tile(self.init_, (n, 1))
            for r in range(self.n_rounds):
                p = _softmax(f)
                round_trees = []
                for c in range(k):
                    resid = onehot[:, c] - p[:, c]
                    tree = build_tree(bins, binning, resid, "regression", 0, self.max_depth,
                                      self.min_samples_leaf, None, rng_stream(self.seed, r * k + c))
                    a = np.abs(resid)
                    self._newton_leaves(tree, tree.apply(x), resid, a * (1 - a))
                    tree.value = tree.value * (k - 1) / k
                    round_trees.append(tree)
                for c, tree in enumerate(round_trees):
                    f[:, c] += self.learning_rate * tree.predict_value(x)[:, 0]
                self.trees_.append(round_trees)
                lp = f - f.max(axis=1, keepdims=True)
                lp = lp - np.log(np.exp(lp).sum(axis=1, keepdims=True))
                self.train_loss_.append(float(-np.mean(lp[np.arange(n), yi])))
        return self

    def decision_function(self, x):
        k = len(self.classes_)
        if k == 2:
            f = np.full(len(x), self.init_[0])
            for (tree,) in self.trees_:
                f = f + self.learning_rate * tree.predict_value(x)[:, 0]
            return f
        f = np.tile(self.init_, (len(x), 1))
        for round_trees in self.trees_:
            for c, tree in enumerate(round_trees):
                f[:, c] += self.learning_rate * tree.predict_value(x)[:, 0]
        return f

    def predict_proba(self, x):
        f = self.decision_function(x)
        if len(self.classes_) == 2:
            p1 = 1.0 / (1.0 + np.exp(-f))
            return np.column_stack([1 - p1, p1])
        return _softmax(f)


class BoostingRegressor:
    """Squared-loss boosting: each round fits a tree to the residuals."""

    def __init__(self, n_rounds=100, max_depth=3, learning_rate=0.1, min_samples_leaf=1, seed=0,
                 max_bins=MAX_BINS):
        self.n_rounds, self.max_depth, self.learning_rate = n_rounds, max_depth, learning_rate
        self.min_samples_leaf, self.seed, self.max_bins = min_samples_leaf, seed, max_bins

    def fit(self, x, y):
        y = np.asarray(y, dtype=np.float64)
        binning = fit_binning(x, self.max_bins)
        bins = binning.transform(x)
        self.init_ = float(y.mean())
        f = np.full(len(y), self.init_)
        self.trees_ = []
        self.train_loss_ = [float(np.mean((y - f) ** 2))]
        for r in range(self.n_rounds):
            tree = build_tree(bins, binning, y - f, "regression", 0, self.max_depth,
                              self.min_samples_leaf, None, rng_stream(self.seed, r))
            f = f + self.learning_rate * tree.predict_value(x)[:, 0]
            self.trees_.append(tree)
            self.train_loss_.append(float(np.mean((y - f) ** 2)))
        return self

    def predict(self, x):
        f = np.full(len(x), self.init_)
        for tree in self.trees_:
            f = f + self.learning_rate * tree.predict_value(x)[:, 0]
        return f
