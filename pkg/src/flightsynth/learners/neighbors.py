"""k-nearest neighbours and Gaussian naive Bayes."""
from __future__ import annotations

import numpy as np

from .ensemble import _Classifier
from .linear import _Standardizer

_CHUNK = 1024


def _neighbours(train, query, k):
    """Indices of the ``k`` nearest training rows per query row, nearest
    first; ties go to the lower training index."""
    k = min(k, len(train))
    sq = (train * train).sum(axis=1)
    out = np.empty((len(query), k), dtype=np.int64)
    for s in range(0, len(query), _CHUNK):
        q = query[s:s + _CHUNK]
        d2 = sq[None, :] - 2.0 * q @ train.T + (q * q).sum(axis=1)[:, None]
        part = np.argpartition(d2, k - 1, axis=1)[:, :k] if k < len(train) else \
            np.tile(np.arange(len(train)), (len(q), 1))
        pd = np.take_along_axis(d2, part, axis=1)
        order = np.lexsort((part, pd), axis=1)
        out[s:s + _CHUNK] = np.take_along_axis(part, order, axis=1)
    return out


class KNNClassifier(_Classifier):
    def __init__(self, k=5):
        self.k = k

    def fit(self, x, y):
        self.y_ = self._encode_labels(y)
        self.std_ = _Standardizer().fit(x)
        self.x_ = self.std_.transform(x)
        return self

    def predict_proba(self, x):
        nb = _neighbours(self.x_, self.std_.transform(x), self.k)
        votes = np.zeros((len(x), len(self.classes_)))
        labels = self.y_[nb]
        for j in range(nb.shape[1]):
            votes[np.arange(len(x)), labels[:, j]] += 1.0
        # break vote ties toward the class of the nearest neighbour
        votes[np.arange(len(x)), labels[:, 0]] += 0.5
        return votes / votes.sum(axis=1, keepdims=True)


class KNNRegressor:
    def __init__(self, k=5):
        self.k = k

    def fit(self, x, y):
        self.y_ = np.asarray(y, dtype=np.float64)
        self.std_ = _Standardizer().fit(x)
        self.x_ = self.std_.transform(x)
        return self

    def predict(self, x):
        return self.y_[_neighbours(self.x_, self.std_.transform(x), self.k)].mean(axis=1)


class GaussianNB(_Classifier):
    """Per-class independent Gaussians; variances get ``smoothing`` times
    the largest feature variance added."""

    def __init__(self, smoothing=1e-9):
        self.smoothing = smoothing

    def fit(self, x, y):
        yi = self._encode_labels(y)
        k = len(self.classes_)
        eps = self.smoothing * max(float(x.var(axis=0).max()), 1e-300)
        self.mean_ = np.array([x[yi == c].mean(axis=0) for c in range(k)])
        self.var_ = np.array([x[yi == c].var(axis=0) for c in range(k)]) + eps
        self.log_prior_ = np.log(np.bincount(yi, minlength=k) / len(yi))
        return self

    def predict_proba(self, x):
        ll = np.stack([
            self.log_prior_[c] - 0.5 * np.sum(np.log(2 * np.pi * self.var_[c])
                                              + (x - self.mean_[c]) ** 2 / self.var_[c], axis=1)
            for c in range(len(self.classes_))
        ], axis=1)
        ll -= ll.max(axis=1, keepdims=True)
        p = np.exp(ll)
        return p / p.sum(axis=1, keepdims=True)
