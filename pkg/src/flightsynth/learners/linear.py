"""Linear models.  All of them work on internally standardized features
(train-set mean and standard deviation, constant columns pinned to zero
weight) and report coefficients on the original scale."""
from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve

from ..numkit import rng_stream, top_eigenvectors
from .ensemble import _Classifier, _softmax


class SingularError(ValueError):
    pass


# relative Cholesky pivot below which the normal equations count as singular
PIVOT_TOL = 1e-7


class _Standardizer:
    def fit(self, x):
        self.mean_ = x.mean(axis=0)
        sd = x.std(axis=0)
        self.live_ = sd > 1e-12 * np.maximum(1.0, np.abs(self.mean_))
        self.scale_ = np.where(self.live_, sd, 1.0)
        return self

    def transform(self, x):
        z = (x - self.mean_) / self.scale_
        z[:, ~self.live_] = 0.0
        return z


class _LinearRegressor:
    def _finish(self, std: _Standardizer, beta_z, y_mean):
        self.coef_ = np.where(std.live_, beta_z / std.scale_, 0.0)
        self.intercept_ = float(y_mean - self.coef_ @ std.mean_)

    def predict(self, x):
        return x @ self.coef_ + self.intercept_


def _cholesky_checked(a):
    try:
        low = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise SingularError("normal equations are singular; use ridge instead of ols") from None
    diag = np.diag(low)
    if np.any(diag * diag < PIVOT_TOL ** 2 * np.diag(a)):
        raise SingularError("normal equations are (near) singular: collinear features; use ridge instead of ols")
    return low


class OLS(_LinearRegressor):
    def fit(self, x, y):
        y = np.asarray(y, dtype=np.float64)
        std = _Standardizer().fit(x)
        z = std.transform(x)[:, std.live_]
        if len(x) <= z.shape[1]:
            raise SingularError(f"ols needs n > d (n={len(x)}, d={z.shape[1]}); use ridge")
        yc = y - y.mean()
        beta = np.zeros(x.shape[1])
        if z.shape[1]:
            low = _cholesky_checked(z.T @ z)
            beta[std.live_] = cho_solve((low, True), z.T @ yc)
        self._finish(std, beta, y.mean())
        return self


class Ridge(_LinearRegressor):
    """Penalty ``lam * |beta|^2`` on standardized coefficients, intercept free."""

    def __init__(self, lam=1.0):
        self.lam = lam

    def fit(self, x, y):
        y = np.asarray(y, dtype=np.float64)
        std = _Standardizer().fit(x)
        z = std.transform(x)[:, std.live_]
        beta = np.zeros(x.shape[1])
        if z.shape[1]:
            a = z.T @ z + self.lam * np.eye(z.shape[1])
            beta[std.live_] = cho_solve((np.linalg.cholesky(a), True), z.T @ (y - y.mean()))
        self._finish(std, beta, y.mean())
        return self


class Lasso(_LinearRegressor):
    """Coordinate descent on ``(1/2n)|y - Z beta|^2 + lam * |beta|_1`` with
    standardized ``Z``."""

    def __init__(self, lam=0.1, tol=1e-7, max_sweeps=10_000):
        self.lam, self.tol, self.max_sweeps = lam, tol, max_sweeps

    def fit(self, x, y):
        y = np.asarray(y, dtype=np.float64)
        n = len(y)
        std = _Standardizer().fit(x)
        z = std.transform(x)
        live = np.flatnonzero(std.live_)
        beta = np.zeros(x.shape[1])
        resid = y - y.mean()
        col_sq = (z * z).sum(axis=0) / n
        self.n_sweeps_ = 0
        for sweep in range(self.max_sweeps):
            biggest = 0.0
            for j in live:
                old = beta[j]
                rho = z[:, j] @ resid / n + col_sq[j] * old
                new = np.sign(rho) * max(abs(rho) - self.lam, 0.0) / col_sq[j]
                if new != old:
                    resid -= z[:, j] * (new - old)
                    beta[j] = new
                    biggest = max(biggest, abs(new - old))
            self.n_sweeps_ = sweep + 1
            if biggest < self.tol:
                break
        self._finish(std, beta, y.mean())
        return self


class PcaOLS(_LinearRegressor):
    """OLS on the leading principal components of the standardized
    features, keeping the fewest that explain ``variance`` of the total."""

    def __init__(self, variance=0.95):
        self.variance = variance

    def fit(self, x, y):
        y = np.asarray(y, dtype=np.float64)
        std = _Standardizer().fit(x)
        z = std.transform(x)[:, std.live_]
        beta = np.zeros(x.shape[1])
        self.n_components_ = 0
        if z.shape[1]:
            cov = z.T @ z / len(z)
            vals, vecs = top_eigenvectors(0.5 * (cov + cov.T), z.shape[1])
            vals = np.clip(vals, 0.0, None)
            share = np.cumsum(vals) / vals.sum()
            k = int(np.searchsorted(share, self.variance - 1e-12) + 1)
            k = min(k, z.shape[1])
            comps = vecs[:k]
            scores = z @ comps.T
            low = _cholesky_checked(scores.T @ scores)
            gamma = cho_solve((low, True), scores.T @ (y - y.mean()))
            beta[std.live_] = comps.T @ gamma
            self.n_components_ = k
        self._finish(std, beta, y.mean())
        return self


class SGDRegressor(_LinearRegressor):
    """Per-sample SGD on squared loss with L2, standardized target."""

    def __init__(self, epochs=5, lr=1e-3, l2=1e-4, seed=0):
        self.epochs, self.lr, self.l2, self.seed = epochs, lr, l2, seed

    def fit(self, x, y):
        y = np.asarray(y, dtype=np.float64)
        std = _Standardizer().fit(x)
        z = std.transform(x)
        y_mean, y_sd = y.mean(), y.std() or 1.0
        t = (y - y_mean) / y_sd
        w = np.zeros(z.shape[1])
        b = 0.0
        rng = rng_stream(self.seed, 0)
        for _ in range(self.epochs):
            for i in rng.permutation(len(t)):
                err = z[i] @ w + b - t[i]
                w -= self.lr * (err * z[i] + self.l2 * w)
                b -= self.lr * err
        self._finish(std, w * y_sd, y_mean + b * y_sd)
        return self


class LogisticRegression(_Classifier):
    """Full-batch gradient descent on the (multinomial) log loss."""

    def __init__(self, lr=0.1, iterations=500):
        self.lr, self.iterations = lr, iterations

    def fit(self, x, y):
        yi = self._encode_labels(y)
        self.std_ = _Standardizer().fit(x)
        z = self.std_.transform(x)
        n, k = len(z), len(self.classes_)
        onehot = np.zeros((n, k))
        onehot[np.arange(n), yi] = 1.0
        w = np.zeros((z.shape[1], k))
        b = np.zeros(k)
        for _ in range(self.iterations):
            p = _softmax(z @ w + b)
            g = (p - onehot) / n
            w -= self.lr * (z.T @ g)
            b -= self.lr * g.sum(axis=0)
        self.w_, self.b_ = w, b
        return self

    def predict_proba(self, x):
        return _softmax(self.std_.transform(x) @ self.w_ + self.b_)


class SGDClassifier(_Classifier):
    """Per-sample SGD on the (multinomial) log loss with L2."""

    def __init__(self, epochs=5, lr=1e-3, l2=1e-4, seed=0):
        self.epochs, self.lr, self.l2, self.seed = epochs, lr, l2, seed

    def fit(self, x, y):
        yi = self._encode_labels(y)
        self.std_ = _Standardizer().fit(x)
        z = self.std_.transform(x)
        k = len(self.classes_)
        w = np.zeros((z.shape[1], k))
        b = np.zeros(k)
        rng = rng_stream(self.seed, 0)
        for _ in range(self.epochs):
            for i in rng.permutation(len(z)):
                f = z[i] @ w + b
                p = np.exp(f - f.max())
                p /= p.sum()
                p[yi[i]] -= 1.0
                w -= self.lr * (np.outer(z[i], p) + self.l2 * w)
                b -= self.lr * p
        self.w_, self.b_ = w, b
        return self

    def predict_proba(self, x):
        return _softmax(self.std_.transform(x) @ self.w_ + self.b_)
