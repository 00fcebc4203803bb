"""CART trees on pre-binned features.

Each feature is cut into at most ``max_bins`` bins once per fit (exact
when it has that few distinct values, quantile edges otherwise).  A node
scores every candidate split of every considered feature from a single
``bincount`` of (feature, bin, class) or of (feature, bin) sums, so the
cost per node is linear in its row count.  Thresholds are midpoints
between neighbouring values; a row goes left when ``x < threshold``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_BINS = 128


@dataclass(frozen=True)
class Binning:
    edges: tuple[np.ndarray, ...]  # per feature, increasing thresholds

    @property
    def n_bins(self) -> int:
        return max(len(e) for e in self.edges) + 1 if self.edges else 1

    def transform(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(x.shape, dtype=np.int64)
        for j, e in enumerate(self.edges):
            out[:, j] = np.searchsorted(e, x[:, j], side="right")
        return out


def fit_binning(x: np.ndarray, max_bins: int = MAX_BINS) -> Binning:
    edges = []
    for j in range(x.shape[1]):
        u = np.unique(x[:, j])
        if len(u) > max_bins:
            q = np.quantile(x[:, j], np.linspace(0, 1, max_bins + 1)[1:-1])
            # snap to observed values so cuts fall between real neighbours
            idx = np.unique(np.searchsorted(u, q, side="left"))
            idx = idx[(idx > 0) & (idx < len(u))]
            e = 0.5 * (u[idx - 1] + u[idx])
        else:
            e = 0.5 * (u[:-1] + u[1:])
        edges.append(np.asarray(e, dtype=np.float64))
    return Binning(tuple(edges))


@dataclass
class TreeArrays:
    feature: np.ndarray  # -1 for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_outputs)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf index per row."""
        node = np.zeros(len(x), dtype=np.int64)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            rows = np.flatnonzero(inner)
            nr = node[rows]
            go_left = x[rows, self.feature[nr]] < self.threshold[nr]
            node[rows] = np.where(go_left, self.left[nr], self.right[nr])

    def predict_value(self, x: np.ndarray) -> np.ndarray:
        return self.value[self.apply(x)]

    @property
    def depth(self) -> int:
        depth = np.zeros(len(self.feature), dtype=np.int64)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())


def build_tree(
    bins: np.ndarray,
    binning: Binning,
    y: np.ndarray,
    task: str,
    n_classes: int = 0,
    max_depth: int = 12,
    min_samples_leaf: int = 1,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
    sample_weight: np.ndarray | None = None,
) -> TreeArrays:
    """Grow a tree depth-first.

    ``task`` is ``"classification"`` (``y`` holds class indices, Gini
    impurity) or ``"regression"`` (variance reduction).  ``max_features``
    < number of features draws a fresh feature subset per node from ``rng``.
    ``sample_weight`` holds positive multiplicities (bootstrap counts).
    """
    if min_samples_leaf < 1:
        raise ValueError("min_samples_leaf must be >= 1")
    n, d = bins.shape
    nb = binning.n_bins
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    k = n_classes if task == "classification" else 1
    mf = d if max_features is None else max(1, min(d, int(max_features)))
    feature, threshold, left, right, value = [], [], [], [], []

    def leaf_value(idx):
        if task == "classification":
            counts = np.bincount(y[idx], weights=w[idx], minlength=k)
            return counts / counts.sum()
        return np.array([np.average(y[idx], weights=w[idx])])

    def best_split(idx, feats):
        b = bins[idx][:, feats]
        wi = w[idx]
        offs = (np.arange(len(feats)) * nb)[None, :]
        flat = (b + offs).ravel()
        wf = np.repeat(wi, len(feats))
        total_w = wi.sum()
        if task == "classification":
            yi = np.repeat(y[idx], len(feats))
            h = np.bincount(flat * k + yi, weights=wf, minlength=len(feats) * nb * k)
            h = h.reshape(len(feats), nb, k)
            cl = np.cumsum(h, axis=1)[:, :-1, :]  # left counts for split after bin b
            tot = h.sum(axis=1)[:, None, :]
            cr = tot - cl
            nl = cl.sum(axis=2)
            nr = cr.sum(axis=2)
            with np.errstate(divide="ignore", invalid="ignore"):
                gl = nl - (cl * cl).sum(axis=2) / nl
                gr = nr - (cr * cr).sum(axis=2) / nr
            # weighted Gini impurity times total weight
            score = gl + gr
            parent = total_w - (tot[:, 0, :] ** 2).sum(axis=1)[0] / total_w
        else:
            yi = np.repeat(y[idx], len(feats))
            size = len(feats) * nb
            cnt = np.bincount(flat, weights=wf, minlength=size).reshape(len(feats), nb)
            s1 = np.bincount(flat, weights=wf * yi, minlength=size).reshape(len(feats), nb)
            nl = np.cumsum(cnt, axis=1)[:, :-1]
            sl = np.cumsum(s1, axis=1)[:, :-1]
            nr = total_w - nl
            sr = s1.sum(axis=1)[:, None] - sl
            with np.errstate(divide="ignore", invalid="ignore"):
                # SSE = sum y^2 - S^2/n; the sum y^2 part is shared by all splits
                score = -(sl * sl / nl + sr * sr / nr)
            tot_s = s1[0].sum()
            parent = -(tot_s * tot_s / total_w)
        ok = (nl > 0) & (nr > 0)
        if min_samples_leaf > 1:
            # leaf-size constraint counts rows, not weights
            cnt_rows = np.bincount(flat, minlength=len(feats) * nb).reshape(len(feats), nb)
            rl = np.cumsum(cnt_rows, axis=1)[:, :-1]
            ok &= (rl >= min_samples_leaf) & (len(idx) - rl >= min_samples_leaf)
        score = np.where(ok, score, np.inf)
        flat_best = int(np.argmin(score))
        fi, bb = divmod(flat_best, nb - 1)
        # zero-gain splits are allowed (XOR needs one at the root)
        if not np.isfinite(score[fi, bb]) or score[fi, bb] > parent + 1e-9 * max(1.0, abs(parent)):
            return None
        return feats[fi], bb

    stack = [(np.arange(n), 0, -1, False)]
    while stack:
        idx, depth, parent, is_left = stack.pop()
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(leaf_value(idx))
        if parent >= 0:
            if is_left:
                left[parent] = node
            else:
                right[parent] = node
        if depth >= max_depth or len(idx) < 2 * min_samples_leaf or nb < 2:
            continue
        if task == "classification" and np.count_nonzero(value[node]) <= 1:
            continue
        if task == "regression" and np.all(y[idx] == y[idx[0]]):
            continue
        feats = np.arange(d) if mf >= d else np.sort(rng.choice(d, size=mf, replace=False))
        split = best_split(idx, feats)
        if split is None:
            continue
        f, b = split
        feature[node] = int(f)
        threshold[node] = float(binning.edges[f][b])
        go_left = bins[idx, f] <= b
        # push right first so the left subtree gets the next node ids
        stack.append((idx[~go_left], depth + 1, node, False))
        stack.append((idx[go_left], depth + 1, node, True))

    return TreeArrays(
        np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64), np.array(value),
    )
