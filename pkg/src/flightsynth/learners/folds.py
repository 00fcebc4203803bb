"""Deterministic (stratified) k-fold partitions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numkit import rng_stream


class FoldError(ValueError):
    pass


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[np.ndarray, ...]  # test indices per fold, sorted
    seed: int

    @property
    def k(self) -> int:
        return len(self.folds)

    def splits(self):
        """Yield ``(train_idx, test_idx)`` per fold."""
        n = sum(len(f) for f in self.folds)
        for test in self.folds:
            train = np.ones(n, bool)
            train[test] = False
            yield np.flatnonzero(train), test


def stratified_kfold(labels, k: int = 5, seed: int = 0) -> FoldPlan:
    """Shuffle each class with a seeded stream, then deal its members to the
    folds round-robin.  The dealing offset carries over between classes so
    fold sizes stay within one row of each other."""
    labels = np.asarray(labels, dtype=object)
    if k < 2:
        raise FoldError("k must be >= 2")
    classes, counts = np.unique(labels.astype(str), return_counts=True)
    small = [str(c) for c, n in zip(classes, counts) if n < k]
    if small:
        raise FoldError(f"class(es) {small} have fewer than k={k} members")
    rng = rng_stream(seed, 0)
    buckets: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    keys = labels.astype(str)
    for c in classes:
        members = rng.permutation(np.flatnonzero(keys == c))
        for i, row in enumerate(members):
            buckets[(offset + i) % k].append(int(row))
        offset = (offset + len(members)) % k
    return FoldPlan(tuple(np.sort(np.array(b, dtype=np.int64)) for b in buckets), seed)


def kfold(n: int, k: int = 5, seed: int = 0) -> FoldPlan:
    """Plain shuffled k-fold for regression targets."""
    if k < 2 or n < k:
        raise FoldError(f"need k >= 2 and n >= k (n={n}, k={k})")
    order = rng_stream(seed, 0).permutation(n)
    return FoldPlan(tuple(np.sort(order[i::k]) for i in range(k)), seed)
