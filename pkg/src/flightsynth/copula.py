"""Gaussian copula generator with Gaussian-kernel KDE marginals.

Fitting maps every encoded column through its KDE CDF and the standard
normal quantile; the Pearson correlation of those normal scores is the
copula parameter.  Sampling reverses the chain: correlated normals via the
Cholesky factor, then ``Phi`` and the KDE quantile per column.

Fit cost is dominated by KDE CDF evaluation, O(n^2 d), which is why the fit
row count is capped (default 5000).  Saved models embed the training
values as KDE sample points, so treat model files like the data itself.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encode import EncoderState, decode, encode, fit_encoder, split_missing
from .numkit import (
    BANDWIDTH_FLOOR, CorrelationMatrix, KdeMarginal, kde_cdf, kde_fit, kde_quantile,
    normal_cdf, normal_quantile, rng_stream,
)
from .table import Table

log = logging.getLogger(__name__)

DEFAULT_CAP = 5000
MIN_ROWS = 10


class CopulaError(ValueError):
    pass


@dataclass
class FittedCopula:
    marginals: list[KdeMarginal]
    correlation: CorrelationMatrix
    encoder: EncoderState
    columns: list[str]  # encoded column order
    n_fit: int

    def __post_init__(self):
        if len(self.marginals) != len(self.columns):
            raise CopulaError("marginal count differs from encoded column count")
        if self.correlation.theta.shape != (len(self.columns),) * 2:
            raise CopulaError("correlation matrix does not match column count")

    def to_json(self) -> dict:
        return {
            "kind": "gaussian_copula",
            "n_fit": self.n_fit,
            "columns": self.columns,
            "marginals": [m.to_json() for m in self.marginals],
            "correlation": self.correlation.theta.tolist(),
            "encoder": self.encoder.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FittedCopula":
        if obj.get("kind") != "gaussian_copula":
            raise CopulaError("not a Gaussian copula model file")
        return cls(
            [KdeMarginal.from_json(m) for m in obj["marginals"]],
            CorrelationMatrix.from_matrix(np.asarray(obj["correlation"], dtype=np.float64)),
            EncoderState.from_json(obj["encoder"]),
            list(obj["columns"]),
            int(obj["n_fit"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FittedCopula":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def subsample(table: Table, cap: int, seed: int) -> Table:
    """Seeded uniform subsample without replacement (row order kept)."""
    if table.n_rows <= cap:
        return table
    rows = np.sort(rng_stream(seed, 0).choice(table.n_rows, size=cap, replace=False))
    return table.take(rows)


def normal_scores(x: np.ndarray, marginals: list[KdeMarginal]) -> np.ndarray:
    z = np.empty_like(x, dtype=np.float64)
    for j, m in enumerate(marginals):
        z[:, j] = normal_quantile(kde_cdf(m, x[:, j]))
    return z


def _score_correlation(z: np.ndarray) -> np.ndarray:
    d = z.shape[1]
    sd = z.std(axis=0)
    live = sd > 0
    r = np.eye(d)
    if live.sum() >= 2:
        zc = (z[:, live] - z[:, live].mean(axis=0)) / sd[live]
        r_live = zc.T @ zc / len(z)
        idx = np.flatnonzero(live)
        r[np.ix_(idx, idx)] = r_live
    np.fill_diagonal(r, 1.0)
    return np.clip(0.5 * (r + r.T), -1.0, 1.0)


def gc_fit(table: Table, seed: int = 0, cap: int = DEFAULT_CAP) -> FittedCopula:
    """Fit KDE marginals and the normal-scores correlation matrix."""
    if table.n_rows > cap:
        raise CopulaError(
            f"{table.n_rows} rows exceed the Gaussian copula fit cap of {cap}; "
            f"subsample to {cap} rows first (copula.subsample or the CLI --cap option)")
    if table.n_rows < MIN_ROWS:
        raise CopulaError(f"need at least {MIN_ROWS} rows to fit, got {table.n_rows}")
    split = split_missing(table, seed)
    state = fit_encoder(split, "copula")
    x = encode(split, state, seed).values
    columns = [b.source for b in state.layout()]
    marginals = []
    for j, name in enumerate(columns):
        m = kde_fit(x[:, j])
        if m.bandwidth == BANDWIDTH_FLOOR:
            log.warning("copula: column %r is constant; bandwidth floored at %g", name, BANDWIDTH_FLOOR)
        marginals.append(m)
    z = normal_scores(x, marginals)
    corr = CorrelationMatrix.from_matrix(_score_correlation(z))
    return FittedCopula(marginals, corr, state, columns, table.n_rows)


def gc_sample_matrix(model: FittedCopula, n: int, seed: int) -> np.ndarray:
    """Encoded-space draws (before decoding)."""
    if n < 1:
        raise CopulaError("sample size must be >= 1")
    rng = rng_stream(seed, 0)
    eps = rng.standard_normal((n, len(model.columns)))
    z = eps @ model.correlation.chol.T
    u = normal_cdf(z)
    x = np.empty_like(u)
    for j, m in enumerate(model.marginals):
        x[:, j] = kde_quantile(m, u[:, j])
    return x


def gc_sample(model: FittedCopula, n: int, seed: int = 0, stats: dict | None = None) -> Table:
    """Draw ``n`` synthetic rows with the original schema."""
    return decode(gc_sample_matrix(model, n, seed), model.encoder, stats)
