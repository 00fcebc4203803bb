"""Reversible mixed-type -> numeric conversion for the generators.

Two targets share one set of column transforms:

``copula``
    categorical/boolean -> frequency interval on [0, 1) (uniform draw inside
    the interval), datetime -> affine-scaled epoch seconds, numeric passed
    through.
``tvae``
    categorical/boolean -> one-hot block, datetime/numeric -> z-score, or
    mode-specific normalization (GMM mode one-hot + within-mode scalar) when
    ``mode_normalize=True``.

Nullable columns with missing cells go through :func:`split_missing` first:
a filled value column plus a ``"<name>__present"`` Yes/No indicator.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .numkit import rng_stream
from .table import ColumnSchema, Table, TableError

log = logging.getLogger(__name__)

INDICATOR_SUFFIX = "__present"
YES, NO = "Yes", "No"

MODE_WEIGHT_MIN = 0.005
VAR_FLOOR = 1e-6


class EncodeError(ValueError):
    pass


# -- missing-value split/merge ----------------------------------------------
def indicator_name(column: str) -> str:
    return column + INDICATOR_SUFFIX


def split_missing(table: Table, seed: int) -> Table:
    """Replace each nullable column that has missing cells by a filled
    column plus a Yes/No presence indicator placed right after it.

    Missing cells are filled with uniform draws from the column's observed
    values, using a per-column stream derived from ``(seed, column index)``.
    """
    schema: list[ColumnSchema] = []
    cols: dict = {}
    masks: dict = {}
    for j, col in enumerate(table.schema):
        vals, mask = table.values(col.name), table.mask(col.name)
        schema.append(col)
        if not mask.any():
            cols[col.name], masks[col.name] = vals, mask
            continue
        observed = vals[~mask]
        if len(observed) == 0:
            raise EncodeError(f"column {col.name!r} is entirely missing; nothing to fill from")
        rng = rng_stream(seed, j)
        filled = vals.copy()
        filled[mask] = observed[rng.integers(0, len(observed), size=int(mask.sum()))]
        cols[col.name] = filled
        masks[col.name] = np.zeros(len(mask), dtype=bool)
        ind = indicator_name(col.name)
        if ind in table:
            raise EncodeError(f"indicator name {ind!r} collides with an existing column")
        schema.append(ColumnSchema(ind, "categorical"))
        cols[ind] = np.where(mask, NO, YES).astype(object)
    return Table(schema, cols, masks, n_rows=table.n_rows)


def merge_missing(table: Table, state: "EncoderState | Sequence[str]") -> Table:
    """Inverse of :func:`split_missing`: re-mask cells whose indicator says
    "No" and drop the indicator columns."""
    split_cols = state.missing_columns if isinstance(state, EncoderState) else list(state)
    new_masks: dict[str, np.ndarray] = {}
    for name in split_cols:
        ind = indicator_name(name)
        if name not in table or ind not in table:
            raise EncodeError(f"indicator/value column mismatch for {name!r}")
        flags = table.values(ind)
        bad = ~np.isin(flags, [YES, NO]) | table.mask(ind)
        if bad.any():
            raise EncodeError(f"indicator {ind!r} holds values other than Yes/No")
        if not table.column_schema(name).nullable:
            raise EncodeError(f"column {name!r} is not nullable; cannot re-mask")
        new_masks[name] = table.mask(name) | (flags == NO)
    keep = [c for c in table.schema if c.name not in {indicator_name(n) for n in split_cols}]
    return Table(
        keep,
        {c.name: table.values(c.name) for c in keep},
        {c.name: new_masks.get(c.name, table.mask(c.name)) for c in keep},
        n_rows=table.n_rows,
    )


# -- mode-specific normalization ---------------------------------------------
@dataclass
class ModeNormalizer:
    """1-D Gaussian mixture; only components in ``retained`` are used."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    retained: np.ndarray  # bool mask over fitted components
    loglik_trace: list[float] = field(default_factory=list)

    @property
    def n_modes(self) -> int:
        return int(self.retained.sum())

    def active(self):
        r = self.retained
        w = self.weights[r]
        return w / w.sum(), self.means[r], self.variances[r]

    def assign(self, x: np.ndarray) -> np.ndarray:
        """Most probable retained mode for each value."""
        w, mu, var = self.active()
        lp = np.log(w) - 0.5 * np.log(2 * np.pi * var) - 0.5 * (x[:, None] - mu) ** 2 / var
        return np.argmax(lp, axis=1)

    def to_json(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "retained": self.retained.tolist(),
        }

    @classmethod
    def from_json(cls, obj) -> "ModeNormalizer":
        return cls(
            np.asarray(obj["weights"], float),
            np.asarray(obj["means"], float),
            np.asarray(obj["variances"], float),
            np.asarray(obj["retained"], bool),
        )


def _em_gmm(x: np.ndarray, k: int, max_iter: int = 100, tol: float = 1e-6):
    n = len(x)
    means = np.quantile(x, (np.arange(k) + 0.5) / k)
    spread = float(np.var(x))
    var = np.full(k, max(spread / (k * k), VAR_FLOOR))
    w = np.full(k, 1.0 / k)
    trace: list[float] = []
    for _ in range(max_iter):
        with np.errstate(divide="ignore"):
            lp = np.log(w) - 0.5 * np.log(2 * np.pi * var) - 0.5 * (x[:, None] - means) ** 2 / var
        norm = logsumexp(lp, axis=1)
        ll = float(norm.sum())
        if trace and ll - trace[-1] < -1e-9 * max(1.0, abs(ll)):
            raise AssertionError(f"EM log-likelihood decreased: {trace[-1]} -> {ll}")
        trace.append(ll)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol:
            break
        r = np.exp(lp - norm[:, None])
        nk = r.sum(axis=0)
        live = nk > 1e-12
        w = nk / n
        safe = np.where(live, nk, 1.0)
        new_means = (r * x[:, None]).sum(axis=0) / safe
        means = np.where(live, new_means, means)
        new_var = (r * (x[:, None] - means) ** 2).sum(axis=0) / safe
        var = np.maximum(np.where(live, new_var, var), VAR_FLOOR)
    return w, means, var, trace


def fit_mode_normalizer(column, k_max: int = 10) -> ModeNormalizer:
    """EM-fitted GMM with ``k <= k_max`` components, k chosen by BIC.

    Each candidate runs at most 100 EM iterations (or until the
    log-likelihood changes by less than 1e-6); variances are floored at
    1e-6.  Components with weight < 0.005 are dropped afterwards.
    """
    x = np.asarray(column, dtype=np.float64).ravel()
    if len(np.unique(x)) < 2:
        raise EncodeError("mode normalizer needs at least 2 distinct values")
    n = len(x)
    best = None
    stale = 0
    for k in range(1, max(1, k_max) + 1):
        w, mu, var, trace = _em_gmm(x, k)
        bic = -2.0 * trace[-1] + (3 * k - 1) * np.log(n)
        if best is None or bic < best[0]:
            best = (bic, w, mu, var, trace)
            stale = 0
        else:
            stale += 1
            if stale >= 2:
                break
    _, w, mu, var, trace = best
    retained = w >= MODE_WEIGHT_MIN
    if not retained.any():
        retained[np.argmax(w)] = True
    w = np.where(retained, w, 0.0)
    w = w / w.sum()
    return ModeNormalizer(w, mu, var, retained, trace)


# -- column transforms -------------------------------------------------------
@dataclass
class Block:
    """Slice of the encoded matrix produced by one transform."""

    source: str
    start: int
    width: int
    kind: str  # "continuous" | "softmax"


def _category_strings(col: ColumnSchema, values: np.ndarray) -> np.ndarray:
    if col.kind == "boolean":
        return np.where(values.astype(bool), "True", "False").astype(object)
    return values


def _from_category_strings(col: ColumnSchema, cats: np.ndarray) -> np.ndarray:
    if col.kind == "boolean":
        return cats == "True"
    return cats


def _frequency_order(values: np.ndarray):
    cats, counts = np.unique(values.astype(str), return_counts=True)
    order = sorted(range(len(cats)), key=lambda i: (-counts[i], cats[i]))
    return [str(cats[i]) for i in order], np.array([counts[i] for i in order], dtype=np.int64)


@dataclass
class IntervalCategorical:
    """Category -> interval of [0, 1) with width equal to its frequency."""

    column: ColumnSchema
    categories: list[str]
    lows: np.ndarray
    highs: np.ndarray
    width: int = 1

    @classmethod
    def fit(cls, col: ColumnSchema, values: np.ndarray) -> "IntervalCategorical":
        cats, counts = _frequency_order(_category_strings(col, values))
        if len(cats) == 1:
            log.info("column %r has a single category; interval is [0, 1)", col.name)
        cum = np.concatenate([[0], np.cumsum(counts)])
        total = cum[-1]
        return cls(col, cats, cum[:-1] / total, cum[1:] / total)

    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.lows + self.highs)

    def codes(self, values: np.ndarray) -> np.ndarray:
        lookup = {c: i for i, c in enumerate(self.categories)}
        strs = _category_strings(self.column, values)
        out = np.empty(len(strs), dtype=np.int64)
        for i, v in enumerate(strs):
            try:
                out[i] = lookup[v]
            except KeyError:
                raise EncodeError(f"column {self.column.name!r}: unseen category {v!r}") from None
        return out

    def encode(self, values, rng) -> np.ndarray:
        idx = self.codes(values)
        u = rng.random(len(idx))
        lo, hi = self.lows[idx], self.highs[idx]
        out = lo + (hi - lo) * u
        # guard the half-open upper edge against rounding
        out = np.where(out >= hi, np.nextafter(hi, lo), out)
        return out[:, None]

    def decode(self, block: np.ndarray, stats: dict) -> np.ndarray:
        v = block[:, 0]
        outside = (v < 0.0) | (v > 1.0)
        if outside.any():
            stats["clamped"] = stats.get("clamped", 0) + int(outside.sum())
        v = np.clip(v, 0.0, 1.0)
        idx = np.clip(np.searchsorted(self.highs, v, side="right"), 0, len(self.categories) - 1)
        cats = np.array(self.categories, dtype=object)[idx]
        return _from_category_strings(self.column, cats)

    def blocks(self):
        return [("continuous", 1)]

    def to_json(self) -> dict:
        return {"type": "interval", "categories": self.categories,
                "lows": self.lows.tolist(), "highs": self.highs.tolist()}


@dataclass
class OneHotCategorical:
    column: ColumnSchema
    categories: list[str]

    @property
    def width(self) -> int:
        return len(self.categories)

    @classmethod
    def fit(cls, col: ColumnSchema, values: np.ndarray) -> "OneHotCategorical":
        cats, _ = _frequency_order(_category_strings(col, values))
        return cls(col, cats)

    def encode(self, values, rng) -> np.ndarray:
        lookup = {c: i for i, c in enumerate(self.categories)}
        out = np.zeros((len(values), self.width))
        for i, v in enumerate(_category_strings(self.column, values)):
            try:
                out[i, lookup[v]] = 1.0
            except KeyError:
                raise EncodeError(f"column {self.column.name!r}: unseen category {v!r}") from None
        return out

    def decode(self, block: np.ndarray, stats: dict) -> np.ndarray:
        malformed = ~(np.isin(block, (0.0, 1.0)).all(axis=1) & (block.sum(axis=1) == 1.0))
        if malformed.any():
            stats["malformed_onehot"] = stats.get("malformed_onehot", 0) + int(malformed.sum())
        idx = np.argmax(block, axis=1)
        cats = np.array(self.categories, dtype=object)[idx]
        return _from_category_strings(self.column, cats)

    def blocks(self):
        return [("softmax", self.width)]

    def to_json(self) -> dict:
        return {"type": "onehot", "categories": self.categories}


@dataclass
class Affine:
    """``(x - offset) / scale`` for numeric and datetime columns.

    Decoding clips to the observed range and rounds to the observed
    resolution: whole units for integer-valued numeric columns, whole
    minutes for minute-aligned datetimes, whole seconds otherwise.
    """

    column: ColumnSchema
    offset: float
    scale: float
    lo: float
    hi: float
    step: float | None  # rounding resolution, None = none
    width: int = 1

    @classmethod
    def fit(cls, col: ColumnSchema, values: np.ndarray, standardize: bool) -> "Affine":
        x = values.astype(np.float64)
        if col.kind == "datetime":
            step = 60.0 if np.all(values % 60 == 0) else 1.0
        else:
            step = 1.0 if np.all(x == np.round(x)) else None
        if standardize or col.kind == "datetime":
            offset = float(x.mean())
            scale = float(x.std())
            if not scale > 0:
                scale = 1.0
        else:
            offset, scale = 0.0, 1.0
        return cls(col, offset, scale, float(x.min()), float(x.max()), step)

    def encode(self, values, rng) -> np.ndarray:
        return ((values.astype(np.float64) - self.offset) / self.scale)[:, None]

    def restore(self, x: np.ndarray) -> np.ndarray:
        x = np.clip(x, self.lo, self.hi)
        if self.step is not None:
            x = np.round(x / self.step) * self.step
        if self.column.kind == "datetime":
            return np.round(x).astype(np.int64)
        return x

    def decode(self, block: np.ndarray, stats: dict) -> np.ndarray:
        return self.restore(block[:, 0] * self.scale + self.offset)

    def blocks(self):
        return [("continuous", 1)]

    def to_json(self) -> dict:
        return {"type": "affine", "offset": self.offset, "scale": self.scale,
                "lo": self.lo, "hi": self.hi, "step": self.step}


@dataclass
class ModeSpecific:
    """Within-mode scalar ``(x - mu_c) / sigma_c`` plus mode one-hot."""

    column: ColumnSchema
    normalizer: ModeNormalizer
    base: Affine  # range/rounding bookkeeping (offset 0, scale 1)

    @property
    def width(self) -> int:
        return 1 + self.normalizer.n_modes

    @classmethod
    def fit(cls, col: ColumnSchema, values: np.ndarray, k_max: int) -> "ModeSpecific":
        x = values.astype(np.float64)
        base = Affine.fit(col, values, standardize=False)
        base.offset, base.scale = 0.0, 1.0
        return cls(col, fit_mode_normalizer(x, k_max), base)

    def encode(self, values, rng) -> np.ndarray:
        x = values.astype(np.float64)
        _, mu, var = self.normalizer.active()
        c = self.normalizer.assign(x)
        out = np.zeros((len(x), self.width))
        out[:, 0] = (x - mu[c]) / np.sqrt(var[c])
        out[np.arange(len(x)), 1 + c] = 1.0
        return out

    def decode(self, block: np.ndarray, stats: dict) -> np.ndarray:
        _, mu, var = self.normalizer.active()
        onehot = block[:, 1:]
        malformed = ~(np.isin(onehot, (0.0, 1.0)).all(axis=1) & (onehot.sum(axis=1) == 1.0))
        if malformed.any():
            stats["malformed_onehot"] = stats.get("malformed_onehot", 0) + int(malformed.sum())
        c = np.argmax(onehot, axis=1)
        return self.base.restore(mu[c] + block[:, 0] * np.sqrt(var[c]))

    def blocks(self):
        return [("continuous", 1), ("softmax", self.normalizer.n_modes)]

    def to_json(self) -> dict:
        return {"type": "mode", "normalizer": self.normalizer.to_json(), "base": self.base.to_json()}


def _transform_from_json(col: ColumnSchema, obj: dict):
    t = obj["type"]
    if t == "interval":
        return IntervalCategorical(col, list(obj["categories"]),
                                   np.asarray(obj["lows"], float), np.asarray(obj["highs"], float))
    if t == "onehot":
        return OneHotCategorical(col, list(obj["categories"]))
    if t == "affine":
        return Affine(col, obj["offset"], obj["scale"], obj["lo"], obj["hi"], obj["step"])
    if t == "mode":
        base = obj["base"]
        return ModeSpecific(col, ModeNormalizer.from_json(obj["normalizer"]),
                            Affine(col, base["offset"], base["scale"], base["lo"], base["hi"], base["step"]))
    raise EncodeError(f"unknown transform type {t!r}")


# -- encoder state -------------------------------------------------------------
@dataclass
class EncoderState:
    target: str
    schema: list[ColumnSchema]  # split-table schema consumed by encode()
    transforms: list
    missing_columns: list[str]
    mode_normalize: bool = False

    @property
    def source_schema(self) -> list[ColumnSchema]:
        drop = {indicator_name(n) for n in self.missing_columns}
        return [c for c in self.schema if c.name not in drop]

    def layout(self) -> list[Block]:
        out, start = [], 0
        for col, tr in zip(self.schema, self.transforms):
            for kind, width in tr.blocks():
                out.append(Block(col.name, start, width, kind))
                start += width
        return out

    @property
    def width(self) -> int:
        return sum(tr.width for tr in self.transforms)

    def transform(self, name: str):
        for col, tr in zip(self.schema, self.transforms):
            if col.name == name:
                return tr
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "target": self.target,
            "mode_normalize": self.mode_normalize,
            "missing_columns": self.missing_columns,
            "columns": [{"schema": c.to_json(), "transform": t.to_json()}
                        for c, t in zip(self.schema, self.transforms)],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EncoderState":
        schema, transforms = [], []
        for entry in obj["columns"]:
            col = ColumnSchema.from_json(entry["schema"])
            schema.append(col)
            transforms.append(_transform_from_json(col, entry["transform"]))
        return cls(obj["target"], schema, transforms, list(obj["missing_columns"]),
                   bool(obj.get("mode_normalize", False)))


@dataclass
class EncodedMatrix:
    values: np.ndarray
    blocks: list[Block]

    @property
    def shape(self):
        return self.values.shape


def fit_encoder(table: Table, target: str, mode_normalize: bool = False, k_max: int = 10) -> EncoderState:
    """Fit per-column transforms on a table already passed through
    :func:`split_missing`."""
    if target not in ("copula", "tvae"):
        raise EncodeError(f"unknown encoder target {target!r}")
    if table.n_rows == 0 or not table.schema:
        raise EncodeError("cannot fit an encoder on an empty table")
    for col in table.schema:
        if table.mask(col.name).any():
            raise EncodeError(f"column {col.name!r} still has missing cells; run split_missing first")
    names = set(table.names)
    missing_cols = [c.name for c in table.schema
                    if indicator_name(c.name) in names
                    and table.column_schema(indicator_name(c.name)).kind == "categorical"]
    transforms = []
    for col in table.schema:
        vals = table.values(col.name)
        if col.kind in ("categorical", "boolean"):
            tr = IntervalCategorical.fit(col, vals) if target == "copula" else OneHotCategorical.fit(col, vals)
        elif target == "tvae" and mode_normalize and len(np.unique(vals)) >= 2:
            tr = ModeSpecific.fit(col, vals, k_max)
        else:
            tr = Affine.fit(col, vals, standardize=(target == "tvae"))
        transforms.append(tr)
    return EncoderState(target, list(table.schema), transforms, missing_cols, mode_normalize)


def encode(table: Table, state: EncoderState, seed: int = 0) -> EncodedMatrix:
    if [c.name for c in table.schema] != [c.name for c in state.schema]:
        raise EncodeError("table schema does not match encoder state")
    parts = []
    for j, (col, tr) in enumerate(zip(state.schema, state.transforms)):
        if table.mask(col.name).any():
            raise EncodeError(f"column {col.name!r} has missing cells; run split_missing first")
        parts.append(tr.encode(table.values(col.name), rng_stream(seed, 1000 + j)))
    values = np.hstack(parts) if parts else np.zeros((table.n_rows, 0))
    if not np.isfinite(values).all():
        raise EncodeError("encoding produced non-finite values")
    return EncodedMatrix(values, state.layout())


def decode(matrix, state: EncoderState, stats: dict | None = None) -> Table:
    """Map a (generated) matrix back to a table with the source schema."""
    values = matrix.values if isinstance(matrix, EncodedMatrix) else np.asarray(matrix, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != state.width:
        raise EncodeError(f"matrix has {values.shape[-1]} columns, encoder expects {state.width}")
    stats = {} if stats is None else stats
    cols, start = {}, 0
    for col, tr in zip(state.schema, state.transforms):
        block = values[:, start:start + tr.width]
        cols[col.name] = tr.decode(block, stats)
        start += tr.width
    for key, count in stats.items():
        if count:
            log.warning("decode: %d cell(s) %s", count, key.replace("_", " "))
    table = Table(state.schema, cols, n_rows=values.shape[0])
    return merge_missing(table, state)
