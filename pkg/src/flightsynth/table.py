"""Typed columnar table with an explicit missingness mask, plus CSV/JSON I/O.

Storage per kind:

* ``numeric``     -> float64, null sentinel ``nan``
* ``datetime``    -> int64 epoch seconds (UTC), null sentinel ``0``
* ``boolean``     -> bool, null sentinel ``False``
* ``categorical`` -> object array of interned ``str``, null sentinel ``""``

The mask is the only source of truth for missingness; sentinels are never
read as data.
"""
from __future__ import annotations

import calendar
import csv
import hashlib
import json
import re
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

KINDS = ("categorical", "numeric", "datetime", "boolean")

_NULL = {
    "numeric": np.nan,
    "datetime": 0,
    "boolean": False,
    "categorical": "",
}
_DTYPE = {
    "numeric": np.float64,
    "datetime": np.int64,
    "boolean": np.bool_,
    "categorical": object,
}

_NUMBER_RE = re.compile(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?$")
_DATETIME_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})Z$")
_BOOL_TRUE = {"true", "1"}
_BOOL_FALSE = {"false", "0"}


class TableError(ValueError):
    """Schema violation, parse failure or unknown column."""


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str
    unit: str | None = None
    nullable: bool = False
    timezone: str | None = field(default=None)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise TableError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "datetime":
            if self.timezone not in (None, "UTC"):
                raise TableError(f"column {self.name!r}: datetime columns are UTC only")
            object.__setattr__(self, "timezone", "UTC")
        elif self.timezone is not None:
            raise TableError(f"column {self.name!r}: timezone only applies to datetime")

    def to_json(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        if self.unit is not None:
            out["unit"] = self.unit
        out["nullable"] = self.nullable
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "ColumnSchema":
        unknown = set(obj) - {"name", "kind", "unit", "nullable", "timezone"}
        if unknown:
            raise TableError(f"schema entry has unknown keys {sorted(unknown)}")
        return cls(
            name=str(obj["name"]),
            kind=str(obj["kind"]),
            unit=obj.get("unit"),
            nullable=bool(obj.get("nullable", False)),
        )


def _coerce(kind: str, values, mask: np.ndarray) -> np.ndarray:
    if kind == "categorical":
        arr = np.empty(len(mask), dtype=object)
        for i, v in enumerate(values):
            arr[i] = "" if mask[i] else sys.intern(str(v))
        return arr
    arr = np.array(values, dtype=_DTYPE[kind], copy=True)
    if arr.ndim != 1:
        raise TableError("columns must be one-dimensional")
    arr[mask] = _NULL[kind]
    return arr


class Table:
    """Immutable columnar table.

    Parameters
    ----------
    schema : sequence of ColumnSchema
    columns : mapping name -> array-like of cell values
    masks : mapping name -> bool array, optional
        ``True`` marks a missing cell.  Omitted columns are fully observed,
        except that ``nan`` in a numeric column is treated as missing.
    """

    def __init__(
        self,
        schema: Sequence[ColumnSchema],
        columns: Mapping[str, Iterable],
        masks: Mapping[str, Iterable[bool]] | None = None,
        n_rows: int | None = None,
    ):
        names = [c.name for c in schema]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise TableError(f"duplicate column names: {dup}")
        extra = set(columns) - set(names)
        if extra:
            raise TableError(f"unknown column(s): {sorted(extra)}")
        masks = dict(masks or {})
        self._schema = tuple(schema)
        self._index = {c.name: i for i, c in enumerate(self._schema)}
        self._cols: dict[str, np.ndarray] = {}
        self._masks: dict[str, np.ndarray] = {}
        sizes = set()
        for col in self._schema:
            if col.name not in columns:
                raise TableError(f"missing data for column {col.name!r}")
            raw = columns[col.name]
            if col.kind == "categorical":
                raw = list(raw)
            n = len(raw)
            sizes.add(n)
            if col.name in masks:
                mask = np.array(masks[col.name], dtype=bool, copy=True)
            elif col.kind == "numeric":
                mask = np.isnan(np.asarray(raw, dtype=np.float64))
            else:
                mask = np.zeros(n, dtype=bool)
            if mask.shape != (n,):
                raise TableError(f"column {col.name!r}: mask length differs from data")
            if mask.any() and not col.nullable:
                raise TableError(f"column {col.name!r} is not nullable but has missing cells")
            arr = _coerce(col.kind, raw, mask)
            if col.kind == "numeric" and not np.isfinite(arr[~mask]).all():
                raise TableError(f"column {col.name!r}: non-finite value in observed cell")
            if col.kind == "categorical" and any(v == "" for v in arr[~mask]):
                raise TableError(f"column {col.name!r}: empty string is reserved for missing")
            arr.setflags(write=False)
            mask.setflags(write=False)
            self._cols[col.name] = arr
            self._masks[col.name] = mask
        if len(sizes) > 1:
            raise TableError(f"columns have unequal lengths: {sorted(sizes)}")
        if sizes:
            self._n = sizes.pop()
            if n_rows is not None and n_rows != self._n:
                raise TableError(f"n_rows={n_rows} but columns hold {self._n} rows")
        else:
            self._n = int(n_rows or 0)
        self._categories: dict[str, tuple[str, ...]] = {}

    # -- accessors -----------------------------------------------------
    @property
    def schema(self) -> tuple[ColumnSchema, ...]:
        return self._schema

    @property
    def names(self) -> list[str]:
        return [c.name for c in self._schema]

    @property
    def n_rows(self) -> int:
        return self._n

    @property
    def shape(self) -> tuple[int, int]:
        return (self._n, len(self._schema))

    def __len__(self) -> int:
        return self._n

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def column_schema(self, name: str) -> ColumnSchema:
        try:
            return self._schema[self._index[name]]
        except KeyError:
            raise TableError(f"unknown column {name!r}") from None

    def values(self, name: str) -> np.ndarray:
        self.column_schema(name)
        return self._cols[name]

    def mask(self, name: str) -> np.ndarray:
        self.column_schema(name)
        return self._masks[name]

    def observed(self, name: str) -> np.ndarray:
        """Values of the non-missing cells."""
        return self.values(name)[~self.mask(name)]

    def categories(self, name: str) -> tuple[str, ...]:
        """Sorted category dictionary for a categorical column."""
        if name not in self._categories:
            if self.column_schema(name).kind != "categorical":
                raise TableError(f"column {name!r} is not categorical")
            self._categories[name] = tuple(sorted(set(self.observed(name).tolist())))
        return self._categories[name]

    # -- derivation ----------------------------------------------------
    def select(self, names: Sequence[str]) -> "Table":
        return select_columns(self, names)

    def take(self, rows) -> "Table":
        """Row subset (index array or boolean mask), order as given."""
        rows = np.asarray(rows)
        if rows.dtype == bool:
            if rows.shape != (self._n,):
                raise TableError("boolean row mask has wrong length")
            rows = np.flatnonzero(rows)
        n = len(rows)
        return Table(
            self._schema,
            {c: self._cols[c][rows] for c in self._cols},
            {c: self._masks[c][rows] for c in self._masks},
            n_rows=n,
        )

    def with_columns(
        self,
        schema: Sequence[ColumnSchema],
        columns: Mapping[str, Iterable],
        masks: Mapping[str, Iterable[bool]] | None = None,
    ) -> "Table":
        """Append (or replace, by name) columns."""
        new_schema = list(self._schema)
        cols = dict(self._cols)
        msk = dict(self._masks)
        for col in schema:
            if col.name in self._index:
                new_schema[self._index[col.name]] = col
            else:
                new_schema.append(col)
            cols[col.name] = columns[col.name]
            if masks is not None and col.name in masks:
                msk[col.name] = masks[col.name]
            else:
                msk.pop(col.name, None)
        return Table(new_schema, cols, msk, n_rows=self._n)

    def drop(self, names: Sequence[str]) -> "Table":
        keep = [n for n in self.names if n not in set(names)]
        return select_columns(self, keep)

    def equals(self, other: "Table") -> bool:
        """Cell-for-cell equality including schema and masks."""
        if not isinstance(other, Table):
            return False
        if self._schema != other._schema or self._n != other._n:
            return False
        for name in self._cols:
            m = self._masks[name]
            if not np.array_equal(m, other._masks[name]):
                return False
            a, b = self._cols[name][~m], other._cols[name][~m]
            if not np.array_equal(a, b):
                return False
        return True

    def fingerprint(self) -> str:
        """sha256 over schema and cell contents."""
        h = hashlib.sha256()
        h.update(json.dumps([c.to_json() for c in self._schema]).encode())
        h.update(str(self._n).encode())
        for c in self._schema:
            m = self._masks[c.name]
            h.update(np.packbits(m).tobytes())
            v = self._cols[c.name]
            if c.kind == "categorical":
                h.update("\x1f".join(v.tolist()).encode())
            else:
                h.update(np.ascontiguousarray(np.where(m, _NULL[c.kind], v)).tobytes())
        return h.hexdigest()

    def __repr__(self) -> str:
        return f"Table(n_rows={self._n}, columns={self.names})"


def select_columns(table: Table, names: Sequence[str]) -> Table:
    """Projection preserving row order, masks and schema entries."""
    names = list(names)
    for n in names:
        table.column_schema(n)
    if len(set(names)) != len(names):
        raise TableError("duplicate names in projection")
    return Table(
        [table.column_schema(n) for n in names],
        {n: table.values(n) for n in names},
        {n: table.mask(n) for n in names},
        n_rows=table.n_rows,
    )


def concat_rows(tables: Sequence[Table]) -> Table:
    first = tables[0]
    for t in tables[1:]:
        if t.schema != first.schema:
            raise TableError("cannot concatenate tables with different schemas")
    return Table(
        first.schema,
        {n: np.concatenate([t.values(n) for t in tables]) for n in first.names},
        {n: np.concatenate([t.mask(n) for t in tables]) for n in first.names},
        n_rows=sum(t.n_rows for t in tables),
    )


# -- datetime helpers --------------------------------------------------
def parse_iso_utc(text: str) -> int:
    m = _DATETIME_RE.match(text)
    if not m:
        raise ValueError(f"not an ISO-8601 UTC timestamp: {text!r}")
    y, mo, d, hh, mm, ss = (int(g) for g in m.groups())
    if not (1 <= mo <= 12 and 1 <= d <= calendar.monthrange(y, mo)[1]
            and hh < 24 and mm < 60 and ss < 60):
        raise ValueError(f"out-of-range timestamp: {text!r}")
    return calendar.timegm((y, mo, d, hh, mm, ss, 0, 0, 0))


def format_iso_utc(epoch: int) -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(int(epoch)))


def _format_number(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _parse_cell(kind: str, text: str):
    if kind == "numeric":
        if not _NUMBER_RE.match(text):
            raise ValueError(f"not a plain decimal number: {text!r}")
        return float(text)
    if kind == "datetime":
        return parse_iso_utc(text)
    if kind == "boolean":
        low = text.lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ValueError(f"not a boolean: {text!r}")
    return text


def format_cell(kind: str, value) -> str:
    if kind == "numeric":
        return _format_number(value)
    if kind == "datetime":
        return format_iso_utc(value)
    if kind == "boolean":
        return "true" if value else "false"
    return str(value)


# -- file I/O -----------------------------------------------------------
def read_schema(path: str | Path) -> list[ColumnSchema]:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, list):
        raise TableError(f"{path}: schema must be a JSON array")
    return [ColumnSchema.from_json(e) for e in obj]


def write_schema(schema: Sequence[ColumnSchema], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([c.to_json() for c in schema], fh, indent=2)
        fh.write("\n")


def read_table(path: str | Path, schema_path: str | Path) -> Table:
    """Read a CSV file against its schema sidecar.  Empty field = missing."""
    schema = read_schema(schema_path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableError(f"{path}: empty file, header row expected") from None
        expected = [c.name for c in schema]
        unknown = [h for h in header if h not in expected]
        if unknown:
            raise TableError(f"{path}: unknown column(s) {unknown}")
        absent = [n for n in expected if n not in header]
        if absent:
            raise TableError(f"{path}: header is missing schema column(s) {absent}")
        if len(header) != len(set(header)):
            raise TableError(f"{path}: duplicate header names")
        pos = {h: i for i, h in enumerate(header)}
        raw: dict[str, list] = {c.name: [] for c in schema}
        masks: dict[str, list] = {c.name: [] for c in schema}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise TableError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
            for col in schema:
                text = row[pos[col.name]]
                if text == "":
                    if not col.nullable:
                        raise TableError(
                            f"{path}: row {lineno}, column {col.name!r}: empty cell in non-nullable column")
                    raw[col.name].append(_NULL[col.kind])
                    masks[col.name].append(True)
                    continue
                try:
                    raw[col.name].append(_parse_cell(col.kind, text))
                except ValueError as exc:
                    raise TableError(f"{path}: row {lineno}, column {col.name!r}: {exc}") from None
                masks[col.name].append(False)
    n = len(next(iter(masks.values()), []))
    return Table(schema, raw, masks, n_rows=n)


def write_table(table: Table, path: str | Path, schema_path: str | Path | None = None) -> None:
    """Write CSV (and optionally the schema sidecar)."""
    cols = [(c, table.values(c.name), table.mask(c.name)) for c in table.schema]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.names)
        for i in range(table.n_rows):
            writer.writerow(
                ["" if m[i] else format_cell(c.kind, v[i]) for c, v, m in cols]
            )
    if schema_path is not None:
        write_schema(table.schema, schema_path)


def schema_path_for(path: str | Path) -> Path:
    """Conventional sidecar location: ``x.csv`` -> ``x.schema.json``."""
    p = Path(path)
    return p.with_name(p.stem + ".schema.json")


def renamed(col: ColumnSchema, **changes) -> ColumnSchema:
    return replace(col, **changes)
