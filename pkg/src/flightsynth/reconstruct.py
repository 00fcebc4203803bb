"""Rebuild the 30-column flight table from a generated frame, then drop
rows with unknown routes or physically inconsistent times.

Every derived timestamp or duration comes from the frame's own columns
through fixed identities, so the identities hold exactly on the output.
A derived cell is missing whenever one of its inputs is missing.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ingest import (
    FLIGHT_SCHEMA, FRAMES, AirportDirectory, RouteDirectory, calendar_fields, delay_label,
)
from .table import Table, select_columns, write_table

log = logging.getLogger(__name__)

FILTER_ORDER = ("non_negative", "elapsed_consistency", "speed")
UNKNOWN = "?"


class ReconstructError(ValueError):
    pass


@dataclass
class FilterConfig:
    active: tuple[str, ...] = FILTER_ORDER
    elapsed_tolerance_min: float = 5.0
    speed_band_mph: tuple[float, float] = (100.0, 700.0)

    def __post_init__(self):
        self.active = tuple(self.active)
        unknown = set(self.active) - set(FILTER_ORDER)
        if unknown:
            raise ReconstructError(f"unknown filter(s) {sorted(unknown)}; choose from {list(FILTER_ORDER)}")
        lo, hi = self.speed_band_mph
        if not 0 <= lo < hi:
            raise ReconstructError("speed band must satisfy 0 <= low < high")
        if self.elapsed_tolerance_min < 0:
            raise ReconstructError("elapsed tolerance must be >= 0")


@dataclass
class CleaningReport:
    input_rows: int = 0
    route_rejected: int = 0
    filters: dict = field(default_factory=dict)
    output_rows: int = 0

    @property
    def balanced(self) -> bool:
        return self.input_rows == self.output_rows + self.route_rejected + sum(self.filters.values())

    def to_json(self) -> dict:
        out = asdict(self)
        out["balanced"] = self.balanced
        return out

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")


# -- reconstruction -------------------------------------------------------------------
class _Cols:
    """Column values plus masks with arithmetic that propagates missingness."""

    def __init__(self, frame: Table):
        self.v: dict[str, np.ndarray] = {}
        self.m: dict[str, np.ndarray] = {}
        for name in frame.names:
            self.v[name] = frame.values(name)
            self.m[name] = frame.mask(name)

    def set(self, name, values, mask):
        self.v[name] = values
        self.m[name] = mask

    def shift(self, out, ts, minutes, sign=1):
        """``out = ts + sign * minutes`` as epoch seconds."""
        mask = self.m[ts] | self.m[minutes]
        mins = np.where(mask, 0.0, self.v[minutes])
        secs = np.rint(mins * 60.0).astype(np.int64)
        self.set(out, np.where(mask, 0, self.v[ts] + sign * secs), mask)
        # keep the duration in step with the whole-second shift actually applied
        self.v[minutes] = np.where(mask, self.v[minutes], secs / 60.0)

    def gap(self, out, late, early):
        """``out = (late - early)`` in minutes."""
        mask = self.m[late] | self.m[early]
        self.set(out, np.where(mask, np.nan, (self.v[late] - self.v[early]) / 60.0), mask)

    def combine(self, out, a, b, c, sign_b=-1, sign_c=-1):
        mask = self.m[a] | self.m[b] | self.m[c]
        val = self.v[a] + sign_b * self.v[b] + sign_c * self.v[c]
        self.set(out, np.where(mask, np.nan, val), mask)


def _lookup(airports: AirportDirectory, ids: np.ndarray, attr: str) -> np.ndarray:
    known = {a: getattr(airports[a], attr) for a in set(ids.tolist()) if a in airports}
    return np.array([known.get(a, UNKNOWN) for a in ids.tolist()], dtype=object)


def _calendar(sched_dep, origins, airports):
    known = np.array([o in airports for o in origins.tolist()], dtype=bool)
    quarter = np.empty(len(origins), dtype=object)
    dow = np.empty(len(origins), dtype=object)
    if known.any():
        q, d = calendar_fields(sched_dep[known], origins[known], airports)
        quarter[known], dow[known] = q, d
    if (~known).any():
        # unknown origin: calendar from UTC; the row fails route rejection anyway
        days = sched_dep[~known] // 86400
        dow[~known] = ((days + 3) % 7 + 1).astype(str)
        months = days.astype("datetime64[D]").astype("datetime64[M]").astype(np.int64) % 12 + 1
        quarter[~known] = ((months - 1) // 3 + 1).astype(str)
    return quarter, dow


def reconstruct(frame: Table, variant: str, airports: AirportDirectory, routes: RouteDirectory) -> Table:
    """Generated frame of ``variant`` -> 30-column flight table."""
    if variant not in FRAMES:
        raise ReconstructError(f"unknown variant {variant!r}; choose from {list(FRAMES)}")
    if sorted(frame.names) != sorted(FRAMES[variant]):
        missing = sorted(set(FRAMES[variant]) - set(frame.names))
        extra = sorted(set(frame.names) - set(FRAMES[variant]))
        raise ReconstructError(f"frame does not match variant {variant}: missing {missing}, unexpected {extra}")
    c = _Cols(frame)
    if variant == "utc_ts":
        c.gap("dep_delta_min", "actual_dep_utc", "sched_dep_utc")
        c.gap("arr_delta_min", "actual_arr_utc", "sched_arr_utc")
        c.gap("taxi_out_min", "wheels_off_utc", "actual_dep_utc")
        c.gap("air_time_min", "wheels_on_utc", "wheels_off_utc")
        c.gap("taxi_in_min", "actual_arr_utc", "wheels_on_utc")
        c.gap("sched_elapsed_min", "sched_arr_utc", "sched_dep_utc")
        c.gap("actual_elapsed_min", "actual_arr_utc", "actual_dep_utc")
    else:
        if variant == "utc_d":
            c.shift("actual_dep_utc", "sched_dep_utc", "dep_delta_min")
            c.combine("taxi_in_min", "actual_elapsed_min", "taxi_out_min", "air_time_min")
        c.shift("sched_arr_utc", "sched_dep_utc", "sched_elapsed_min")
        if variant == "utc_d":
            c.shift("actual_arr_utc", "actual_dep_utc", "actual_elapsed_min")
            c.gap("arr_delta_min", "actual_arr_utc", "sched_arr_utc")
        else:
            c.shift("actual_arr_utc", "sched_arr_utc", "arr_delta_min")
        c.shift("wheels_off_utc", "actual_dep_utc", "taxi_out_min")
        c.shift("wheels_on_utc", "actual_arr_utc", "taxi_in_min", sign=-1)

    for side in ("dep", "arr"):
        delta = f"{side}_delta_min"
        c.set(f"{side}_delay_label", delay_label(c.v[delta], c.m[delta]), c.m[delta].copy())
    o, d = c.v["origin_id"], c.v["dest_id"]
    unknown = sorted({a for a in set(o.tolist()) | set(d.tolist()) if a not in airports})
    if unknown:
        log.warning("reconstruct: %d airport id(s) not in the directory: %s", len(unknown), unknown[:10])
    for side, ids in (("origin", o), ("dest", d)):
        for attr in ("icao", "city", "state_code", "state_name"):
            c.set(f"{side}_{attr}", _lookup(airports, ids, attr), np.zeros(len(ids), bool))
    quarter, dow = _calendar(c.v["sched_dep_utc"], o, airports)
    c.set("quarter", quarter, np.zeros(len(o), bool))
    c.set("day_of_week", dow, np.zeros(len(o), bool))
    dist = routes.lookup(o, d)
    c.set("distance_miles", dist, np.isnan(dist))

    names = [s.name for s in FLIGHT_SCHEMA]
    return Table(FLIGHT_SCHEMA, {n: c.v[n] for n in names}, {n: c.m[n] for n in names}, n_rows=frame.n_rows)


# -- rejection / cleaning ---------------------------------------------------------------
def _observed(table: Table, name: str):
    return table.values(name), ~table.mask(name)


def filter_violations(table: Table, name: str, cfg: FilterConfig) -> np.ndarray:
    """Rows that fail filter ``name``.  Cells that are missing cannot be
    checked and never fail."""
    if name == "non_negative":
        bad = np.zeros(table.n_rows, bool)
        for col in ("taxi_out_min", "taxi_in_min", "air_time_min", "actual_elapsed_min"):
            v, ok = _observed(table, col)
            bad |= ok & (v < 0)
        return bad
    if name == "elapsed_consistency":
        parts = ("actual_elapsed_min", "taxi_out_min", "air_time_min", "taxi_in_min")
        ok = np.all([~table.mask(p) for p in parts], axis=0)
        v = {p: table.values(p) for p in parts}
        gap = np.abs(v["actual_elapsed_min"] - (v["taxi_out_min"] + v["air_time_min"] + v["taxi_in_min"]))
        return ok & (gap > cfg.elapsed_tolerance_min)
    if name == "speed":
        dist, ok_d = _observed(table, "distance_miles")
        air, ok_a = _observed(table, "air_time_min")
        ok = ok_d & ok_a
        lo, hi = cfg.speed_band_mph
        with np.errstate(divide="ignore", invalid="ignore"):
            speed = dist / (air / 60.0)
        # zero or negative air time gives no finite positive speed
        return ok & ~((air > 0) & (speed >= lo) & (speed <= hi))
    raise ReconstructError(f"unknown filter {name!r}")


def reject_invalid(table: Table, routes: RouteDirectory, cfg: FilterConfig | None = None):
    """Drop rows with routes outside the directory, then apply the active
    consistency filters in fixed order.

    Returns ``(cleaned, report, rejected_routes)``; the last is the table of
    rows dropped for an unknown route, kept for later inspection.
    """
    cfg = cfg or FilterConfig()
    report = CleaningReport(input_rows=table.n_rows)
    valid = routes.contains(table.values("origin_id"), table.values("dest_id"))
    rejected = table.take(~valid)
    report.route_rejected = int((~valid).sum())
    t = table.take(valid)
    for name in FILTER_ORDER:
        if name not in cfg.active:
            continue
        bad = filter_violations(t, name, cfg)
        report.filters[name] = int(bad.sum())
        t = t.take(~bad)
    report.output_rows = t.n_rows
    if not report.balanced:
        raise ReconstructError("cleaning report does not balance")
    log.info("clean: %d -> %d rows (%d unknown routes, filters %s)",
             report.input_rows, report.output_rows, report.route_rejected, report.filters)
    return t, report, rejected


def write_rejected(rejected: Table, path) -> None:
    """Rows dropped for an unknown route, as CSV (origin, dest first)."""
    lead = ["origin_id", "dest_id"]
    write_table(select_columns(rejected, lead + [n for n in rejected.names if n not in lead]), path)
