"""BTS On-Time Performance extracts -> cleaned 30-column flight table.

Local HHMM clock readings are anchored to calendar days by matching each
reading against the duration that links it to an earlier event (scheduled
departure + scheduled elapsed -> scheduled arrival, actual departure + taxi
out -> wheels off, ...).  Candidate day offsets -1..+2 are tried and the one
closest to the anchor wins, which resolves overnight rollovers and the BTS
"2400" convention without special cases.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Mapping
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

import numpy as np

from .table import ColumnSchema, Table, select_columns

log = logging.getLogger(__name__)

DELAY_THRESHOLD_MIN = 15
DURATION_TOLERANCE_MIN = 1
_DAY_OFFSETS = (-1, 0, 1, 2)


class IngestError(ValueError):
    pass


# -- canonical flight schema -----------------------------------------------------
def _cat(name, nullable=False):
    return ColumnSchema(name, "categorical", nullable=nullable)


def _num(name, unit, nullable=False):
    return ColumnSchema(name, "numeric", unit=unit, nullable=nullable)


def _dt(name, nullable=False):
    return ColumnSchema(name, "datetime", nullable=nullable)


FLIGHT_SCHEMA: tuple[ColumnSchema, ...] = (
    _cat("carrier"),
    _cat("tail_number"),
    _cat("origin_id"),
    _cat("origin_icao"),
    _cat("origin_city"),
    _cat("origin_state_code"),
    _cat("origin_state_name"),
    _cat("dest_id"),
    _cat("dest_icao"),
    _cat("dest_city"),
    _cat("dest_state_code"),
    _cat("dest_state_name"),
    _cat("quarter"),
    _cat("day_of_week"),
    _dt("sched_dep_utc"),
    _dt("actual_dep_utc", True),
    _num("dep_delta_min", "min", True),
    _cat("dep_delay_label", True),
    _num("taxi_out_min", "min", True),
    _dt("wheels_off_utc", True),
    _dt("wheels_on_utc", True),
    _num("taxi_in_min", "min", True),
    _dt("sched_arr_utc"),
    _dt("actual_arr_utc", True),
    _num("arr_delta_min", "min", True),
    _cat("arr_delay_label", True),
    _num("sched_elapsed_min", "min"),
    _num("actual_elapsed_min", "min", True),
    _num("air_time_min", "min", True),
    _num("distance_miles", "miles", True),
)
FLIGHT_COLUMNS = [c.name for c in FLIGHT_SCHEMA]
_SCHEMA_BY_NAME = {c.name: c for c in FLIGHT_SCHEMA}

_IDENTITY = ["carrier", "tail_number", "origin_id", "dest_id"]
FRAMES: dict[str, list[str]] = {
    "utc_ts": _IDENTITY + [
        "sched_dep_utc", "actual_dep_utc", "wheels_off_utc", "wheels_on_utc",
        "sched_arr_utc", "actual_arr_utc",
    ],
    "utc_d": _IDENTITY + [
        "sched_dep_utc", "dep_delta_min", "taxi_out_min", "sched_elapsed_min",
        "actual_elapsed_min", "air_time_min",
    ],
    "utc_d_2": _IDENTITY + [
        "sched_dep_utc", "actual_dep_utc", "dep_delta_min", "taxi_out_min", "taxi_in_min",
        "sched_elapsed_min", "actual_elapsed_min", "air_time_min", "arr_delta_min",
    ],
}
VARIANTS = tuple(FRAMES)

PREDICTION_FEATURES = [
    "carrier", "tail_number", "origin_icao", "dest_icao", "quarter", "day_of_week",
    "sched_dep_utc", "actual_dep_utc", "dep_delta_min", "taxi_out_min", "wheels_off_utc",
    "sched_arr_utc", "sched_elapsed_min", "distance_miles",
]
PREDICTION_TARGET = "arr_delta_min"


def flight_column(name: str) -> ColumnSchema:
    return _SCHEMA_BY_NAME[name]


# -- raw BTS input -----------------------------------------------------------------
DEFAULT_RAW_MAPPING: dict[str, str] = {
    "FlightDate": "flight_date",
    "Reporting_Airline": "carrier",
    "Tail_Number": "tail_number",
    "OriginAirportID": "origin_id",
    "DestAirportID": "dest_id",
    "CRSDepTime": "crs_dep_hhmm",
    "DepTime": "dep_hhmm",
    "DepDelay": "dep_delay_min",
    "TaxiOut": "taxi_out_min",
    "WheelsOff": "wheels_off_hhmm",
    "WheelsOn": "wheels_on_hhmm",
    "TaxiIn": "taxi_in_min",
    "CRSArrTime": "crs_arr_hhmm",
    "ArrTime": "arr_hhmm",
    "ArrDelay": "arr_delay_min",
    "Cancelled": "cancelled",
    "Diverted": "diverted",
    "CRSElapsedTime": "sched_elapsed_min",
    "ActualElapsedTime": "actual_elapsed_min",
    "AirTime": "air_time_min",
    "Distance": "distance_miles",
}
_OPTIONAL_RAW = {"dep_delay_min", "arr_delay_min", "diverted"}

RAW_SCHEMA: tuple[ColumnSchema, ...] = (
    _cat("flight_date"),
    _cat("carrier", True),
    _cat("tail_number", True),
    _cat("origin_id", True),
    _cat("dest_id", True),
    _num("crs_dep_hhmm", None, True),
    _num("dep_hhmm", None, True),
    _num("dep_delay_min", "min", True),
    _num("taxi_out_min", "min", True),
    _num("wheels_off_hhmm", None, True),
    _num("wheels_on_hhmm", None, True),
    _num("taxi_in_min", "min", True),
    _num("crs_arr_hhmm", None, True),
    _num("arr_hhmm", None, True),
    _num("arr_delay_min", "min", True),
    _num("cancelled", None, True),
    _num("diverted", None, True),
    _num("sched_elapsed_min", "min", True),
    _num("actual_elapsed_min", "min", True),
    _num("air_time_min", "min", True),
    _num("distance_miles", "miles", True),
)


def read_raw_mapping(path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise IngestError(f"{path}: mapping must be a JSON object raw name -> canonical name")
    known = {c.name for c in RAW_SCHEMA}
    bad = sorted(v for v in obj.values() if v not in known)
    if bad:
        raise IngestError(f"{path}: unknown canonical name(s) {bad}")
    return dict(obj)


def _clean_id(text: str) -> str:
    text = text.strip()
    # numeric IDs sometimes arrive as "12478.0"
    if text.endswith(".0") and text[:-2].isdigit():
        return text[:-2]
    return text


def read_raw(path, mapping: Mapping[str, str] | None = None) -> Table:
    """Read a BTS-format CSV (extra columns ignored) into the raw schema."""
    mapping = dict(DEFAULT_RAW_MAPPING if mapping is None else mapping)
    path = Path(path)
    if not path.exists():
        raise IngestError(f"raw file not found: {path}")
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        pos = {}
        for raw_name, canon in mapping.items():
            if raw_name in header:
                pos[canon] = header.index(raw_name)
        absent = [c.name for c in RAW_SCHEMA if c.name not in pos and c.name not in _OPTIONAL_RAW]
        if absent:
            raise IngestError(f"{path}: raw columns missing for {absent}")
        data: dict[str, list] = {c.name: [] for c in RAW_SCHEMA}
        masks: dict[str, list] = {c.name: [] for c in RAW_SCHEMA}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            for col in RAW_SCHEMA:
                text = row[pos[col.name]].strip() if col.name in pos and pos[col.name] < len(row) else ""
                if text == "":
                    if col.name == "flight_date":
                        raise IngestError(f"{path}: row {lineno}: empty FlightDate")
                    data[col.name].append("" if col.kind == "categorical" else np.nan)
                    masks[col.name].append(True)
                    continue
                if col.kind == "categorical":
                    data[col.name].append(_clean_id(text) if col.name.endswith("_id") else text)
                else:
                    try:
                        data[col.name].append(float(text))
                    except ValueError:
                        raise IngestError(f"{path}: row {lineno}, column {col.name!r}: "
                                          f"not a number: {text!r}") from None
                masks[col.name].append(False)
    return Table(RAW_SCHEMA, data, masks)


# -- airport and route directories -------------------------------------------------
@dataclass(frozen=True)
class Airport:
    icao: str
    city: str
    state_code: str
    state_name: str
    tz_name: str


class AirportDirectory:
    """Airport ID -> lookup fields and IANA timezone."""

    COLUMNS = ("id", "icao", "city", "state_code", "state_name", "tz_name")

    def __init__(self, entries: Mapping[str, Airport]):
        self._entries = dict(entries)
        self._zones: dict[str, ZoneInfo] = {}
        for aid, a in self._entries.items():
            try:
                self._zones[aid] = ZoneInfo(a.tz_name)
            except (ZoneInfoNotFoundError, ValueError):
                raise IngestError(f"airport {aid}: unknown timezone {a.tz_name!r}") from None

    def __contains__(self, airport_id) -> bool:
        return airport_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __getitem__(self, airport_id) -> Airport:
        try:
            return self._entries[airport_id]
        except KeyError:
            raise IngestError(f"airport {airport_id!r} not in directory") from None

    def ids(self) -> list[str]:
        return sorted(self._entries)

    def zone(self, airport_id) -> ZoneInfo:
        self[airport_id]
        return self._zones[airport_id]

    def lookup(self, ids: np.ndarray, attr: str) -> np.ndarray:
        cache = {aid: getattr(self[aid], attr) for aid in set(ids.tolist())}
        return np.array([cache[a] for a in ids.tolist()], dtype=object)

    @classmethod
    def read(cls, path) -> "AirportDirectory":
        path = Path(path)
        if not path.exists():
            raise IngestError(f"airport directory not found: {path}")
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in cls.COLUMNS if c not in (reader.fieldnames or [])]
            if missing:
                raise IngestError(f"{path}: missing column(s) {missing}")
            entries = {}
            for row in reader:
                aid = _clean_id(row["id"])
                if aid in entries:
                    raise IngestError(f"{path}: duplicate airport id {aid}")
                entries[aid] = Airport(row["icao"], row["city"], row["state_code"],
                                       row["state_name"], row["tz_name"])
        return cls(entries)

    def write(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for aid in self.ids():
                a = self._entries[aid]
                w.writerow([aid, a.icao, a.city, a.state_code, a.state_name, a.tz_name])


class RouteDirectory:
    """Directed (origin ID, destination ID) pairs with their distance in miles."""

    COLUMNS = ("origin_id", "dest_id", "distance_miles")

    def __init__(self, distances: Mapping[tuple[str, str], float]):
        for pair, d in distances.items():
            if not d > 0:
                raise IngestError(f"route {pair}: distance must be positive, got {d}")
        self._dist = dict(distances)

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self._dist

    def __len__(self) -> int:
        return len(self._dist)

    @property
    def n_routes(self) -> int:
        return len(self._dist)

    def pairs(self) -> list[tuple[str, str]]:
        return sorted(self._dist)

    def distance(self, origin, dest) -> float:
        return self._dist[(origin, dest)]

    def contains(self, origins: np.ndarray, dests: np.ndarray) -> np.ndarray:
        return np.array([(o, d) in self._dist for o, d in zip(origins.tolist(), dests.tolist())], dtype=bool)

    def lookup(self, origins: np.ndarray, dests: np.ndarray) -> np.ndarray:
        """Distances, ``nan`` where the pair is unknown."""
        return np.array([self._dist.get((o, d), np.nan) for o, d in zip(origins.tolist(), dests.tolist())])

    @classmethod
    def read(cls, path) -> "RouteDirectory":
        path = Path(path)
        if not path.exists():
            raise IngestError(f"route directory not found: {path}")
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in cls.COLUMNS if c not in (reader.fieldnames or [])]
            if missing:
                raise IngestError(f"{path}: missing column(s) {missing}")
            return cls({(_clean_id(r["origin_id"]), _clean_id(r["dest_id"])): float(r["distance_miles"])
                        for r in reader})

    def write(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for (o, d) in self.pairs():
                dist = self._dist[(o, d)]
                w.writerow([o, d, int(dist) if float(dist).is_integer() else dist])


def build_route_directory(flights: Table, tolerance: float = 1.0) -> RouteDirectory:
    o, d = flights.values("origin_id"), flights.values("dest_id")
    dist, miss = flights.values("distance_miles"), flights.mask("distance_miles")
    seen: dict[tuple[str, str], float] = {}
    for a, b, x, m in zip(o.tolist(), d.tolist(), dist.tolist(), miss.tolist()):
        if m:
            continue
        prev = seen.setdefault((a, b), x)
        if abs(prev - x) > tolerance:
            raise IngestError(f"route {a}->{b}: conflicting distances {prev} and {x}")
    return RouteDirectory(seen)


# -- local <-> UTC ------------------------------------------------------------------
_EPOCH = datetime(1970, 1, 1)


def local_to_utc(naive_local: np.ndarray, zones: np.ndarray, directory_zones: Mapping[str, ZoneInfo]) -> np.ndarray:
    """Naive local epoch-seconds -> UTC epoch seconds.

    Offsets are looked up once per (zone, local hour); every zone in use
    changes offset on whole hours.  Ambiguous local times resolve to the
    first occurrence (``fold=0``).
    """
    naive_local = np.asarray(naive_local, dtype=np.int64)
    out = np.empty_like(naive_local)
    hours = naive_local // 3600
    for zname in np.unique(zones):
        sel = zones == zname
        tz = directory_zones[zname]
        uh, inv = np.unique(hours[sel], return_inverse=True)
        offs = np.array([int((_EPOCH + timedelta(hours=int(h))).replace(tzinfo=tz).utcoffset().total_seconds())
                         for h in uh], dtype=np.int64)
        out[sel] = naive_local[sel] - offs[inv]
    return out


def utc_to_local(epoch: np.ndarray, zones: np.ndarray, directory_zones: Mapping[str, ZoneInfo]) -> np.ndarray:
    """UTC epoch seconds -> naive local epoch seconds."""
    epoch = np.asarray(epoch, dtype=np.int64)
    out = np.empty_like(epoch)
    hours = epoch // 3600
    for zname in np.unique(zones):
        sel = zones == zname
        tz = directory_zones[zname]
        uh, inv = np.unique(hours[sel], return_inverse=True)
        offs = np.array([int(datetime.fromtimestamp(int(h) * 3600, tz).utcoffset().total_seconds())
                         for h in uh], dtype=np.int64)
        out[sel] = epoch[sel] + offs[inv]
    return out


def _zone_keys(ids: np.ndarray, airports: AirportDirectory) -> tuple[np.ndarray, dict]:
    names = np.array([airports[a].tz_name for a in ids.tolist()], dtype=object)
    zones = {n: ZoneInfo(n) for n in set(names.tolist())}
    return names, zones


def _hhmm_minutes(hhmm: np.ndarray, mask: np.ndarray, column: str) -> np.ndarray:
    v = np.where(mask, 0, hhmm)
    if np.any((v != np.round(v)) | (v < 0) | (v > 2400) | ((v % 100) >= 60)):
        bad = np.flatnonzero((v != np.round(v)) | (v < 0) | (v > 2400) | ((v % 100) >= 60))[0]
        raise IngestError(f"row {bad}: {column} holds an invalid HHMM value {hhmm[bad]!r}")
    v = v.astype(np.int64)
    return (v // 100) * 60 + v % 100


def _anchor_reading(date_days, minutes, zones, zmap, anchor, duration, known_duration):
    """Pick the day offset whose UTC time is closest to ``anchor + duration``.

    With an unknown duration the earliest candidate not before the anchor is
    taken.  Returns UTC seconds and a flag for rows with no admissible
    candidate.
    """
    n = len(minutes)
    cands = np.empty((len(_DAY_OFFSETS), n), dtype=np.int64)
    for k, off in enumerate(_DAY_OFFSETS):
        naive = (date_days + off) * 86400 + minutes * 60
        cands[k] = local_to_utc(naive, zones, zmap) if n else naive
    target = anchor + np.round(np.where(known_duration, np.nan_to_num(duration), 0.0) * 60).astype(np.int64)
    gap = np.abs(cands - target[None, :])
    best = cands[np.argmin(gap, axis=0), np.arange(n)]
    ahead = np.where(cands >= anchor[None, :], cands, np.iinfo(np.int64).max)
    first = ahead.min(axis=0)
    failed = ~known_duration & (first == np.iinfo(np.int64).max)
    return np.where(known_duration, best, first), failed


def localize_and_convert(raw: Table, airports: AirportDirectory) -> Table:
    """Turn local HHMM clock readings into UTC datetimes.

    Output columns: identities, the six UTC timestamps, the raw durations,
    distance and the cancelled/diverted flags.
    """
    n = raw.n_rows
    for name in ("origin_id", "dest_id"):
        ids = raw.observed(name)
        unknown = sorted(set(ids.tolist()) - set(airports.ids()))
        if unknown:
            raise IngestError(f"{name}: airport(s) {unknown[:5]} missing from the directory")
    try:
        days = np.array([date.fromisoformat(s).toordinal() - date(1970, 1, 1).toordinal()
                         for s in raw.values("flight_date").tolist()], dtype=np.int64)
    except ValueError as exc:
        raise IngestError(f"flight_date: {exc}") from None

    # rows missing an airport cannot be localized; they are dropped later
    has_ids = ~(raw.mask("origin_id") | raw.mask("dest_id"))
    fallback = airports.ids()[0] if len(airports) else ""
    o_ids = np.where(has_ids, raw.values("origin_id"), fallback)
    d_ids = np.where(has_ids, raw.values("dest_id"), fallback)
    oz, ozmap = _zone_keys(o_ids, airports)
    dz, dzmap = _zone_keys(d_ids, airports)

    def mins(col):
        return _hhmm_minutes(raw.values(col), raw.mask(col), col), raw.mask(col)

    def dur(col):
        return raw.values(col), ~raw.mask(col)

    flag = lambda c: (raw.values(c) == 1) & ~raw.mask(c)  # noqa: E731
    cancelled = flag("cancelled")
    diverted = flag("diverted")

    crs_dep, crs_dep_miss = mins("crs_dep_hhmm")
    sched_dep = local_to_utc(days * 86400 + crs_dep * 60, oz, ozmap)

    crs_arr, crs_arr_miss = mins("crs_arr_hhmm")
    se, se_known = dur("sched_elapsed_min")
    sched_arr, bad_sa = _anchor_reading(days, crs_arr, dz, dzmap, sched_dep, se, se_known)

    dep, dep_miss = mins("dep_hhmm")
    dd, dd_known = dur("dep_delay_min")
    actual_dep, _ = _anchor_reading(days, dep, oz, ozmap, sched_dep, dd, np.ones(n, bool))
    if dd_known.any():
        with_delay, _ = _anchor_reading(days, dep, oz, ozmap, sched_dep, dd, dd_known)
        actual_dep = np.where(dd_known, with_delay, actual_dep)

    wo, wo_miss = mins("wheels_off_hhmm")
    to, to_known = dur("taxi_out_min")
    wheels_off, bad_wo = _anchor_reading(days, wo, oz, ozmap, actual_dep, to, to_known)

    won, won_miss = mins("wheels_on_hhmm")
    at, at_known = dur("air_time_min")
    wheels_on, bad_won = _anchor_reading(days, won, dz, dzmap, wheels_off, at, at_known)

    arr, arr_miss = mins("arr_hhmm")
    ti, ti_known = dur("taxi_in_min")
    actual_arr, bad_aa = _anchor_reading(days, arr, dz, dzmap, wheels_on, ti, ti_known)

    m_dep = dep_miss | cancelled
    m_wo = wo_miss | m_dep | cancelled
    m_won = won_miss | m_wo | cancelled | diverted
    m_arr = arr_miss | m_won
    neg = (bad_sa & ~crs_arr_miss) | (bad_wo & ~m_wo) | (bad_won & ~m_won) | (bad_aa & ~m_arr)
    if np.any(neg & has_ids & ~crs_dep_miss):
        row = int(np.flatnonzero(neg & has_ids & ~crs_dep_miss)[0])
        raise IngestError(f"row {row}: negative inferred duration for every candidate day offset")

    # actual-side durations only exist when the flight operated
    def dur_col(c, extra):
        return raw.values(c), raw.mask(c) | extra

    cols = {
        "carrier": raw.values("carrier"),
        "tail_number": raw.values("tail_number"),
        "origin_id": raw.values("origin_id"),
        "dest_id": raw.values("dest_id"),
        "sched_dep_utc": sched_dep,
        "actual_dep_utc": actual_dep,
        "wheels_off_utc": wheels_off,
        "wheels_on_utc": wheels_on,
        "sched_arr_utc": sched_arr,
        "actual_arr_utc": actual_arr,
    }
    masks = {
        "carrier": raw.mask("carrier"),
        "tail_number": raw.mask("tail_number"),
        "origin_id": raw.mask("origin_id"),
        "dest_id": raw.mask("dest_id"),
        "sched_dep_utc": crs_dep_miss,
        "actual_dep_utc": m_dep,
        "wheels_off_utc": m_wo,
        "wheels_on_utc": m_won,
        "sched_arr_utc": crs_arr_miss,
        "actual_arr_utc": m_arr,
    }
    for c, extra in (("taxi_out_min", m_wo), ("taxi_in_min", m_arr), ("sched_elapsed_min", np.zeros(n, bool)),
                     ("actual_elapsed_min", m_arr), ("air_time_min", m_won), ("distance_miles", np.zeros(n, bool))):
        cols[c], masks[c] = dur_col(c, extra)
    cols["cancelled"], cols["diverted"] = cancelled, diverted
    schema = [
        _cat("carrier", True), _cat("tail_number", True), _cat("origin_id", True), _cat("dest_id", True),
        _dt("sched_dep_utc", True), _dt("actual_dep_utc", True), _dt("wheels_off_utc", True),
        _dt("wheels_on_utc", True), _dt("sched_arr_utc", True), _dt("actual_arr_utc", True),
        _num("taxi_out_min", "min", True), _num("taxi_in_min", "min", True),
        _num("sched_elapsed_min", "min", True), _num("actual_elapsed_min", "min", True),
        _num("air_time_min", "min", True), _num("distance_miles", "miles", True),
        ColumnSchema("cancelled", "boolean"), ColumnSchema("diverted", "boolean"),
    ]
    return Table(schema, cols, masks, n_rows=n)


# -- feature engineering ------------------------------------------------------------
@dataclass
class IngestReport:
    raw_rows: int = 0
    dropped_missing_identity: int = 0
    dropped_inconsistent: dict = field(default_factory=dict)
    cancelled_rows: int = 0
    diverted_rows: int = 0
    output_rows: int = 0
    airports: int = 0
    routes: int = 0

    def to_json(self) -> dict:
        return asdict(self)


def delay_label(delta_min: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.where(~mask & (delta_min >= DELAY_THRESHOLD_MIN), "1", "0").astype(object)


def calendar_fields(sched_dep_utc: np.ndarray, origin_ids: np.ndarray, airports: AirportDirectory):
    """Quarter and ISO day of week (Monday = 1) of the origin-local
    scheduled departure, as category strings."""
    zones, zmap = _zone_keys(origin_ids, airports)
    local_days = utc_to_local(sched_dep_utc, zones, zmap) // 86400
    # 1970-01-01 was a Thursday (ISO 4)
    dow = (local_days + 3) % 7 + 1
    months = local_days.astype("datetime64[D]").astype("datetime64[M]").astype(np.int64) % 12 + 1
    quarter = (months - 1) // 3 + 1
    return quarter.astype(str).astype(object), dow.astype(str).astype(object)


def _minutes_between(later: np.ndarray, earlier: np.ndarray) -> np.ndarray:
    return (later - earlier) / 60.0


def engineer_features(flights: Table, airports: AirportDirectory,
                      report: IngestReport | None = None) -> Table:
    """Build the 30-column flight table from UTC-normalized flights.

    Rows missing an identity field are dropped.  Durations are checked
    against the timestamps (tolerance one minute); rows beyond tolerance are
    dropped and counted per check, survivors take the timestamp-derived
    durations so every identity holds exactly.
    """
    report = report if report is not None else IngestReport()
    report.raw_rows = report.raw_rows or flights.n_rows
    ident = np.zeros(flights.n_rows, bool)
    for c in ("carrier", "tail_number", "origin_id", "dest_id", "sched_dep_utc", "sched_arr_utc"):
        ident |= flights.mask(c)
    report.dropped_missing_identity += int(ident.sum())
    t = flights.take(~ident)

    v, m = t.values, t.mask
    checks = {
        "sched_elapsed": ("sched_arr_utc", "sched_dep_utc", "sched_elapsed_min"),
        "taxi_out": ("wheels_off_utc", "actual_dep_utc", "taxi_out_min"),
        "air_time": ("wheels_on_utc", "wheels_off_utc", "air_time_min"),
        "taxi_in": ("actual_arr_utc", "wheels_on_utc", "taxi_in_min"),
        "actual_elapsed": ("actual_arr_utc", "actual_dep_utc", "actual_elapsed_min"),
    }
    bad_any = np.zeros(t.n_rows, bool)
    for key, (late, early, dur) in checks.items():
        live = ~(m(late) | m(early) | m(dur))
        gap = np.abs(_minutes_between(v(late), v(early)) - np.where(live, v(dur), 0.0))
        bad = live & (gap > DURATION_TOLERANCE_MIN) & ~bad_any
        report.dropped_inconsistent[key] = report.dropped_inconsistent.get(key, 0) + int(bad.sum())
        bad_any |= bad
    t = t.take(~bad_any)
    v, m = t.values, t.mask
    report.cancelled_rows += int(v("cancelled").sum())
    report.diverted_rows += int(v("diverted").sum())

    o, d = v("origin_id"), v("dest_id")
    quarter, dow = calendar_fields(v("sched_dep_utc"), o, airports)
    cols, masks = {}, {}
    cols["carrier"], cols["tail_number"], cols["origin_id"], cols["dest_id"] = \
        v("carrier"), v("tail_number"), o, d
    for side, ids in (("origin", o), ("dest", d)):
        for attr in ("icao", "city", "state_code", "state_name"):
            cols[f"{side}_{attr}"] = airports.lookup(ids, attr)
    cols["quarter"], cols["day_of_week"] = quarter, dow
    for c in ("sched_dep_utc", "actual_dep_utc", "wheels_off_utc", "wheels_on_utc",
              "sched_arr_utc", "actual_arr_utc"):
        cols[c], masks[c] = v(c), m(c)

    def derived(late, early):
        mm = m(late) | m(early)
        return np.where(mm, np.nan, _minutes_between(v(late), v(early))), mm

    cols["dep_delta_min"], masks["dep_delta_min"] = derived("actual_dep_utc", "sched_dep_utc")
    cols["arr_delta_min"], masks["arr_delta_min"] = derived("actual_arr_utc", "sched_arr_utc")
    cols["taxi_out_min"], masks["taxi_out_min"] = derived("wheels_off_utc", "actual_dep_utc")
    cols["air_time_min"], masks["air_time_min"] = derived("wheels_on_utc", "wheels_off_utc")
    cols["taxi_in_min"], masks["taxi_in_min"] = derived("actual_arr_utc", "wheels_on_utc")
    cols["sched_elapsed_min"], _ = derived("sched_arr_utc", "sched_dep_utc")
    cols["actual_elapsed_min"], masks["actual_elapsed_min"] = derived("actual_arr_utc", "actual_dep_utc")
    for side in ("dep", "arr"):
        cols[f"{side}_delay_label"] = delay_label(cols[f"{side}_delta_min"], masks[f"{side}_delta_min"])
        masks[f"{side}_delay_label"] = masks[f"{side}_delta_min"]
    cols["distance_miles"], masks["distance_miles"] = v("distance_miles"), m("distance_miles")
    out = Table(FLIGHT_SCHEMA, cols, masks, n_rows=t.n_rows)
    report.output_rows = out.n_rows
    return out


def build_frame(flights: Table, variant: str) -> Table:
    """Project onto the generator input columns of ``variant``."""
    if variant not in FRAMES:
        raise IngestError(f"unknown frame variant {variant!r}; choose from {list(FRAMES)}")
    absent = [c for c in FRAMES[variant] if c not in flights]
    if absent:
        raise IngestError(f"frame {variant}: source column(s) missing {absent}")
    return select_columns(flights, FRAMES[variant])


def ingest(raw_path, airports: AirportDirectory, mapping: Mapping[str, str] | None = None):
    """Full ingest: returns (flights, routes, report)."""
    raw = read_raw(raw_path, mapping)
    report = IngestReport(raw_rows=raw.n_rows)
    flights = engineer_features(localize_and_convert(raw, airports), airports, report)
    routes = build_route_directory(flights)
    report.routes = routes.n_routes
    report.airports = len(set(flights.values("origin_id").tolist()) | set(flights.values("dest_id").tolist()))
    log.info("ingest: %d raw rows -> %d flights, %d routes", report.raw_rows, report.output_rows, report.routes)
    return flights, routes, report
