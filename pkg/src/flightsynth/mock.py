"""Deterministic BTS-like flight extract for self-contained runs.

The corpus is shaped like a January New-York-state extract: eight NY
airports linked to hubs across six US timezones plus Honolulu and San Juan,
a handful of carriers each owning its own tails, about one in five
departures delayed, ~2% cancellations and a few rows without a tail number.
Output uses the raw BTS column names so it exercises the real ingest path.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import Airport, AirportDirectory, local_to_utc, utc_to_local
from .numkit import rng_stream


@dataclass(frozen=True)
class _Site:
    id: str
    icao: str
    city: str
    state_code: str
    state_name: str
    tz: str
    lat: float
    lon: float


_SITES = [
    _Site("12478", "KJFK", "New York", "NY", "New York", "America/New_York", 40.64, -73.78),
    _Site("12953", "KLGA", "New York", "NY", "New York", "America/New_York", 40.78, -73.87),
    _Site("10792", "KBUF", "Buffalo", "NY", "New York", "America/New_York", 42.94, -78.73),
    _Site("14307", "KROC", "Rochester", "NY", "New York", "America/New_York", 43.12, -77.67),
    _Site("15249", "KSYR", "Syracuse", "NY", "New York", "America/New_York", 43.11, -76.11),
    _Site("10257", "KALB", "Albany", "NY", "New York", "America/New_York", 42.75, -73.80),
    _Site("12391", "KHPN", "White Plains", "NY", "New York", "America/New_York", 41.07, -73.71),
    _Site("12197", "KISP", "Islip", "NY", "New York", "America/New_York", 40.80, -73.10),
    _Site("10397", "KATL", "Atlanta", "GA", "Georgia", "America/New_York", 33.64, -84.43),
    _Site("13930", "KORD", "Chicago", "IL", "Illinois", "America/Chicago", 41.98, -87.90),
    _Site("11298", "KDFW", "Dallas/Fort Worth", "TX", "Texas", "America/Chicago", 32.90, -97.04),
    _Site("11292", "KDEN", "Denver", "CO", "Colorado", "America/Denver", 39.86, -104.67),
    _Site("14107", "KPHX", "Phoenix", "AZ", "Arizona", "America/Phoenix", 33.43, -112.01),
    _Site("12892", "KLAX", "Los Angeles", "CA", "California", "America/Los_Angeles", 33.94, -118.41),
    _Site("14771", "KSFO", "San Francisco", "CA", "California", "America/Los_Angeles", 37.62, -122.38),
    _Site("14747", "KSEA", "Seattle", "WA", "Washington", "America/Los_Angeles", 47.45, -122.31),
    _Site("13204", "KMCO", "Orlando", "FL", "Florida", "America/New_York", 28.43, -81.31),
    _Site("11697", "KFLL", "Fort Lauderdale", "FL", "Florida", "America/New_York", 26.07, -80.15),
    _Site("13303", "KMIA", "Miami", "FL", "Florida", "America/New_York", 25.80, -80.29),
    _Site("10721", "KBOS", "Boston", "MA", "Massachusetts", "America/New_York", 42.36, -71.01),
    _Site("11057", "KCLT", "Charlotte", "NC", "North Carolina", "America/New_York", 35.21, -80.94),
    _Site("11433", "KDTW", "Detroit", "MI", "Michigan", "America/Detroit", 42.21, -83.35),
    _Site("13487", "KMSP", "Minneapolis", "MN", "Minnesota", "America/Chicago", 44.88, -93.22),
    _Site("12173", "PHNL", "Honolulu", "HI", "Hawaii", "Pacific/Honolulu", 21.32, -157.92),
    _Site("14843", "TJSJ", "San Juan", "PR", "Puerto Rico", "America/Puerto_Rico", 18.44, -66.00),
]
_BY_CODE = {s.icao[1:] if s.icao.startswith("K") else s.icao: s for s in _SITES}

# undirected city pairs, each flown in both directions, with carriers
_PAIRS = [
    ("JFK", "LAX", ("AA", "DL", "B6")), ("JFK", "SFO", ("UA", "B6")), ("JFK", "MIA", ("AA",)),
    ("JFK", "FLL", ("B6",)), ("JFK", "MCO", ("B6", "DL")), ("JFK", "ATL", ("DL",)),
    ("JFK", "SEA", ("DL",)), ("JFK", "PHNL", ("HA",)), ("JFK", "TJSJ", ("B6",)),
    ("JFK", "BUF", ("9E",)), ("LGA", "ORD", ("AA", "UA")), ("LGA", "ATL", ("DL",)),
    ("LGA", "DFW", ("AA",)), ("LGA", "DEN", ("UA", "WN")), ("LGA", "CLT", ("AA",)),
    ("LGA", "DTW", ("DL",)), ("LGA", "BOS", ("DL", "AA")), ("BUF", "MCO", ("WN", "B6")),
    ("ROC", "ATL", ("DL",)), ("SYR", "CLT", ("AA",)), ("ALB", "MCO", ("WN",)),
    ("HPN", "FLL", ("B6",)), ("ISP", "MCO", ("WN",)), ("JFK", "PHX", ("AA",)),
    ("LGA", "MSP", ("DL",)),
]
_TAILS_PER_CARRIER = 20
_CRUISE_MPH = 460.0

BTS_HEADER = [
    "Year", "Quarter", "Month", "DayofMonth", "FlightDate", "Reporting_Airline", "Tail_Number",
    "Flight_Number_Reporting_Airline", "OriginAirportID", "Origin", "DestAirportID", "Dest",
    "CRSDepTime", "DepTime", "DepDelay", "TaxiOut", "WheelsOff", "WheelsOn", "TaxiIn",
    "CRSArrTime", "ArrTime", "ArrDelay", "Cancelled", "Diverted", "CRSElapsedTime",
    "ActualElapsedTime", "AirTime", "Distance",
]


def mock_airports() -> AirportDirectory:
    return AirportDirectory({s.id: Airport(s.icao, s.city, s.state_code, s.state_name, s.tz) for s in _SITES})


def great_circle_miles(a: _Site, b: _Site) -> float:
    p1, p2 = math.radians(a.lat), math.radians(b.lat)
    dl = math.radians(b.lon - a.lon)
    h = math.sin((p2 - p1) / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 3958.8 * 2 * math.asin(math.sqrt(h))


def mock_routes() -> list[tuple[_Site, _Site, str, float]]:
    """Directed (origin, dest, carrier, miles) services."""
    out = []
    for a, b, carriers in _PAIRS:
        sa, sb = _BY_CODE[a], _BY_CODE[b]
        miles = float(round(great_circle_miles(sa, sb)))
        for c in carriers:
            out.append((sa, sb, c, miles))
            out.append((sb, sa, c, miles))
    return out


def _hhmm(local_seconds: np.ndarray, use_2400: bool) -> list[str]:
    minutes = (local_seconds % 86400) // 60
    out = []
    for m in minutes.tolist():
        if m == 0 and use_2400:
            out.append("2400")
        else:
            out.append(f"{m // 60:02d}{m % 60:02d}")
    return out


def generate_mock(rows: int, seed: int = 0) -> list[list[str]]:
    """Rows of a BTS-format extract (header excluded)."""
    if rows < 1:
        raise ValueError("rows must be >= 1")
    rng = rng_stream(seed, 0)
    services = mock_routes()
    carriers = sorted({s[2] for s in services})
    tails = {c: [f"N{100 + 37 * i + 11 * k:03d}{c[-1]}{'QXZ'[i % 3]}" for i in range(_TAILS_PER_CARRIER)]
             for k, c in enumerate(carriers)}
    # each service gets 1-5 daily slots with fixed local departure times
    slots = []
    for si, (o, d, c, miles) in enumerate(services):
        k = 1 + int(rng.integers(0, 5))
        minutes = np.sort(rng.integers(6 * 12, 23 * 12 + 6, size=k)) * 5
        for m in minutes.tolist():
            slots.append((si, int(m)))
    pick = rng.integers(0, len(slots), size=rows)
    day = rng.integers(0, 31, size=rows)  # January 2023
    day0 = 19358  # 2023-01-01 in days since epoch

    si = np.array([slots[p][0] for p in pick])
    dep_local_min = np.array([slots[p][1] for p in pick], dtype=np.int64)
    origin = np.array([services[s][0].id for s in si], dtype=object)
    dest = np.array([services[s][1].id for s in si], dtype=object)
    carrier = np.array([services[s][2] for s in si], dtype=object)
    miles = np.array([services[s][3] for s in si])
    sites = {s.id: s for s in _SITES}
    directory = mock_airports()
    zmap = {s.tz: directory.zone(s.id) for s in _SITES}
    oz = np.array([sites[x].tz for x in origin], dtype=object)
    dz = np.array([sites[x].tz for x in dest], dtype=object)

    sched_dep = local_to_utc((day0 + day) * 86400 + dep_local_min * 60, oz, zmap)
    sched_elapsed = np.round((miles / _CRUISE_MPH * 60 + 45) / 5) * 5
    delayed = rng.random(rows) < 0.2
    dep_delay = np.where(delayed, 15 + np.round(rng.exponential(40, rows)),
                         np.clip(np.round(rng.normal(-4, 5, rows)), -15, 14))
    taxi_out = 10 + np.round(rng.gamma(2.0, 4.0, rows))
    speed = np.clip(rng.normal(440, 25, rows), 360, 520)
    air_time = np.round(miles / speed * 60) + 6
    taxi_in = 4 + np.round(rng.gamma(2.0, 2.5, rows))
    actual_elapsed = taxi_out + air_time + taxi_in
    arr_delay = dep_delay + actual_elapsed - sched_elapsed

    actual_dep = sched_dep + (dep_delay * 60).astype(np.int64)
    wheels_off = actual_dep + (taxi_out * 60).astype(np.int64)
    wheels_on = wheels_off + (air_time * 60).astype(np.int64)
    actual_arr = wheels_on + (taxi_in * 60).astype(np.int64)
    sched_arr = sched_dep + (sched_elapsed * 60).astype(np.int64)

    loc = {
        "CRSDepTime": (utc_to_local(sched_dep, oz, zmap), False),
        "DepTime": (utc_to_local(actual_dep, oz, zmap), True),
        "WheelsOff": (utc_to_local(wheels_off, oz, zmap), True),
        "WheelsOn": (utc_to_local(wheels_on, dz, zmap), True),
        "CRSArrTime": (utc_to_local(sched_arr, dz, zmap), False),
        "ArrTime": (utc_to_local(actual_arr, dz, zmap), True),
    }
    hhmm = {k: _hhmm(v, use_2400) for k, (v, use_2400) in loc.items()}
    cancelled = rng.random(rows) < 0.02
    no_tail = rng.random(rows) < 0.005
    tail_pick = rng.integers(0, _TAILS_PER_CARRIER, size=rows)
    flight_no = rng.integers(100, 3000, size=rows)

    out = []
    for i in range(rows):
        d = day0 + int(day[i])
        ymd = np.datetime64(d, "D").astype(str)
        o, de = sites[origin[i]], sites[dest[i]]
        c = bool(cancelled[i])

        def act(key):
            return "" if c else hhmm[key][i]

        def num(x):
            return "" if c else f"{x:.2f}"

        out.append([
            "2023", "1", "1", str(int(day[i]) + 1), ymd, carrier[i],
            "" if no_tail[i] else tails[carrier[i]][tail_pick[i]],
            str(flight_no[i]), o.id, o.icao[-3:], de.id, de.icao[-3:],
            hhmm["CRSDepTime"][i], act("DepTime"), num(dep_delay[i]), num(taxi_out[i]),
            act("WheelsOff"), act("WheelsOn"), num(taxi_in[i]),
            hhmm["CRSArrTime"][i], act("ArrTime"), num(arr_delay[i]),
            "1.00" if c else "0.00", "0.00", f"{sched_elapsed[i]:.2f}",
            num(actual_elapsed[i]), num(air_time[i]), f"{miles[i]:.2f}",
        ])
    return out


def write_mock(out_dir, rows: int, seed: int = 0) -> tuple[Path, Path]:
    """Write ``bts_mock.csv`` and ``airports.csv``; returns both paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    raw = out_dir / "bts_mock.csv"
    with open(raw, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BTS_HEADER)
        w.writerows(generate_mock(rows, seed))
    airports = out_dir / "airports.csv"
    mock_airports().write(airports)
    return raw, airports
