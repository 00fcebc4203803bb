import csv
from datetime import datetime, timezone
from zoneinfo import ZoneInfo

import numpy as np
import pytest

from flightsynth.ingest import (
    FLIGHT_COLUMNS, FRAMES, Airport, AirportDirectory, IngestError, RouteDirectory,
    build_frame, build_route_directory, engineer_features, ingest, localize_and_convert,
    read_raw,
)
from flightsynth.mock import BTS_HEADER, mock_airports, write_mock
from flightsynth.table import ColumnSchema, Table, parse_iso_utc

AIRPORTS = AirportDirectory({
    "100": Airport("KAAA", "Alpha", "NY", "New York", "America/New_York"),
    "200": Airport("KBBB", "Beta", "CA", "California", "America/Los_Angeles"),
    "300": Airport("KCCC", "Gamma", "HI", "Hawaii", "Pacific/Honolulu"),
})

FIELDS = ["FlightDate", "Reporting_Airline", "Tail_Number", "OriginAirportID", "DestAirportID",
          "CRSDepTime", "DepTime", "DepDelay", "TaxiOut", "WheelsOff", "WheelsOn", "TaxiIn",
          "CRSArrTime", "ArrTime", "Cancelled", "CRSElapsedTime", "ActualElapsedTime", "AirTime",
          "Distance"]


def _row(**kw):
    base = dict(FlightDate="2023-01-15", Reporting_Airline="AA", Tail_Number="N1",
                OriginAirportID="100", DestAirportID="200", CRSDepTime="1430", DepTime="1450",
                DepDelay="20", TaxiOut="15", WheelsOff="1505", WheelsOn="1650", TaxiIn="10",
                CRSArrTime="1730", ArrTime="1700", Cancelled="0", CRSElapsedTime="360",
                ActualElapsedTime="310", AirTime="285", Distance="2475")
    base.update(kw)
    return base


def _raw(tmp_path, rows):
    path = tmp_path / "raw.csv"
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, FIELDS)
        w.writeheader()
        w.writerows(rows)
    return read_raw(path)


def _utc(y, mo, d, h, mi, tz):
    return int(datetime(y, mo, d, h, mi, tzinfo=ZoneInfo(tz)).astimezone(timezone.utc).timestamp())


class TestLocalize:
    def test_hhmm_at_eastern(self, tmp_path):
        t = localize_and_convert(_raw(tmp_path, [_row()]), AIRPORTS)
        assert t.values("sched_dep_utc")[0] == parse_iso_utc("2023-01-15T19:30:00Z")
        assert t.values("sched_dep_utc")[0] == _utc(2023, 1, 15, 14, 30, "America/New_York")
        # arrival in Pacific time: 14:30 ET + 360 min = 17:30 PT
        assert t.values("sched_arr_utc")[0] == _utc(2023, 1, 15, 17, 30, "America/Los_Angeles")

    def test_overnight_rollover(self, tmp_path):
        row = _row(OriginAirportID="100", DestAirportID="100", CRSDepTime="2350", CRSArrTime="0110",
                   CRSElapsedTime="80", DepTime="2350", DepDelay="0", TaxiOut="10", WheelsOff="0000",
                   AirTime="60", WheelsOn="0100", TaxiIn="10", ArrTime="0110", ActualElapsedTime="80")
        t = localize_and_convert(_raw(tmp_path, [row]), AIRPORTS)
        assert t.values("sched_arr_utc")[0] == _utc(2023, 1, 16, 1, 10, "America/New_York")
        assert t.values("wheels_off_utc")[0] == _utc(2023, 1, 16, 0, 0, "America/New_York")
        assert (t.values("sched_arr_utc")[0] - t.values("sched_dep_utc")[0]) == 80 * 60

    def test_2400_means_midnight(self, tmp_path):
        row = _row(OriginAirportID="100", DestAirportID="100", CRSDepTime="2330", DepTime="2350",
                   DepDelay="20", TaxiOut="10", WheelsOff="2400", AirTime="60", WheelsOn="0100",
                   TaxiIn="10", ArrTime="0110", ActualElapsedTime="80", CRSArrTime="0050",
                   CRSElapsedTime="80")
        t = localize_and_convert(_raw(tmp_path, [row]), AIRPORTS)
        assert t.values("wheels_off_utc")[0] == _utc(2023, 1, 16, 0, 0, "America/New_York")

    def test_0000_same_day(self, tmp_path):
        row = _row(OriginAirportID="100", DestAirportID="100", CRSDepTime="0000", DepTime="0000",
                   DepDelay="0", TaxiOut="10", WheelsOff="0010", AirTime="30", WheelsOn="0040",
                   TaxiIn="5", ArrTime="0045", ActualElapsedTime="45", CRSArrTime="0050", CRSElapsedTime="50")
        t = localize_and_convert(_raw(tmp_path, [row]), AIRPORTS)
        assert t.values("sched_dep_utc")[0] == _utc(2023, 1, 15, 0, 0, "America/New_York")
        assert t.values("actual_dep_utc")[0] == _utc(2023, 1, 15, 0, 0, "America/New_York")

    def test_unknown_airport(self, tmp_path):
        with pytest.raises(IngestError, match="999"):
            localize_and_convert(_raw(tmp_path, [_row(DestAirportID="999")]), AIRPORTS)

    def test_bad_timezone(self):
        with pytest.raises(IngestError, match="Mars"):
            AirportDirectory({"1": Airport("X", "x", "x", "x", "Mars/Olympus")})


class TestEngineer:
    def _flights(self, tmp_path, rows):
        return engineer_features(localize_and_convert(_raw(tmp_path, rows), AIRPORTS), AIRPORTS)

    def test_labels_and_lookups(self, tmp_path):
        late = _row(ArrTime="1750", ActualElapsedTime="360", AirTime="335", WheelsOn="1740")
        early = _row(DepTime="1427", DepDelay="-3", WheelsOff="1442", WheelsOn="1627",
                     ArrTime="1637", CRSArrTime="1730")
        f = self._flights(tmp_path, [late, early])
        assert f.names == FLIGHT_COLUMNS
        assert f.values("arr_delta_min").tolist() == [20.0, -53.0]
        assert f.values("arr_delay_label").tolist() == ["1", "0"]
        assert f.values("dep_delta_min").tolist() == [20.0, -3.0]
        assert f.values("dep_delay_label").tolist() == ["1", "0"]
        assert f.values("origin_icao")[0] == "KAAA" and f.values("dest_state_name")[0] == "California"
        # 2023-01-15 was a Sunday
        assert f.values("day_of_week")[0] == "7" and f.values("quarter")[0] == "1"

    def test_local_day_of_week(self, tmp_path):
        # 23:30 in Honolulu on Jan 15 is already Jan 16 in UTC
        row = _row(OriginAirportID="300", DestAirportID="300", CRSDepTime="2330", DepTime="2330",
                   DepDelay="0", TaxiOut="10", WheelsOff="2340", AirTime="30", WheelsOn="0010",
                   TaxiIn="5", ArrTime="0015", ActualElapsedTime="45", CRSArrTime="0020", CRSElapsedTime="50")
        f = self._flights(tmp_path, [row])
        assert f.values("day_of_week")[0] == "7"

    def test_missing_tail_dropped(self, tmp_path):
        f = self._flights(tmp_path, [_row(), _row(Tail_Number="")])
        assert f.n_rows == 1

    def test_cancelled_kept_masked(self, tmp_path):
        c = _row(Cancelled="1", DepTime="", DepDelay="", TaxiOut="", WheelsOff="", WheelsOn="",
                 TaxiIn="", ArrTime="", ActualElapsedTime="", AirTime="")
        f = self._flights(tmp_path, [_row(), c])
        assert f.n_rows == 2
        for col in ("actual_arr_utc", "arr_delta_min", "arr_delay_label", "wheels_on_utc", "air_time_min"):
            assert f.mask(col).tolist() == [False, True]
        assert not f.mask("sched_arr_utc").any()

    def test_inconsistent_dropped_and_counted(self, tmp_path):
        from flightsynth.ingest import IngestReport
        rep = IngestReport()
        bad = _row(CRSElapsedTime="300")
        engineer_features(localize_and_convert(_raw(tmp_path, [_row(), bad]), AIRPORTS), AIRPORTS, rep)
        assert rep.dropped_inconsistent["sched_elapsed"] == 1 and rep.output_rows == 1


@pytest.fixture(scope="module")
def mock_flights(tmp_path_factory):
    d = tmp_path_factory.mktemp("mock")
    raw, ap = write_mock(d, 3000, seed=11)
    return ingest(raw, AirportDirectory.read(ap))


class TestMockCorpus:
    def test_shape_and_report(self, mock_flights):
        flights, routes, rep = mock_flights
        assert flights.shape[1] == 30
        assert rep.raw_rows == rep.output_rows + rep.dropped_missing_identity + sum(rep.dropped_inconsistent.values())
        assert rep.cancelled_rows > 0 and routes.n_routes >= 40

    def test_schedule_identities(self, mock_flights):
        f = mock_flights[0]
        v = f.values
        assert np.array_equal((v("sched_arr_utc") - v("sched_dep_utc")) / 60, v("sched_elapsed_min"))
        live = ~f.mask("actual_elapsed_min")
        total = v("taxi_out_min") + v("air_time_min") + v("taxi_in_min")
        assert np.array_equal(total[live], v("actual_elapsed_min")[live])
        assert np.array_equal(((v("actual_arr_utc") - v("sched_arr_utc")) / 60)[live], v("arr_delta_min")[live])

    def test_label_rule(self, mock_flights):
        f = mock_flights[0]
        for side in ("dep", "arr"):
            live = ~f.mask(f"{side}_delta_min")
            lab = f.values(f"{side}_delay_label")[live] == "1"
            assert np.array_equal(lab, f.values(f"{side}_delta_min")[live] >= 15)

    def test_cancelled_masks(self, mock_flights):
        assert mock_flights[0].mask("actual_arr_utc").sum() > 0

    def test_deterministic(self, tmp_path):
        a, _ = write_mock(tmp_path / "a", 200, seed=5)
        b, _ = write_mock(tmp_path / "b", 200, seed=5)
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text().splitlines()[0].split(",") == BTS_HEADER


class TestFrames:
    @pytest.mark.parametrize("variant,width", [("utc_ts", 10), ("utc_d", 10), ("utc_d_2", 13)])
    def test_widths(self, mock_flights, variant, width):
        f = mock_flights[0]
        fr = build_frame(f, variant)
        assert fr.shape == (f.n_rows, width)
        assert fr.names == FRAMES[variant]

    def test_exact_names(self):
        assert FRAMES["utc_ts"] == ["carrier", "tail_number", "origin_id", "dest_id", "sched_dep_utc",
                                    "actual_dep_utc", "wheels_off_utc", "wheels_on_utc",
                                    "sched_arr_utc", "actual_arr_utc"]
        assert set(FRAMES["utc_d_2"]) - set(FRAMES["utc_d"]) == {"actual_dep_utc", "taxi_in_min", "arr_delta_min"}

    def test_idempotent(self, mock_flights):
        fr = build_frame(mock_flights[0], "utc_d_2")
        assert build_frame(fr, "utc_d_2").equals(fr)

    def test_missing_source(self, mock_flights):
        with pytest.raises(IngestError):
            build_frame(build_frame(mock_flights[0], "utc_d"), "utc_ts")


class TestRoutes:
    def _toy(self, pairs, dists):
        schema = [ColumnSchema("origin_id", "categorical"), ColumnSchema("dest_id", "categorical"),
                  ColumnSchema("distance_miles", "numeric", nullable=True)]
        return Table(schema, {"origin_id": [p[0] for p in pairs], "dest_id": [p[1] for p in pairs],
                              "distance_miles": dists})

    def test_single_flight(self):
        assert build_route_directory(self._toy([("A", "B")], [100.0])).n_routes == 1

    def test_directed(self):
        r = build_route_directory(self._toy([("A", "B"), ("B", "A"), ("A", "B")], [100.0, 100.0, 100.0]))
        assert r.n_routes == len({("A", "B"), ("B", "A")}) == 2
        assert ("B", "A") in r and ("A", "C") not in r

    def test_conflict(self):
        with pytest.raises(IngestError):
            build_route_directory(self._toy([("A", "B"), ("A", "B")], [100.0, 105.0]))

    def test_csv_round_trip(self, tmp_path, mock_flights):
        routes = mock_flights[1]
        routes.write(tmp_path / "r.csv")
        back = RouteDirectory.read(tmp_path / "r.csv")
        assert back.pairs() == routes.pairs()
        assert all(back.distance(*p) == routes.distance(*p) for p in routes.pairs())

    def test_airport_csv_round_trip(self, tmp_path):
        ap = mock_airports()
        ap.write(tmp_path / "a.csv")
        back = AirportDirectory.read(tmp_path / "a.csv")
        assert back.ids() == ap.ids() and back["12478"] == ap["12478"]
