import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flightsynth.table import (
    ColumnSchema, Table, TableError, concat_rows, parse_iso_utc, read_table,
    select_columns, write_table,
)
from oracles import epoch_from_calendar

SCHEMA = [
    ColumnSchema("Carrier", "categorical"),
    ColumnSchema("Tail Number", "categorical", nullable=True),
    ColumnSchema("Air Time", "numeric", unit="min", nullable=True),
    ColumnSchema("Departure", "datetime", nullable=True),
    ColumnSchema("Cancelled", "boolean"),
]


def _write(tmp_path, text, schema=SCHEMA):
    from flightsynth.table import write_schema
    csv_path = tmp_path / "t.csv"
    csv_path.write_text(text, encoding="utf-8")
    write_schema(schema, tmp_path / "t.schema.json")
    return csv_path, tmp_path / "t.schema.json"


def test_empty_tail_is_masked(tmp_path):
    text = ("Carrier,Tail Number,Air Time,Departure,Cancelled\n"
            "AA,N101,55,2023-01-15T19:30:00Z,false\n"
            "DL,,60.5,2023-01-15T20:00:00Z,false\n"
            "UA,N303,,,true\n")
    t = read_table(*_write(tmp_path, text))
    assert t.shape == (3, 5)
    assert t.mask("Tail Number").tolist() == [False, True, False]
    assert t.mask("Air Time").tolist() == [False, False, True]
    assert t.values("Air Time")[1] == 60.5
    assert t.values("Cancelled").tolist() == [False, False, True]


def test_header_missing_column_named(tmp_path):
    text = "Carrier,Air Time,Departure,Cancelled\nAA,55,2023-01-15T19:30:00Z,false\n"
    with pytest.raises(TableError, match="Tail Number"):
        read_table(*_write(tmp_path, text))


def test_unknown_header_column(tmp_path):
    text = "Carrier,Tail Number,Air Time,Departure,Cancelled,Extra\nAA,N1,1,2023-01-01T00:00:00Z,true,x\n"
    with pytest.raises(TableError, match="Extra"):
        read_table(*_write(tmp_path, text))


def test_bad_cell_reports_row_and_column(tmp_path):
    text = "Carrier,Tail Number,Air Time,Departure,Cancelled\nAA,N1,1,2023-01-01T00:00:00Z,true\nAA,N1,1;5,2023-01-01T00:00:00Z,true\n"
    with pytest.raises(TableError, match=r"row 3.*Air Time"):
        read_table(*_write(tmp_path, text))


@pytest.mark.parametrize("cell", ["1,000", "1 000", "1.0.0", "nan", "inf"])
def test_locale_independent_numbers(tmp_path, cell):
    text = f'Carrier,Tail Number,Air Time,Departure,Cancelled\nAA,N1,"{cell}",2023-01-01T00:00:00Z,true\n'
    with pytest.raises(TableError):
        read_table(*_write(tmp_path, text))


def test_iso_parse_matches_calendar_oracle():
    assert parse_iso_utc("2023-01-15T19:30:00Z") == 1673811000
    assert parse_iso_utc("2023-01-15T19:30:00Z") == epoch_from_calendar(2023, 1, 15, 19, 30, 0)
    assert parse_iso_utc("2024-02-29T23:59:59Z") == epoch_from_calendar(2024, 2, 29, 23, 59, 59)


@pytest.mark.parametrize("bad", ["2023-01-15 19:30:00", "2023-02-30T00:00:00Z", "2023-01-15T19:30:00+05:00"])
def test_iso_rejects(bad):
    with pytest.raises(ValueError):
        parse_iso_utc(bad)


def _random_table(rng, n):
    cols = {
        "Carrier": rng.choice(["AA", "DL", "B6"], n).astype(object),
        "Tail Number": rng.choice(["N1", "N2", "N 3", 'N"4'], n).astype(object),
        "Air Time": np.round(rng.normal(100, 30, n), 3),
        "Departure": rng.integers(1_600_000_000, 1_700_000_000, n),
        "Cancelled": rng.random(n) < 0.1,
    }
    masks = {
        "Tail Number": rng.random(n) < 0.2,
        "Air Time": rng.random(n) < 0.2,
        "Departure": rng.random(n) < 0.2,
    }
    return Table(SCHEMA, cols, masks)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 60), st.integers(0, 1000))
def test_round_trip(tmp_path_factory, n, seed):
    d = tmp_path_factory.mktemp("rt")
    t = _random_table(np.random.default_rng(seed), n)
    write_table(t, d / "x.csv", d / "x.schema.json")
    back = read_table(d / "x.csv", d / "x.schema.json")
    assert back.equals(t)
    assert back.fingerprint() == t.fingerprint()


def test_all_missing_column_round_trip(tmp_path):
    n = 4
    t = Table(SCHEMA, {
        "Carrier": ["AA"] * n, "Tail Number": [""] * n, "Air Time": [np.nan] * n,
        "Departure": [0] * n, "Cancelled": [True] * n,
    }, {"Tail Number": [True] * n, "Departure": [True] * n})
    write_table(t, tmp_path / "x.csv", tmp_path / "x.schema.json")
    assert (tmp_path / "x.csv").read_text().splitlines()[1] == "AA,,,,true"
    back = read_table(tmp_path / "x.csv", tmp_path / "x.schema.json")
    assert back.equals(t)
    assert back.mask("Air Time").all()


def test_zero_rows(tmp_path):
    t = Table(SCHEMA, {c.name: [] for c in SCHEMA})
    write_table(t, tmp_path / "x.csv", tmp_path / "x.schema.json")
    assert (tmp_path / "x.csv").read_text() == "Carrier,Tail Number,Air Time,Departure,Cancelled\n"
    back = read_table(tmp_path / "x.csv", tmp_path / "x.schema.json")
    assert back.shape == (0, 5) and back.equals(t)


def test_schema_invariants():
    with pytest.raises(TableError):
        Table([ColumnSchema("a", "numeric"), ColumnSchema("a", "numeric")], {"a": [1.0]})
    with pytest.raises(TableError):
        Table([ColumnSchema("a", "numeric")], {"a": [np.nan]})
    assert ColumnSchema("t", "datetime").timezone == "UTC"
    with pytest.raises(TableError):
        Table([ColumnSchema("a", "numeric"), ColumnSchema("b", "numeric")], {"a": [1.0], "b": [1.0, 2.0]})


def test_tables_are_immutable():
    t = _random_table(np.random.default_rng(0), 5)
    with pytest.raises(ValueError):
        t.values("Air Time")[0] = 1.0


class TestSelect:
    def test_thirteen_of_thirty(self):
        schema = [ColumnSchema(f"c{i}", "numeric") for i in range(30)]
        t = Table(schema, {f"c{i}": np.arange(7.0) for i in range(30)})
        s = select_columns(t, [f"c{i}" for i in range(13)])
        assert s.shape == (7, 13)
        assert list(s.schema) == schema[:13]

    def test_identity(self):
        t = _random_table(np.random.default_rng(1), 20)
        assert select_columns(t, t.names).equals(t)

    def test_empty_selection(self):
        t = _random_table(np.random.default_rng(2), 20)
        s = select_columns(t, [])
        assert s.shape == (20, 0)

    def test_unknown(self):
        t = _random_table(np.random.default_rng(3), 5)
        with pytest.raises(TableError, match="nope"):
            select_columns(t, ["Carrier", "nope"])

    def test_masks_preserved(self):
        t = _random_table(np.random.default_rng(4), 50)
        s = select_columns(t, ["Air Time"])
        assert np.array_equal(s.mask("Air Time"), t.mask("Air Time"))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_projection_commutes_with_filter(self, seed):
        rng = np.random.default_rng(seed)
        t = _random_table(rng, 40)
        keep = rng.random(40) < 0.5
        names = ["Departure", "Carrier"]
        assert select_columns(t, names).take(keep).equals(select_columns(t.take(keep), names))


def test_concat_rows():
    rng = np.random.default_rng(5)
    a, b = _random_table(rng, 3), _random_table(rng, 4)
    c = concat_rows([a, b])
    assert c.n_rows == 7
    assert c.take(np.arange(3)).equals(a)
