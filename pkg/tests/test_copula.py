import logging

import numpy as np
import pytest

from flightsynth.copula import (
    CopulaError, FittedCopula, gc_fit, gc_sample, gc_sample_matrix, normal_scores, subsample,
)
from flightsynth.numkit import CorrelationMatrix
from flightsynth.table import ColumnSchema, Table


def numeric_table(cols: dict) -> Table:
    return Table([ColumnSchema(k, "numeric") for k in cols], cols)


def test_monotone_pair_fully_correlated():
    x = np.random.default_rng(0).normal(size=800)
    m = gc_fit(numeric_table({"a": x, "b": 3.0 * x - 2.0}))
    assert m.correlation.theta[0, 1] >= 0.99


def test_skewed_monotone_pair_strongly_correlated():
    # the sigma-based bandwidth oversmooths the lognormal column, so the
    # scores of a monotone but nonlinear pair fall a little short of 1
    x = np.random.default_rng(0).normal(size=800)
    m = gc_fit(numeric_table({"a": x, "b": np.exp(x)}))
    assert 0.95 <= m.correlation.theta[0, 1] < 1.0


def test_independent_columns():
    rng = np.random.default_rng(1)
    m = gc_fit(numeric_table({"a": rng.normal(size=5000), "b": rng.exponential(size=5000)}))
    assert abs(m.correlation.theta[0, 1]) < 0.05


def test_over_cap_asks_for_subsample():
    t = numeric_table({"a": np.arange(5001.0)})
    with pytest.raises(CopulaError, match="subsample to 5000"):
        gc_fit(t)
    small = subsample(t, 5000, seed=3)
    assert small.n_rows == 5000
    assert np.all(np.diff(small.values("a")) > 0)
    assert small.equals(subsample(t, 5000, seed=3))


def test_too_few_rows():
    with pytest.raises(CopulaError):
        gc_fit(numeric_table({"a": np.arange(5.0)}))


def test_constant_column_warns(caplog):
    x = np.random.default_rng(2).normal(size=200)
    with caplog.at_level(logging.WARNING):
        m = gc_fit(numeric_table({"a": x, "k": np.full(200, 3.0)}))
    assert "constant" in caplog.text
    s = gc_sample(m, 100, seed=0)
    np.testing.assert_allclose(s.values("k"), 3.0)


def test_sample_shape_and_determinism():
    rng = np.random.default_rng(3)
    t = Table(
        [ColumnSchema("c", "categorical"), ColumnSchema("x", "numeric"), ColumnSchema("y", "numeric", nullable=True)],
        {"c": rng.choice(["p", "q", "r"], 400), "x": rng.normal(size=400),
         "y": np.where(rng.random(400) < 0.2, np.nan, rng.normal(size=400))},
    )
    m = gc_fit(t, seed=1)
    assert len(m.marginals) == len(m.columns) == 4  # c, x, y, y__present
    a = gc_sample(m, 300, seed=5)
    assert a.shape == (300, 3)
    assert a.names == t.names
    assert a.equals(gc_sample(m, 300, seed=5))
    assert not a.equals(gc_sample(m, 300, seed=6))
    assert 0.1 < a.mask("y").mean() < 0.3


def test_identity_theta_gives_independent_draws():
    rng = np.random.default_rng(4)
    x = rng.normal(size=500)
    m = gc_fit(numeric_table({"a": x, "b": x + 0.1 * rng.normal(size=500)}))
    m.correlation = CorrelationMatrix.from_matrix(np.eye(2))
    n = 3000
    draws = gc_sample_matrix(m, n, seed=0)
    assert abs(np.corrcoef(draws.T)[0, 1]) < 3 / np.sqrt(n)


def test_category_frequencies_recovered():
    rng = np.random.default_rng(0)
    cats = rng.choice(["A", "B", "C", "D"], 5000, p=[0.5, 0.3, 0.15, 0.05])
    t = Table([ColumnSchema("c", "categorical")], {"c": cats})
    s = gc_sample(gc_fit(t), 5000, seed=1).values("c")
    for k in "ABCD":
        assert abs((s == k).mean() - (cats == k).mean()) <= 0.03


def test_normal_scores_are_monotone():
    x = np.random.default_rng(5).normal(size=(300, 1))
    m = gc_fit(numeric_table({"a": x[:, 0]}))
    z = normal_scores(x, m.marginals)[:, 0]
    order = np.argsort(x[:, 0])
    assert np.all(np.diff(z[order]) >= 0)


def test_json_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    t = Table([ColumnSchema("c", "categorical"), ColumnSchema("x", "numeric")],
              {"c": rng.choice(["u", "v"], 200), "x": rng.gamma(2.0, size=200)})
    m = gc_fit(t)
    m.save(tmp_path / "gc.json")
    back = FittedCopula.load(tmp_path / "gc.json")
    np.testing.assert_array_equal(back.correlation.theta, m.correlation.theta)
    assert gc_sample(back, 100, seed=2).equals(gc_sample(m, 100, seed=2))


def test_from_json_rejects_other_kind():
    with pytest.raises(CopulaError):
        FittedCopula.from_json({"kind": "tvae"})
