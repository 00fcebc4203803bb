"""Acceptance criteria 1-10, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line (stdout capture disabled) and
then asserts, so a failing criterion shows up both in the line and in the
pytest result.  Run alone with ``pytest -v tests/test_acceptance.py``.
"""
import time

import numpy as np
import pytest

from flightsynth.cli import ExperimentConfig, run_pipeline
from flightsynth.copula import gc_fit, gc_sample, normal_scores
from flightsynth.encode import decode, encode, fit_encoder, split_missing
from flightsynth.evaluate import (
    contingency_similarity, fidelity_stage, ks_score, tvd_score, utility_split, utility_stage,
)
from flightsynth.ingest import AirportDirectory, RouteDirectory, ingest
from flightsynth.learners import LearnerSpec, mae, rmse, REGRESSORS
from flightsynth.mock import write_mock
from flightsynth.numkit import (
    cholesky_psd, kde_cdf, kde_fit, kde_quantile, normal_cdf, normal_quantile, top_eigenvectors,
)
from flightsynth.reconstruct import FILTER_ORDER, FilterConfig, filter_violations
from flightsynth.table import ColumnSchema, Table
from flightsynth.tvae import TrainConfig, finite_difference_check, toy_model, tvae_fit, tvae_sample
from oracles import eig_sym_2x2, eig_sym_3x3, joint_tvd_complement, ks_statistic_bruteforce, tvd_complement

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        assert ok, f"criterion {number}: {detail}"
    return emit


def _mixed_table(rng, n):
    schema = [
        ColumnSchema("cat", "categorical", nullable=True),
        ColumnSchema("num", "numeric", unit="min", nullable=True),
        ColumnSchema("whole", "numeric"),
        ColumnSchema("when", "datetime", nullable=True),
        ColumnSchema("flag", "boolean", nullable=True),
    ]
    cols = {
        "cat": rng.choice(["A", "B", "C", "D", "E"], n, p=[0.4, 0.3, 0.15, 0.1, 0.05]).astype(object),
        "num": rng.lognormal(3, 1, n) * rng.choice([-1, 1], n),
        "whole": rng.integers(-50, 300, n).astype(float),
        "when": 1_672_531_200 + 60 * rng.integers(0, 44_640, n),
        "flag": rng.random(n) < 0.3,
    }
    rate = rng.uniform(0.0, 0.4)
    masks = {k: rng.random(n) < rate for k in ("cat", "num", "when", "flag")}
    for k in masks:
        masks[k][0] = False
    return Table(schema, cols, masks)


def _round_trip_ok(t, back):
    if back.names != t.names:
        return False
    for c in t.schema:
        m = t.mask(c.name)
        if not np.array_equal(back.mask(c.name), m):
            return False
        a, b = t.values(c.name)[~m], back.values(c.name)[~m]
        if c.kind == "numeric":
            if not np.all(np.abs(a - b) <= 1e-9 * np.maximum(1.0, np.abs(a))):
                return False
        elif not np.array_equal(a, b):
            return False
    return True


def test_criterion_1_encoder_round_trip(report):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    failures = 0
    for i in range(100):
        t = _mixed_table(rng, int(rng.integers(2, 501)))
        target, mode = [("copula", False), ("tvae", False), ("tvae", True)][i % 3]
        s = split_missing(t, seed=i)
        state = fit_encoder(s, target, mode_normalize=mode)
        failures += not _round_trip_ok(t, decode(encode(s, state, seed=i), state))
    elapsed = time.perf_counter() - start
    report(1, failures == 0 and elapsed < 30,
           f"{100 - failures}/100 tables round-trip exactly, {elapsed:.1f}s (limit 30s)")


def test_criterion_2_numeric_kernels(report):
    x = np.linspace(-6, 6, 24001)
    rt = np.abs(normal_quantile(normal_cdf(x)) - x)
    phi_ok = rt.max() <= 1e-9
    worst_x = x[np.argmax(rt)]
    bad_from = x[rt > 1e-9].min() if not phi_ok else None

    rng = np.random.default_rng(7)
    chol_err = 0.0
    for _ in range(200):
        d = int(rng.integers(2, 9))
        a = rng.normal(size=(d, d))
        s = a @ a.T + d * np.eye(d)
        dg = np.sqrt(np.diag(s))
        c = s / np.outer(dg, dg)
        low = cholesky_psd(c)
        chol_err = max(chol_err, float(np.abs(low @ low.T - c).max()))

    eig_err = 0.0
    for i in range(200):
        d = 2 + i % 2
        b = rng.normal(size=(d, d))
        a = b @ b.T  # covariance-like, as PCA sees it
        vals, vecs = top_eigenvectors(a, 2)
        ref_vals, ref_vecs = (eig_sym_2x2 if d == 2 else eig_sym_3x3)(a)
        for k in range(2):
            eig_err = max(eig_err, abs(vals[k] - ref_vals[k]) / max(1.0, abs(ref_vals[k])),
                          min(np.abs(vecs[k] - ref_vecs[k]).max(), np.abs(vecs[k] + ref_vecs[k]).max()))

    kde_err = 0.0
    for seed in range(20):
        r = np.random.default_rng(seed)
        m = kde_fit(np.concatenate([r.normal(0, 1, 300), r.normal(6, 0.5, 100)]))
        lo, hi = m.support
        grid = np.linspace(lo, hi, 600)
        u = kde_cdf(m, grid)
        inside = (u > 1e-6) & (u < 1 - 1e-6)
        kde_err = max(kde_err, float(np.abs(kde_quantile(m, u[inside]) - grid[inside]).max()))

    ok = phi_ok and chol_err <= 1e-10 and eig_err <= 1e-6 and kde_err <= 1e-6
    phi_text = (f"Phi round trip max {rt.max():.2e} at x={worst_x:.3f}"
                + ("" if phi_ok else f" (exceeds 1e-9 from x={bad_from:.3f}: Phi(x) rounds to within "
                                     f"one ulp of 1)"))
    report(2, ok, f"{phi_text}; Cholesky {chol_err:.1e} (1e-10); eigen {eig_err:.1e} (1e-6); "
                  f"KDE round trip {kde_err:.1e} (1e-6)")


def test_criterion_3_copula_recovery(report):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    z = rng.multivariate_normal([0, 0], [[1, 0.7], [0.7, 1]], size=5000)
    x = np.exp(z)
    t = Table([ColumnSchema("a", "numeric"), ColumnSchema("b", "numeric")], {"a": x[:, 0], "b": x[:, 1]})
    model = gc_fit(t, seed=0)
    s = gc_sample(model, 5000, seed=1)
    sx = np.column_stack([s.values("a"), s.values("b")])
    scores = normal_scores(sx, model.marginals)
    rho = float(np.corrcoef(scores.T)[0, 1])
    ks = [1 - ks_score(t.values(c), s.values(c)) for c in ("a", "b")]
    elapsed = time.perf_counter() - start
    ok = abs(rho - 0.7) <= 0.05 and max(ks) <= 0.05 and elapsed < 120
    report(3, ok, f"normal-scores rho {rho:.4f} (0.7 +- 0.05); KS a={ks[0]:.4f} b={ks[1]:.4f} (<= 0.05); "
                  f"{elapsed:.1f}s (limit 120s)")


def test_criterion_4_tvae_gradient(report):
    start = time.perf_counter()
    worst = 0.0
    for seed in range(5):
        model, batch, eps = toy_model(seed)
        worst = max(worst, finite_difference_check(model, batch, eps))
    elapsed = time.perf_counter() - start
    report(4, worst <= 1e-4 and elapsed < 10,
           f"worst relative gradient error {worst:.2e} over every parameter of the 4-2-4 toy "
           f"(<= 1e-4), {elapsed:.2f}s (limit 10s)")


def test_criterion_5_tvae_learning(report):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    n = 2000
    x = np.repeat([0.0, 100.0], n // 2)[:, None] + rng.normal(0, 5, (n, 2))
    x = x[rng.permutation(n)]
    table = Table([ColumnSchema("x0", "numeric"), ColumnSchema("x1", "numeric")],
                  {"x0": x[:, 0], "x1": x[:, 1]})
    model = tvae_fit(table, TrainConfig(epochs=50, seed=0, mode_normalize=True))
    loss = [r["total"] for r in model.trace]
    early, late = float(np.mean(loss[:10])), float(np.mean(loss[40:50]))
    s = tvae_sample(model, n, seed=1)
    sx = np.column_stack([s.values("x0"), s.values("x1")])
    low = sx[:, 0] < 50
    gaps = []
    if 0 < low.sum() < n:
        gaps = [abs(sx[low].mean(axis=0) - 0).max(), abs(sx[~low].mean(axis=0) - 100).max()]
    elapsed = time.perf_counter() - start
    ok = late < early and len(gaps) == 2 and max(gaps) <= 2.5 and elapsed < 180
    report(5, ok, f"loss {early:.3f} -> {late:.3f}; cluster mean gaps "
                  f"{', '.join(f'{g:.3f}' for g in gaps) or 'one cluster only'} (<= 2.5 = 0.5 sigma); "
                  f"{elapsed:.1f}s (limit 180s)")


def test_criterion_6_metric_oracles(report):
    rng = np.random.default_rng(6)
    ks_bad = 0
    for _ in range(500):
        a = rng.integers(0, 10, rng.integers(1, 15)).astype(float) / 2
        b = rng.integers(0, 10, rng.integers(1, 15)).astype(float) / 2
        ks_bad += ks_score(a, b) != float(1 - ks_statistic_bruteforce(a.tolist(), b.tolist()))
    tvd_bad = cont_bad = 0
    for _ in range(500):
        a = rng.choice(list("pqrs"), rng.integers(1, 40)).tolist()
        b = rng.choice(list("pqrt"), rng.integers(1, 40)).tolist()
        tvd_bad += tvd_score(a, b) != tvd_complement(a, b)
        a2 = rng.choice(list("xyz"), len(a)).tolist()
        b2 = rng.choice(list("xy"), len(b)).tolist()
        cont_bad += contingency_similarity((a, a2), (b, b2)) != joint_tvd_complement(a, a2, b, b2)
    order_bad = 0
    for _ in range(1000):
        n = int(rng.integers(1, 50))
        p, t = rng.normal(size=n) * rng.exponential(), rng.normal(size=n) * rng.exponential()
        order_bad += rmse(p, t) < mae(p, t)
    ok = ks_bad == tvd_bad == cont_bad == order_bad == 0
    report(6, ok, f"KS mismatches {ks_bad}/500, TVD {tvd_bad}/500, contingency {cont_bad}/500, "
                  f"RMSE < MAE {order_bad}/1000")


@pytest.fixture(scope="module")
def mock_4000(tmp_path_factory):
    d = tmp_path_factory.mktemp("c7")
    raw, ap = write_mock(d, 4100, seed=3)
    flights, _, _ = ingest(raw, AirportDirectory.read(ap))
    assert flights.n_rows >= 4000
    return flights.take(np.arange(4000))


def _uniform_noise(table, seed):
    rng = np.random.default_rng(seed)
    cols = {}
    for c in table.schema:
        obs = table.observed(c.name)
        n = table.n_rows
        if c.kind == "categorical":
            cols[c.name] = rng.choice(sorted(set(obs.tolist())), n).astype(object)
        elif c.kind == "boolean":
            cols[c.name] = rng.random(n) < 0.5
        elif c.kind == "datetime":
            cols[c.name] = rng.integers(int(obs.min()), int(obs.max()) + 1, n)
        else:
            cols[c.name] = rng.uniform(obs.min(), obs.max(), n)
    return Table(table.schema, cols)


def test_criterion_7_fidelity_calibration(report, mock_4000):
    order = np.random.default_rng(0).permutation(4000)
    a, b = mock_4000.take(np.sort(order[:2000])), mock_4000.take(np.sort(order[2000:]))
    same = fidelity_stage(a, b, seed=0)["average"]["accuracy"]
    noise = fidelity_stage(mock_4000, _uniform_noise(mock_4000, 1), seed=0)["average"]["accuracy"]
    report(7, 0.45 <= same <= 0.55 and noise >= 0.95,
           f"disjoint halves accuracy {same:.4f} (in [0.45, 0.55]); real vs uniform noise {noise:.4f} (>= 0.95)")


def test_criterion_8_utility_sanity(report, mock_4000):
    specs = [LearnerSpec(n, seed=0) for n in REGRESSORS]
    train, _ = utility_split(mock_4000, seed=5)
    same = utility_stage(mock_4000, train, specs, seed=5)
    identical = all(r["trtr"] == r["tstr"] for r in same["regressors"])
    failed = [r["learner"] for r in same["regressors"] if r["status"] != "ok"]

    rng = np.random.default_rng(8)
    n, beta = 2500, np.array([1.5, -2.0, 0.7, 0.0, 3.0])
    x = rng.normal(size=(n, 5))
    y = x @ beta + 10 + rng.normal(0, 1.0, n)
    schema = [ColumnSchema(f"x{i}", "numeric") for i in range(5)] + [ColumnSchema("y", "numeric")]
    real = Table(schema, {**{f"x{i}": x[:, i] for i in range(5)}, "y": y})
    feats = [f"x{i}" for i in range(5)]
    real_train, _ = utility_split(real, seed=9, target="y")
    oracle = real_train.take(np.random.default_rng(10).integers(0, real_train.n_rows, real_train.n_rows))
    planted = utility_stage(real, oracle, specs, seed=9, features=feats, target="y")
    r_trtr, r_tstr = planted["average"]["trtr"]["r2"], planted["average"]["tstr"]["r2"]
    ok = identical and abs(r_trtr - r_tstr) <= 0.05
    report(8, ok, f"synthetic == real-train gives identical TSTR/TRTR metrics: {identical} "
                  f"(recorded learner failures: {failed or 'none'}); planted linear target R2 "
                  f"TRTR {r_trtr:.4f} vs TSTR {r_tstr:.4f} (gap <= 0.05)")


def _routes_valid(table, routes):
    return bool(routes.contains(table.values("origin_id"), table.values("dest_id")).all())


def _filters_hold(table):
    cfg = FilterConfig()
    return all(not filter_violations(table, name, cfg).any() for name in FILTER_ORDER)


def test_criterion_9_preset5_end_to_end(report, tmp_path):
    start = time.perf_counter()
    cfg = ExperimentConfig.preset(5, mock_rows=5000, seed=0)
    result = run_pipeline(cfg, tmp_path)
    elapsed = time.perf_counter() - start
    rep = result["report"]
    routes = RouteDirectory.read(tmp_path / "ingest" / "routes.csv")
    stat = rep["statistical"]["aggregate"]["average"]
    fid = rep["fidelity"]["average"]["accuracy"]
    cleaning = result["cleaning"]
    valid = _routes_valid(result["cleaned"], routes) and _filters_hold(result["cleaned"])
    ok = elapsed < 600 and stat >= 0.85 and fid <= 0.80 and cleaning.balanced and valid
    report(9, ok, f"{elapsed:.0f}s (limit 600s); statistical average {stat:.4f} (>= 0.85); fidelity accuracy "
                  f"{fid:.4f} (<= 0.80); cleaning {cleaning.input_rows} -> {cleaning.output_rows} rows, "
                  f"balanced {cleaning.balanced}; surviving routes valid {valid}")


def test_criterion_10_preset3_end_to_end(report, tmp_path):
    cfg = ExperimentConfig.preset(3, mock_rows=20000, seed=0, tvae={"epochs": 100},
                                  stages=["diversity"], n_samples=20000)
    start = time.perf_counter()
    result = run_pipeline(cfg, tmp_path)
    elapsed = time.perf_counter() - start
    trace = (tmp_path / "fit" / "training_trace.csv").read_text().splitlines()
    div = result["report"]["diversity"]
    routes = div["routes"]
    gap = max(b["gap_pct"] for b in div["class_balance"])
    labels = {b["column"] for b in div["class_balance"]}
    ok = (elapsed < 1200 and len(trace) == 101 and routes["covered"] == routes["real"]
          and labels == {"dep_delay_label", "arr_delay_label"} and gap <= 10)
    report(10, ok, f"{len(trace) - 1} TVAE epochs, whole pipeline {elapsed:.0f}s (limit 1200s); routes "
                   f"covered {routes['covered']}/{routes['real']}; PCA points {len(div['pca']['synthetic'])}; "
                   f"worst delay-label balance gap {gap:.2f} points (<= 10)")
