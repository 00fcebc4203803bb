"""Four-stage quality evaluation of a synthetic table against the real one:
diversity (shared PCA projection, class balance, route coverage),
statistical similarity, fidelity (real-vs-synthetic classifiers) and
utility (train-synthetic-test-real regression).

TVD, KS and contingency scores are computed from integer counts and
converted to float once from the exact rational value, so they are
reproducible bit for bit.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from pathlib import Path

import numpy as np

from .ingest import PREDICTION_FEATURES, PREDICTION_TARGET
from .learners import (
    CLASSIFIERS, REGRESSORS, Dataset, LearnerSpec, classification_metrics, regression_metrics,
    stratified_kfold, train_classifier, train_regressor,
)
from .numkit import pca_fit, pca_project, rng_stream
from .table import Table

log = logging.getLogger(__name__)

LABEL_COLUMNS = ("dep_delay_label", "arr_delay_label")
UTILITY_TRAIN_SHARE = 0.8
MIN_HOLDOUT = 100
N_DECILES = 10
AGGREGATE_TOL = 1e-12


class EvaluationError(ValueError):
    pass


# -- scores -----------------------------------------------------------------------------------
def _counts(values) -> dict:
    out: dict = {}
    for v in values:
        out[v] = out.get(v, 0) + 1
    return out


def _tvd_complement(a: dict, b: dict) -> float:
    n, m = sum(a.values()), sum(b.values())
    if n == 0 or m == 0:
        raise EvaluationError("score needs non-empty inputs")
    gap = sum(abs(a.get(c, 0) * m - b.get(c, 0) * n) for c in set(a) | set(b))
    return float(Fraction(2 * n * m - gap, 2 * n * m))


def tvd_score(real_col, synth_col) -> float:
    """1 - total variation distance between category frequencies."""
    return _tvd_complement(_counts(np.asarray(real_col, dtype=object).tolist()),
                           _counts(np.asarray(synth_col, dtype=object).tolist()))


def ks_score(real_col, synth_col) -> float:
    """1 - sup |ECDF_real - ECDF_synth| via one pass over the merged sort.
    The gap at any point is |i*m - j*n| / (n*m), tracked in integers."""
    a = np.sort(np.asarray(real_col, dtype=np.float64))
    b = np.sort(np.asarray(synth_col, dtype=np.float64))
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise EvaluationError("ks_score needs non-empty inputs")
    values = np.concatenate([a, b])
    # counts at or below each distinct value
    grid = np.unique(values)
    i = np.searchsorted(a, grid, side="right").astype(object)
    j = np.searchsorted(b, grid, side="right").astype(object)
    gap = max(abs(int(x) * m - int(y) * n) for x, y in zip(i, j))
    return float(Fraction(n * m - gap, n * m))


def correlation_similarity(real_pair, synth_pair) -> float:
    """1 - |rho_real - rho_synth| / 2 with Pearson rho."""
    rr = _pearson(*real_pair)
    rs = _pearson(*synth_pair)
    return 1.0 - abs(rr - rs) / 2.0


def _pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xc, yc = x - x.mean(), y - y.mean()
    den = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if den == 0.0:
        raise EvaluationError("correlation undefined for a zero-variance column")
    return float(np.clip((xc @ yc) / den, -1.0, 1.0))


def contingency_similarity(real_pair, synth_pair) -> float:
    """1 - TVD between the joint category frequencies of two columns."""
    ra, rb = (np.asarray(c, dtype=object).tolist() for c in real_pair)
    sa, sb = (np.asarray(c, dtype=object).tolist() for c in synth_pair)
    return _tvd_complement(_counts(zip(ra, rb)), _counts(zip(sa, sb)))


# -- feature encoding for learners and PCA ------------------------------------------------------
@dataclass
class FeatureEncoder:
    """Table -> float matrix using statistics of a reference table.

    Categorical/boolean cells map to the midpoint of their category's
    interval in the reference frequency order (unseen categories to 1.0),
    datetimes to standardized epoch seconds, numerics pass through.
    Nullable columns with missing cells get a 0/1 presence feature and the
    gap is filled with the reference mean.
    """

    columns: list[str]
    kinds: dict = field(default_factory=dict)
    midpoints: dict = field(default_factory=dict)
    center: dict = field(default_factory=dict)
    scale: dict = field(default_factory=dict)
    fill: dict = field(default_factory=dict)
    presence: list = field(default_factory=list)

    @classmethod
    def fit(cls, reference: Table, columns: list[str] | None = None, others=()) -> "FeatureEncoder":
        columns = list(columns or reference.names)
        enc = cls(columns)
        for name in columns:
            kind = reference.column_schema(name).kind
            enc.kinds[name] = kind
            obs = reference.observed(name)
            if kind in ("categorical", "boolean"):
                keys = [str(v) for v in obs.tolist()]
                counts = _counts(keys)
                order = sorted(counts, key=lambda c: (-counts[c], c))
                total = max(1, len(keys))
                cum, mids = 0, {}
                for c in order:
                    mids[c] = (cum + counts[c] / 2.0) / total
                    cum += counts[c]
                enc.midpoints[name] = mids
                enc.fill[name] = 1.0
            else:
                x = obs.astype(np.float64)
                mu = float(x.mean()) if len(x) else 0.0
                sd = float(x.std()) if len(x) else 0.0
                if kind == "datetime":
                    enc.center[name], enc.scale[name] = mu, sd if sd > 0 else 1.0
                    enc.fill[name] = 0.0
                else:
                    enc.fill[name] = mu
            if reference.mask(name).any() or any(name in t and t.mask(name).any() for t in others):
                enc.presence.append(name)
        return enc

    @property
    def feature_names(self) -> list[str]:
        return self.columns + [f"{c}__present" for c in self.presence]

    def transform(self, table: Table) -> np.ndarray:
        cols = []
        for name in self.columns:
            if name not in table:
                raise EvaluationError(f"column {name!r} missing from table")
            kind, v, m = self.kinds[name], table.values(name), table.mask(name)
            if kind in ("categorical", "boolean"):
                mids = self.midpoints[name]
                x = np.array([mids.get(str(c), 1.0) for c in v.tolist()])
            elif kind == "datetime":
                x = (v.astype(np.float64) - self.center[name]) / self.scale[name]
            else:
                x = v.astype(np.float64)
            cols.append(np.where(m, self.fill[name], x))
        for name in self.presence:
            cols.append((~table.mask(name)).astype(np.float64))
        return np.column_stack(cols) if cols else np.zeros((table.n_rows, 0))


def _check_same_schema(real: Table, synth: Table) -> None:
    if [(c.name, c.kind) for c in real.schema] != [(c.name, c.kind) for c in synth.schema]:
        raise EvaluationError("real and synthetic tables have different schemas")


# -- stages ---------------------------------------------------------------------------------------
def diversity_stage(real: Table, synth: Table) -> dict:
    _check_same_schema(real, synth)
    enc = FeatureEncoder.fit(real, others=(synth,))
    pca = pca_fit(enc.transform(real))
    section = {
        "pca": {
            "explained": pca.explained.tolist(),
            "real": pca_project(pca, enc.transform(real)).tolist(),
            "synthetic": pca_project(pca, enc.transform(synth)).tolist(),
        },
        "class_balance": [],
    }
    for col in LABEL_COLUMNS:
        if col not in real:
            continue
        r, s = real.observed(col).tolist(), synth.observed(col).tolist()
        for label in sorted(set(r) | set(s)):
            rp = 100.0 * r.count(label) / len(r) if r else 0.0
            sp = 100.0 * s.count(label) / len(s) if s else 0.0
            section["class_balance"].append({"column": col, "label": label, "real_pct": rp,
                                             "synthetic_pct": sp, "gap_pct": abs(rp - sp)})
    if "origin_id" in real and "dest_id" in real:
        real_routes = set(zip(real.values("origin_id").tolist(), real.values("dest_id").tolist()))
        synth_routes = set(zip(synth.values("origin_id").tolist(), synth.values("dest_id").tolist()))
        missing = sorted(real_routes - synth_routes)
        section["routes"] = {"real": len(real_routes), "synthetic": len(synth_routes),
                             "covered": len(real_routes) - len(missing),
                             "missing": [list(p) for p in missing]}
    return section


def _decile_codes(real: np.ndarray, synth: np.ndarray):
    edges = np.unique(np.quantile(real, np.linspace(0, 1, N_DECILES + 1)[1:-1]))
    return np.searchsorted(edges, real, side="right"), np.searchsorted(edges, synth, side="right")


def _is_numeric(kind: str) -> bool:
    return kind in ("numeric", "datetime")


def _as_key(kind, values):
    return [str(v) for v in values.tolist()] if kind == "boolean" else values


def statistical_stage(real: Table, synth: Table) -> dict:
    _check_same_schema(real, synth)
    marginals, skipped = [], []
    for col in real.schema:
        r, s = real.observed(col.name), synth.observed(col.name)
        if len(r) == 0 and len(s) == 0:
            skipped.append({"columns": [col.name], "reason": "no observed cells"})
            continue
        if len(r) == 0 or len(s) == 0:
            score, metric = 0.0, "empty"
        elif _is_numeric(col.kind):
            score, metric = ks_score(r.astype(np.float64), s.astype(np.float64)), "ks"
        else:
            score, metric = tvd_score(_as_key(col.kind, r), _as_key(col.kind, s)), "tvd"
        marginals.append({"column": col.name, "metric": metric, "score": score})

    constant = {c.name for c in real.schema if len(set(real.observed(c.name).tolist())) < 2}
    pairs = []
    for a, b in combinations(real.schema, 2):
        if a.name in constant or b.name in constant:
            skipped.append({"columns": [a.name, b.name], "reason": "constant column"})
            continue
        rm = ~(real.mask(a.name) | real.mask(b.name))
        sm = ~(synth.mask(a.name) | synth.mask(b.name))
        if not rm.any() or not sm.any():
            skipped.append({"columns": [a.name, b.name], "reason": "no jointly observed rows"})
            continue
        ra, rb = real.values(a.name)[rm], real.values(b.name)[rm]
        sa, sb = synth.values(a.name)[sm], synth.values(b.name)[sm]
        if _is_numeric(a.kind) and _is_numeric(b.kind):
            try:
                score = correlation_similarity((ra.astype(float), rb.astype(float)),
                                               (sa.astype(float), sb.astype(float)))
            except EvaluationError as exc:
                skipped.append({"columns": [a.name, b.name], "reason": str(exc)})
                continue
            metric = "correlation"
        else:
            if _is_numeric(a.kind):
                ra, sa = _decile_codes(ra.astype(float), sa.astype(float))
            if _is_numeric(b.kind):
                rb, sb = _decile_codes(rb.astype(float), sb.astype(float))
            score = contingency_similarity((_as_key(a.kind, np.asarray(ra)), _as_key(b.kind, np.asarray(rb))),
                                           (_as_key(a.kind, np.asarray(sa)), _as_key(b.kind, np.asarray(sb))))
            metric = "contingency"
        pairs.append({"columns": [a.name, b.name], "metric": metric, "score": score})
    if skipped:
        log.info("statistical: %d column(s)/pair(s) skipped", len(skipped))
    marginal = _mean([m["score"] for m in marginals])
    bivariate = _mean([p["score"] for p in pairs])
    return {"marginals": marginals, "pairs": pairs, "skipped": skipped,
            "aggregate": {"marginal": marginal, "bivariate": bivariate,
                          "average": _mean([x for x in (marginal, bivariate) if x is not None])}}


def _mean(xs):
    return float(sum(xs) / len(xs)) if xs else None


def _default_classifiers(seed):
    return [LearnerSpec(n, seed=seed) for n in CLASSIFIERS]


def _default_regressors(seed):
    return [LearnerSpec(n, seed=seed) for n in REGRESSORS]


def fidelity_stage(real: Table, synth: Table, specs=None, seed: int = 0, k: int = 5) -> dict:
    """Cross-validated accuracy/F1 of classifiers telling real from
    synthetic rows (synthetic is the positive class); lower is better."""
    _check_same_schema(real, synth)
    if real.n_rows == 0 or synth.n_rows == 0:
        raise EvaluationError("fidelity needs non-empty real and synthetic tables")
    specs = specs or _default_classifiers(seed)
    n = min(real.n_rows, synth.n_rows)
    rng = rng_stream(seed, 10)
    ri = np.sort(rng.choice(real.n_rows, n, replace=False)) if real.n_rows > n else np.arange(n)
    si = np.sort(rng.choice(synth.n_rows, n, replace=False)) if synth.n_rows > n else np.arange(n)
    r, s = real.take(ri), synth.take(si)
    enc = FeatureEncoder.fit(r, others=(s,))
    x = np.vstack([enc.transform(r), enc.transform(s)])
    y = np.array(["real"] * n + ["synthetic"] * n, dtype=object)
    data = Dataset(x, y, enc.feature_names)
    plan = stratified_kfold(y, k, seed)
    results = []
    for spec in specs:
        row = {"learner": spec.name, "params": spec.params}
        try:
            accs, f1s = [], []
            for train, test in plan.splits():
                model = train_classifier(spec, data.take(train))
                m = classification_metrics(model.predict(x[test]), y[test], positive="synthetic")
                accs.append(m["accuracy"])
                f1s.append(m["f1"])
            row.update(accuracy=_mean(accs), f1=_mean(f1s), status="ok")
        except Exception as exc:  # recorded per learner, excluded from the averages
            log.warning("fidelity: %s failed: %s", spec.name, exc)
            row.update(accuracy=None, f1=None, status=f"failed: {exc}")
        results.append(row)
    ok = [r for r in results if r["status"] == "ok"]
    return {"rows_per_class": n, "folds": k, "classifiers": results,
            "average": {"accuracy": _mean([r["accuracy"] for r in ok]), "f1": _mean([r["f1"] for r in ok])}}


def utility_split(real: Table, seed: int = 0, target: str = PREDICTION_TARGET):
    """Real rows with an observed target, split 80/20 (seeded)."""
    if target not in real:
        raise EvaluationError(f"target column {target!r} missing")
    rows = np.flatnonzero(~real.mask(target))
    order = rng_stream(seed, 20).permutation(rows)
    cut = int(round(UTILITY_TRAIN_SHARE * len(order)))
    return real.take(np.sort(order[:cut])), real.take(np.sort(order[cut:]))


def utility_stage(real: Table, synth: Table, specs=None, seed: int = 0,
                  features=None, target: str = PREDICTION_TARGET) -> dict:
    """TRTR vs TSTR regression on the real 20% holdout."""
    features = list(features or PREDICTION_FEATURES)
    for t, label in ((real, "real"), (synth, "synthetic")):
        absent = [c for c in features + [target] if c not in t]
        if absent:
            raise EvaluationError(f"{label} table lacks column(s) {absent}")
    specs = specs or _default_regressors(seed)
    train, holdout = utility_split(real, seed, target)
    if holdout.n_rows < MIN_HOLDOUT:
        log.warning("utility: holdout has only %d rows", holdout.n_rows)
    synth = synth.take(~synth.mask(target))
    enc = FeatureEncoder.fit(train, features, others=(synth, holdout))

    def dataset(t):
        return Dataset(enc.transform(t), t.values(target).astype(np.float64), enc.feature_names)

    d_train, d_synth, d_hold = dataset(train), dataset(synth), dataset(holdout)
    results = []
    for spec in specs:
        row = {"learner": spec.name, "params": spec.params}
        try:
            for mode, d in (("trtr", d_train), ("tstr", d_synth)):
                model = train_regressor(spec, d)
                row[mode] = regression_metrics(model.predict(d_hold.x), d_hold.y)
            row["status"] = "ok"
        except Exception as exc:  # recorded per learner, excluded from the averages
            log.warning("utility: %s failed: %s", spec.name, exc)
            row.update(trtr=None, tstr=None, status=f"failed: {exc}")
        results.append(row)
    ok = [r for r in results if r["status"] == "ok"]
    avg = {mode: {k: _mean([r[mode][k] for r in ok]) for k in ("mae", "rmse", "r2")} for mode in ("trtr", "tstr")}
    return {"features": features, "target": target, "train_rows": train.n_rows,
            "holdout_rows": holdout.n_rows, "synthetic_rows": synth.n_rows,
            "regressors": results, "average": avg}


# -- report -----------------------------------------------------------------------------------------
STAGES = ("diversity", "statistical", "fidelity", "utility")


def _recheck(name: str, got, parts) -> None:
    want = _mean(parts)
    if (got is None) != (want is None) or (got is not None and abs(got - want) > AGGREGATE_TOL):
        raise EvaluationError(f"aggregate {name} = {got} disagrees with its parts ({want})")


def _check_ranges(report: dict) -> None:
    def unit(name, v):
        if v is not None and not 0.0 <= v <= 1.0:
            raise EvaluationError(f"{name} = {v} outside [0, 1]")
    st = report.get("statistical")
    if st:
        for m in st["marginals"] + st["pairs"]:
            unit("score", m["score"])
    fi = report.get("fidelity")
    if fi:
        for r in fi["classifiers"]:
            unit("accuracy", r["accuracy"])
            unit("f1", r["f1"])
    ut = report.get("utility")
    if ut:
        for r in ut["regressors"]:
            for mode in ("trtr", "tstr"):
                if r[mode]:
                    if r[mode]["mae"] < 0 or r[mode]["rmse"] < 0 or r[mode]["r2"] > 1:
                        raise EvaluationError(f"{r['learner']} {mode} metrics out of range")


def assemble_report(diversity=None, statistical=None, fidelity=None, utility=None,
                    provenance: dict | None = None) -> dict:
    sections = {"diversity": diversity, "statistical": statistical, "fidelity": fidelity, "utility": utility}
    if all(v is None for v in sections.values()):
        raise EvaluationError("no evaluation stage was run")
    report = {"provenance": provenance or {}}
    for name, sec in sections.items():
        report[name] = sec if sec is not None else {"status": "absent"}
    if statistical is not None:
        agg = statistical["aggregate"]
        _recheck("marginal", agg["marginal"], [m["score"] for m in statistical["marginals"]])
        _recheck("bivariate", agg["bivariate"], [p["score"] for p in statistical["pairs"]])
        _recheck("average", agg["average"], [x for x in (agg["marginal"], agg["bivariate"]) if x is not None])
    if fidelity is not None:
        ok = [r for r in fidelity["classifiers"] if r["status"] == "ok"]
        for k in ("accuracy", "f1"):
            _recheck(f"fidelity {k}", fidelity["average"][k], [r[k] for r in ok])
    if utility is not None:
        ok = [r for r in utility["regressors"] if r["status"] == "ok"]
        for mode in ("trtr", "tstr"):
            for k in ("mae", "rmse", "r2"):
                _recheck(f"utility {mode} {k}", utility["average"][mode][k], [r[mode][k] for r in ok])
    _check_ranges({k: v for k, v in sections.items() if v is not None})
    return report


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    return "" if v is None else repr(float(v)) if isinstance(v, float) else v


def write_report(report: dict, out_dir) -> list[Path]:
    """report.json plus CSV plot data; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "report.json"]
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    div = report.get("diversity", {})
    if "pca" in div:
        rows = [("real", *map(_fmt, p)) for p in div["pca"]["real"]]
        rows += [("synthetic", *map(_fmt, p)) for p in div["pca"]["synthetic"]]
        _write_csv(out / "pca_coordinates.csv", ["set", "pc1", "pc2"], rows)
        written.append(out / "pca_coordinates.csv")
        _write_csv(out / "class_balance.csv", ["column", "label", "real_pct", "synthetic_pct", "gap_pct"],
                   [(b["column"], b["label"], _fmt(b["real_pct"]), _fmt(b["synthetic_pct"]), _fmt(b["gap_pct"]))
                    for b in div["class_balance"]])
        written.append(out / "class_balance.csv")
    st = report.get("statistical", {})
    if "marginals" in st:
        _write_csv(out / "marginal_scores.csv", ["column", "metric", "score"],
                   [(m["column"], m["metric"], _fmt(m["score"])) for m in st["marginals"]])
        _write_csv(out / "pair_scores.csv", ["column_a", "column_b", "metric", "score"],
                   [(*p["columns"], p["metric"], _fmt(p["score"])) for p in st["pairs"]])
        written += [out / "marginal_scores.csv", out / "pair_scores.csv"]
    fi = report.get("fidelity", {})
    if "classifiers" in fi:
        _write_csv(out / "fidelity.csv", ["learner", "accuracy", "f1", "status"],
                   [(r["learner"], _fmt(r["accuracy"]), _fmt(r["f1"]), r["status"]) for r in fi["classifiers"]])
        written.append(out / "fidelity.csv")
    ut = report.get("utility", {})
    if "regressors" in ut:
        rows = []
        for r in ut["regressors"]:
            for mode in ("trtr", "tstr"):
                m = r[mode] or {}
                rows.append((r["learner"], mode, _fmt(m.get("mae")), _fmt(m.get("rmse")), _fmt(m.get("r2")), r["status"]))
        _write_csv(out / "utility.csv", ["learner", "mode", "mae", "rmse", "r2", "status"], rows)
        written.append(out / "utility.csv")
    (out / "summary.md").write_text(summary_markdown(report), encoding="utf-8")
    written.append(out / "summary.md")
    return written


def summary_markdown(reports) -> str:
    """Markdown tables, one per stage: a row per metric and a column per
    labelled report (a single report may be passed bare)."""
    if "provenance" in reports:
        reports = {reports["provenance"].get("label", "this run"): reports}
    labels = list(reports)

    def table(title, rows):
        head = [f"## {title}", "", "| metric | " + " | ".join(labels) + " |",
                "|---|" + "---|" * len(labels)]
        return head + [f"| {name} | " + " | ".join(cells) + " |" for name, cells in rows] + [""]

    def pct(v):
        return "n/a" if v is None else f"{100 * v:.2f}%"

    def num(v):
        return "n/a" if v is None else f"{v:.3f}"

    def get(report, *path):
        for key in path:
            if not isinstance(report, dict) or key not in report:
                return None
            report = report[key]
        return report

    def present(stage):
        return any(get(r, stage, "status") != "absent" and stage in r for r in reports.values())

    lines = ["# Evaluation summary", ""]
    if present("statistical"):
        lines += table("Statistical similarity", [
            (name, [pct(get(r, "statistical", "aggregate", key)) for r in reports.values()])
            for name, key in (("Marginal", "marginal"), ("Bivariate", "bivariate"), ("Average", "average"))])
    if present("fidelity"):
        learners = []
        for r in reports.values():
            for c in get(r, "fidelity", "classifiers") or []:
                if c["learner"] not in learners:
                    learners.append(c["learner"])

        def acc(r, name, key):
            hit = [c for c in get(r, "fidelity", "classifiers") or [] if c["learner"] == name]
            return pct(hit[0][key]) if hit else "n/a"

        rows = [(f"{n} accuracy", [acc(r, n, "accuracy") for r in reports.values()]) for n in learners]
        rows += [("Average accuracy", [pct(get(r, "fidelity", "average", "accuracy")) for r in reports.values()]),
                 ("Average F1", [pct(get(r, "fidelity", "average", "f1")) for r in reports.values()])]
        lines += table("Fidelity (lower is better)", rows)
    if present("utility"):
        rows = [(f"{mode.upper()} {key.upper()}", [num(get(r, "utility", "average", mode, key))
                                                   for r in reports.values()])
                for mode in ("trtr", "tstr") for key in ("mae", "rmse", "r2")]
        lines += table("Utility", rows)
    if present("diversity"):
        rows = []
        for col in LABEL_COLUMNS:
            for key, name in (("real_pct", "real"), ("synthetic_pct", "synthetic")):
                cells = []
                for r in reports.values():
                    hit = [b for b in get(r, "diversity", "class_balance") or []
                           if b["column"] == col and b["label"] == "1"]
                    cells.append(f"{hit[0][key]:.1f}%" if hit else "n/a")
                rows.append((f"{col} = 1 ({name})", cells))
        rows.append(("Routes covered", [
            "n/a" if get(r, "diversity", "routes") is None
            else f"{r['diversity']['routes']['covered']} of {r['diversity']['routes']['real']}"
            for r in reports.values()]))
        lines += table("Diversity", rows)
    return "\n".join(lines)
