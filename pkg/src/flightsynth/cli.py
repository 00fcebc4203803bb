"""Command-line surface: make-mock, ingest, fit, sample, reconstruct,
evaluate, summarize and pipeline.

Exit codes: 0 success, 1 a configured quality gate failed, 2 operational
error.  One master seed drives a run; each stage gets its own seed derived
from the master seed and the stage name.  Every artifact gets a
``<file>.prov.json`` sidecar (config hash, seeds, tool version) and the
pipeline writes ``manifest.json`` listing every artifact with its sha256.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .copula import DEFAULT_CAP, FittedCopula, gc_fit, gc_sample, subsample
from .evaluate import (
    STAGES, assemble_report, diversity_stage, fidelity_stage, statistical_stage, summary_markdown,
    utility_stage, write_report,
)
from .ingest import FRAMES, VARIANTS, AirportDirectory, RouteDirectory, build_frame, ingest, read_raw_mapping
from .learners import CLASSIFIERS, REGRESSORS, LearnerSpec
from .mock import write_mock
from .numkit import rng_stream
from .reconstruct import FILTER_ORDER, FilterConfig, reconstruct, reject_invalid, write_rejected
from .table import Table, read_table, schema_path_for, write_table
from .tvae import TrainConfig, TvaeModel, tvae_fit, tvae_sample

log = logging.getLogger("flightsynth")

OUT_ENV = "FLIGHTSYNTH_OUT"
# preset -> (generator, frame variant, train row cap)
PRESETS = {
    1: ("tvae", "utc_ts", None),
    2: ("tvae", "utc_d", None),
    3: ("tvae", "utc_d_2", None),
    4: ("gc", "utc_ts", DEFAULT_CAP),
    5: ("gc", "utc_d_2", DEFAULT_CAP),
}
GATES = ("statistical_average_min", "fidelity_accuracy_max", "class_balance_gap_max")
_TVAE_KEYS = set(TrainConfig.__dataclass_fields__) - {"seed", "trace_path"}
_PATH_FIELDS = ("data", "airports", "mapping", "out")
# arguments that only locate files; left out of the config hash
_ARG_PATHS = {"out", "verbose", "raw", "airports", "mapping", "frame", "model", "routes", "real",
              "synthetic", "config", "data"}


class CliError(ValueError):
    pass


class GateFailure(Exception):
    pass


# -- config -----------------------------------------------------------------------------------
@dataclass
class ExperimentConfig:
    experiment: int | None = None
    generator: str = "gc"
    variant: str = "utc_d_2"
    cap: int | None = DEFAULT_CAP
    n_samples: int | None = None  # default: as many rows as the fit input
    tvae: dict = field(default_factory=dict)
    sampling: dict = field(default_factory=lambda: {"stochastic": False, "noise": False})
    filters: dict = field(default_factory=dict)
    stages: list = field(default_factory=lambda: list(STAGES))
    classifiers: list = field(default_factory=lambda: list(CLASSIFIERS))
    regressors: list = field(default_factory=lambda: list(REGRESSORS))
    gates: dict = field(default_factory=dict)
    seed: int = 0
    mock_rows: int | None = None
    data: str | None = None
    airports: str | None = None
    mapping: str | None = None
    out: str | None = None

    def __post_init__(self):
        if self.experiment is not None:
            if self.experiment not in PRESETS:
                raise CliError(f"unknown preset {self.experiment}; choose from {sorted(PRESETS)}")
        if self.generator not in ("gc", "tvae"):
            raise CliError(f"generator must be 'gc' or 'tvae', got {self.generator!r}")
        if self.variant not in VARIANTS:
            raise CliError(f"unknown frame variant {self.variant!r}; choose from {list(VARIANTS)}")
        if self.generator == "gc" and (self.cap is None or self.cap < 1):
            raise CliError("the Gaussian copula needs a positive row cap")
        if self.n_samples is not None and self.n_samples < 1:
            raise CliError("n_samples must be >= 1")
        unknown = set(self.tvae) - _TVAE_KEYS
        if unknown:
            raise CliError(f"unknown tvae setting(s) {sorted(unknown)}")
        TrainConfig(**self.tvae)
        unknown = set(self.sampling) - {"stochastic", "noise"}
        if unknown:
            raise CliError(f"unknown sampling setting(s) {sorted(unknown)}")
        self.filter_config()
        bad = [s for s in self.stages if s not in STAGES]
        if bad:
            raise CliError(f"unknown evaluation stage(s) {bad}; choose from {list(STAGES)}")
        self.learner_specs("classifiers", 0)
        self.learner_specs("regressors", 0)
        bad = [g for g in self.gates if g not in GATES]
        if bad:
            raise CliError(f"unknown gate(s) {bad}; choose from {list(GATES)}")

    @classmethod
    def preset(cls, number: int, **overrides) -> "ExperimentConfig":
        if number not in PRESETS:
            raise CliError(f"unknown preset {number}; choose from {sorted(PRESETS)}")
        generator, variant, cap = PRESETS[number]
        for key, bound in (("generator", generator), ("variant", variant), ("cap", cap)):
            if key in overrides and overrides[key] != bound:
                raise CliError(f"preset {number} binds {key}={bound!r}; got {overrides[key]!r}")
        overrides.update(generator=generator, variant=variant, cap=cap)
        return cls(experiment=number, **overrides)

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise CliError(f"unknown config field(s) {sorted(unknown)}")
        obj = dict(obj)
        if obj.get("experiment") is not None:
            return cls.preset(int(obj.pop("experiment")), **obj)
        return cls(**obj)

    def to_json(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """sha256 of the settings that shape the results (paths excluded)."""
        body = {k: v for k, v in self.to_json().items() if k not in _PATH_FIELDS}
        return _hash_obj(body)

    def filter_config(self) -> FilterConfig:
        kw = dict(self.filters)
        if "speed_band_mph" in kw:
            kw["speed_band_mph"] = tuple(kw["speed_band_mph"])
        try:
            return FilterConfig(**kw)
        except TypeError as exc:
            raise CliError(f"bad filter settings: {exc}") from None

    def learner_specs(self, roster: str, seed: int) -> list[LearnerSpec]:
        specs = []
        for entry in getattr(self, roster):
            if isinstance(entry, str):
                entry = {"name": entry}
            spec = LearnerSpec(entry["name"], entry.get("params", {}), seed)
            if spec.is_classifier != (roster == "classifiers"):
                raise CliError(f"{spec.name} does not belong in {roster}")
            specs.append(spec)
        return specs


def _hash_obj(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def stage_seed(master: int, stage: str) -> int:
    """Per-stage seed: the stage name hashed into a stream id of the master seed."""
    stream = int(hashlib.sha256(stage.encode()).hexdigest()[:15], 16)
    return int(rng_stream(master, stream).integers(0, 2**31 - 1))


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- artifacts ----------------------------------------------------------------------------------
class Recorder:
    """Writes provenance sidecars and collects the manifest entries."""

    def __init__(self, root, config_hash: str, master_seed: int):
        self.root = Path(root)
        self.config_hash = config_hash
        self.master_seed = master_seed
        self.artifacts: list[dict] = []
        self.completed: list[str] = []
        self.notes: list[str] = []

    def record(self, path, stage: str, seed: int | None) -> None:
        path = Path(path)
        prov = {"artifact": path.name, "stage": stage, "config_hash": self.config_hash,
                "master_seed": self.master_seed, "stage_seed": seed,
                "tool": "flightsynth", "version": __version__}
        side = path.with_name(path.name + ".prov.json")
        side.write_text(json.dumps(prov, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        for p in (path, side):
            self.artifacts.append({"path": self._rel(p), "stage": stage, "sha256": file_sha256(p),
                                   "bytes": p.stat().st_size})

    def table(self, table: Table, path, stage: str, seed: int | None) -> Path:
        path = Path(path)
        write_table(table, path, schema_path_for(path))
        self.record(path, stage, seed)
        self.record(schema_path_for(path), stage, seed)
        return path

    def _rel(self, p: Path) -> str:
        try:
            return p.resolve().relative_to(self.root.resolve()).as_posix()
        except ValueError:
            return str(p)

    def manifest(self, config: dict, failure: dict | None = None) -> dict:
        return {"tool": "flightsynth", "version": __version__, "config_hash": self.config_hash,
                "master_seed": self.master_seed, "config": config, "completed_stages": self.completed,
                "failed_stage": failure, "notes": self.notes, "artifacts": self.artifacts}


def _require(path, what: str) -> Path:
    if path is None:
        raise CliError(f"{what} is required")
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{what} not found: {p}")
    return p


def _load_table(path, what="table") -> Table:
    p = _require(path, what)
    return read_table(p, _require(schema_path_for(p), f"schema sidecar for {p}"))


def _out_dir(arg) -> Path:
    out = arg or os.environ.get(OUT_ENV)
    if not out:
        raise CliError(f"no output directory: pass --out or set {OUT_ENV}")
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _infer_variant(table: Table) -> str:
    for name, cols in FRAMES.items():
        if sorted(cols) == sorted(table.names):
            return name
    raise CliError(f"columns {table.names} match no frame variant")


def _load_model(path):
    p = _require(path, "model file")
    obj = json.loads(p.read_text(encoding="utf-8"))
    kind = obj.get("kind")
    if kind == "tvae":
        return TvaeModel.from_json(obj)
    if kind == "gaussian_copula":
        return FittedCopula.from_json(obj)
    raise CliError(f"{p}: unknown model kind {kind!r}")


# -- stage bodies (shared by the single commands and the pipeline) ------------------------------
def run_ingest(raw, airports_path, mapping_path, frames, out: Path, rec: Recorder, seed=None):
    airports = AirportDirectory.read(_require(airports_path, "airports file"))
    mapping = read_raw_mapping(_require(mapping_path, "mapping file")) if mapping_path else None
    flights, routes, report = ingest(_require(raw, "raw flight CSV"), airports, mapping)
    rec.table(flights, out / "flights.csv", "ingest", seed)
    routes.write(out / "routes.csv")
    rec.record(out / "routes.csv", "ingest", seed)
    (out / "ingest_report.json").write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
    rec.record(out / "ingest_report.json", "ingest", seed)
    for variant in frames:
        rec.table(build_frame(flights, variant), out / f"frame_{variant}.csv", "ingest", seed)
    return flights, routes, airports


def run_fit(frame: Table, generator: str, cap, tvae_settings: dict, seed: int, out: Path, rec: Recorder,
            trace=True):
    if generator == "gc":
        if frame.n_rows > cap:
            rec.notes.append(f"fit: subsampled {frame.n_rows} rows to {cap} before the copula fit (seed {seed})")
            log.info("fit: subsampling %d rows to %d", frame.n_rows, cap)
            frame = subsample(frame, cap, seed)
        model = gc_fit(frame, seed=seed, cap=cap)
    else:
        if cap is not None and frame.n_rows > cap:
            rec.notes.append(f"fit: subsampled {frame.n_rows} rows to {cap} before training (seed {seed})")
            frame = subsample(frame, cap, seed)
        cfg = TrainConfig(**{**tvae_settings, "seed": seed,
                             "trace_path": str(out / "training_trace.csv") if trace else None})
        model = tvae_fit(frame, cfg)
    path = out / "model.json"
    model.save(path)
    rec.record(path, "fit", seed)
    if generator == "tvae" and trace:
        rec.record(out / "training_trace.csv", "fit", seed)
    return model, frame.n_rows


def run_sample(model, n: int, seed: int, sampling: dict, out: Path, rec: Recorder) -> Table:
    stats: dict = {}
    if isinstance(model, TvaeModel):
        table = tvae_sample(model, n, seed, stats=stats, **sampling)
    else:
        table = gc_sample(model, n, seed, stats=stats)
    if stats:
        log.info("sample: decode adjustments %s", stats)
    rec.table(table, out / "sampled.csv", "sample", seed)
    return table


def run_reconstruct(frame: Table, variant, airports, routes, cfg: FilterConfig, out: Path, rec: Recorder):
    variant = variant or _infer_variant(frame)
    full = reconstruct(frame, variant, airports, routes)
    rec.table(full, out / "reconstructed.csv", "reconstruct", None)
    cleaned, report, rejected = reject_invalid(full, routes, cfg)
    rec.table(cleaned, out / "cleaned.csv", "reconstruct", None)
    report.write(out / "cleaning_report.json")
    rec.record(out / "cleaning_report.json", "reconstruct", None)
    write_rejected(rejected, out / "rejected_routes.csv")
    rec.record(out / "rejected_routes.csv", "reconstruct", None)
    return cleaned, report


def run_evaluate(real: Table, synth: Table, stages, classifiers, regressors, seed: int, out: Path,
                 rec: Recorder, provenance: dict) -> dict:
    sections = {}
    for stage in STAGES:
        if stage not in stages:
            continue
        log.info("evaluate: %s stage", stage)
        if stage == "diversity":
            sections[stage] = diversity_stage(real, synth)
        elif stage == "statistical":
            sections[stage] = statistical_stage(real, synth)
        elif stage == "fidelity":
            sections[stage] = fidelity_stage(real, synth, classifiers, seed)
        else:
            sections[stage] = utility_stage(real, synth, regressors, seed)
    provenance = {**provenance, "evaluation_seed": seed,
                  "real_fingerprint": real.fingerprint(), "synthetic_fingerprint": synth.fingerprint()}
    report = assemble_report(**sections, provenance=provenance)
    for path in write_report(report, out):
        rec.record(path, "evaluate", seed)
    return report


def check_gates(report: dict, gates: dict) -> list[str]:
    failures = []
    st = report.get("statistical", {}).get("aggregate", {})
    if "statistical_average_min" in gates and st:
        if st["average"] is None or st["average"] < gates["statistical_average_min"]:
            failures.append(f"statistical average {st['average']} < {gates['statistical_average_min']}")
    fi = report.get("fidelity", {}).get("average", {})
    if "fidelity_accuracy_max" in gates and fi:
        if fi["accuracy"] is None or fi["accuracy"] > gates["fidelity_accuracy_max"]:
            failures.append(f"fidelity accuracy {fi['accuracy']} > {gates['fidelity_accuracy_max']}")
    if "class_balance_gap_max" in gates:
        for b in report.get("diversity", {}).get("class_balance", []):
            if b["gap_pct"] > gates["class_balance_gap_max"]:
                failures.append(f"class balance gap {b['gap_pct']:.2f} points for {b['column']}={b['label']}")
    return failures


# -- pipeline -----------------------------------------------------------------------------------
def run_pipeline(cfg: ExperimentConfig, out: Path) -> dict:
    """ingest -> fit -> sample -> reconstruct -> evaluate.  Writes the
    manifest even when a stage fails (recording the completed stages)."""
    rec = Recorder(out, cfg.config_hash(), cfg.seed)
    config = cfg.to_json()
    stage = "input"
    try:
        if cfg.data is None:
            if cfg.mock_rows is None:
                raise CliError("pipeline needs --data (raw flight CSV) or --mock-rows")
            raw, airports_path = write_mock(out / "input", cfg.mock_rows, stage_seed(cfg.seed, "mock"))
            rec.record(raw, "input", stage_seed(cfg.seed, "mock"))
            rec.record(airports_path, "input", stage_seed(cfg.seed, "mock"))
        else:
            raw, airports_path = _require(cfg.data, "raw flight CSV"), cfg.airports
            rec.notes.append(f"input {Path(raw).name} sha256 {file_sha256(raw)}")
        rec.completed.append(stage)

        stage = "ingest"
        d = out / "ingest"
        d.mkdir(parents=True, exist_ok=True)
        flights, routes, airports = run_ingest(raw, airports_path, cfg.mapping, [cfg.variant], d, rec)
        frame = build_frame(flights, cfg.variant)
        rec.completed.append(stage)

        stage = "fit"
        d = out / "fit"
        d.mkdir(exist_ok=True)
        model, n_fit = run_fit(frame, cfg.generator, cfg.cap, cfg.tvae, stage_seed(cfg.seed, "fit"), d, rec)
        rec.completed.append(stage)

        stage = "sample"
        d = out / "sample"
        d.mkdir(exist_ok=True)
        n = cfg.n_samples or n_fit
        sampled = run_sample(model, n, stage_seed(cfg.seed, "sample"), cfg.sampling, d, rec)
        rec.completed.append(stage)

        stage = "reconstruct"
        d = out / "reconstruct"
        d.mkdir(exist_ok=True)
        cleaned, report = run_reconstruct(sampled, cfg.variant, airports, routes, cfg.filter_config(), d, rec)
        rec.completed.append(stage)

        stage = "evaluate"
        d = out / "evaluate"
        d.mkdir(exist_ok=True)
        seed = stage_seed(cfg.seed, "evaluate")
        prov = {"label": f"Experiment {cfg.experiment}" if cfg.experiment else "custom",
                "config_hash": rec.config_hash, "master_seed": cfg.seed,
                "generator": cfg.generator, "variant": cfg.variant,
                "stage_seeds": {s: stage_seed(cfg.seed, s) for s in ("fit", "sample", "evaluate")}}
        result = run_evaluate(flights, cleaned, cfg.stages, cfg.learner_specs("classifiers", seed),
                              cfg.learner_specs("regressors", seed), seed, d, rec, prov)
        rec.completed.append(stage)
    except Exception as exc:
        _write_manifest(out, rec.manifest(config, {"stage": stage, "error": str(exc)}))
        raise
    _write_manifest(out, rec.manifest(config))
    return {"report": result, "cleaning": report, "sampled": sampled, "cleaned": cleaned, "flights": flights}


def _write_manifest(out: Path, manifest: dict) -> None:
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


# -- argument parsing ---------------------------------------------------------------------------
def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flightsynth", description="Synthetic flight records and their evaluation.")
    p.add_argument("--version", action="version", version=f"flightsynth {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("make-mock", help="write a deterministic mock flight CSV and airport directory")
    s.add_argument("--rows", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")

    s = sub.add_parser("ingest", help="clean raw flights and build generator frames")
    s.add_argument("--raw", required=True)
    s.add_argument("--airports", required=True)
    s.add_argument("--mapping", help="JSON mapping raw header -> canonical name")
    s.add_argument("--frame", default="all", choices=list(VARIANTS) + ["all"])
    s.add_argument("--out")

    s = sub.add_parser("fit", help="fit a generator to a frame")
    s.add_argument("--frame", required=True, help="frame CSV (schema sidecar alongside)")
    s.add_argument("--generator", required=True, choices=["gc", "tvae"])
    s.add_argument("--cap", type=int, default=DEFAULT_CAP, help="row cap for the copula (subsampled above it)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--mode-normalize", action="store_true")
    s.add_argument("--kl-warmup", action="store_true")
    s.add_argument("--out")

    s = sub.add_parser("sample", help="draw synthetic rows from a fitted model")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--stochastic", action="store_true", help="TVAE: draw categories instead of argmax")
    s.add_argument("--noise", action="store_true", help="TVAE: add decoder noise to continuous outputs")
    s.add_argument("--out")

    s = sub.add_parser("reconstruct", help="rebuild the full flight table and drop invalid rows")
    s.add_argument("--frame", required=True)
    s.add_argument("--variant", choices=list(VARIANTS), help="inferred from the columns when omitted")
    s.add_argument("--airports", required=True)
    s.add_argument("--routes", required=True)
    s.add_argument("--filters", type=_csv_list, default=list(FILTER_ORDER))
    s.add_argument("--out")

    s = sub.add_parser("evaluate", help="score a cleaned synthetic table against the real one")
    s.add_argument("--real", required=True)
    s.add_argument("--synthetic", required=True)
    s.add_argument("--stages", type=_csv_list, default=list(STAGES))
    s.add_argument("--classifiers", type=_csv_list, default=list(CLASSIFIERS))
    s.add_argument("--regressors", type=_csv_list, default=list(REGRESSORS))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--label", default="this run")
    s.add_argument("--out")

    s = sub.add_parser("summarize", help="side-by-side markdown of several report.json files")
    s.add_argument("reports", nargs="+", metavar="LABEL=REPORT.json")

    s = sub.add_parser("pipeline", help="ingest, fit, sample, reconstruct and evaluate in one run")
    s.add_argument("--preset", type=int, choices=sorted(PRESETS))
    s.add_argument("--config", help="ExperimentConfig JSON")
    s.add_argument("--data", help="raw flight CSV")
    s.add_argument("--airports")
    s.add_argument("--mapping")
    s.add_argument("--mock-rows", type=int, help="generate a mock input of this many rows instead of --data")
    s.add_argument("--seed", type=int)
    s.add_argument("--n-samples", type=int)
    s.add_argument("--epochs", type=int, help="TVAE epochs")
    s.add_argument("--stages", type=_csv_list)
    s.add_argument("--out")
    return p


def _standalone(out: Path, args, seed) -> Recorder:
    body = {k: v for k, v in vars(args).items() if k not in _ARG_PATHS}
    return Recorder(out, _hash_obj(body), seed)


def cmd_make_mock(args) -> int:
    out = _out_dir(args.out)
    raw, ap = write_mock(out, args.rows, args.seed)
    rec = _standalone(out, args, args.seed)
    rec.record(raw, "make-mock", args.seed)
    rec.record(ap, "make-mock", args.seed)
    print(raw)
    return 0


def cmd_ingest(args) -> int:
    out = _out_dir(args.out)
    frames = list(VARIANTS) if args.frame == "all" else [args.frame]
    run_ingest(args.raw, args.airports, args.mapping, frames, out, _standalone(out, args, None))
    return 0


def cmd_fit(args) -> int:
    out = _out_dir(args.out)
    frame = _load_table(args.frame, "frame CSV")
    settings = {k: v for k, v in (("epochs", args.epochs), ("batch_size", args.batch_size)) if v is not None}
    if args.mode_normalize:
        settings["mode_normalize"] = True
    if args.kl_warmup:
        settings["kl_warmup"] = True
    if args.generator == "gc" and settings:
        raise CliError("--epochs/--batch-size/--mode-normalize/--kl-warmup apply to tvae only")
    rec = _standalone(out, args, args.seed)
    run_fit(frame, args.generator, args.cap, settings, args.seed, out, rec)
    for note in rec.notes:
        log.info(note)
    return 0


def cmd_sample(args) -> int:
    out = _out_dir(args.out)
    model = _load_model(args.model)
    if isinstance(model, FittedCopula) and (args.stochastic or args.noise):
        raise CliError("--stochastic/--noise apply to tvae models only")
    sampling = {"stochastic": args.stochastic, "noise": args.noise} if isinstance(model, TvaeModel) else {}
    run_sample(model, args.n, args.seed, sampling, out, _standalone(out, args, args.seed))
    return 0


def cmd_reconstruct(args) -> int:
    out = _out_dir(args.out)
    frame = _load_table(args.frame, "frame CSV")
    airports = AirportDirectory.read(_require(args.airports, "airports file"))
    routes = RouteDirectory.read(_require(args.routes, "route directory"))
    run_reconstruct(frame, args.variant, airports, routes, FilterConfig(tuple(args.filters)), out,
                    _standalone(out, args, None))
    return 0


def cmd_evaluate(args) -> int:
    out = _out_dir(args.out)
    real = _load_table(args.real, "real table")
    synth = _load_table(args.synthetic, "synthetic table")
    cfg = ExperimentConfig(stages=args.stages, classifiers=args.classifiers, regressors=args.regressors,
                           seed=args.seed)
    rec = _standalone(out, args, args.seed)
    run_evaluate(real, synth, cfg.stages, cfg.learner_specs("classifiers", args.seed),
                 cfg.learner_specs("regressors", args.seed), args.seed, out, rec,
                 {"label": args.label, "config_hash": rec.config_hash})
    return 0


def cmd_summarize(args) -> int:
    reports = {}
    for item in args.reports:
        label, sep, path = item.partition("=")
        if not sep:
            label, path = Path(item).parent.name or item, item
        reports[label] = json.loads(_require(path, "report file").read_text(encoding="utf-8"))
    sys.stdout.write(summary_markdown(reports))
    return 0


def cmd_pipeline(args) -> int:
    obj = {}
    if args.config:
        obj = json.loads(_require(args.config, "config file").read_text(encoding="utf-8"))
        if not isinstance(obj, dict):
            raise CliError("config file must hold a JSON object")
    if args.preset is not None:
        if obj.get("experiment") not in (None, args.preset):
            raise CliError(f"--preset {args.preset} conflicts with config experiment {obj['experiment']}")
        obj["experiment"] = args.preset
    for key in ("data", "airports", "mapping", "mock_rows", "seed", "n_samples", "stages"):
        value = getattr(args, key)
        if value is not None:
            obj[key] = value
    if args.epochs is not None:
        obj["tvae"] = {**obj.get("tvae", {}), "epochs": args.epochs}
    cfg = ExperimentConfig.from_json(obj)
    if cfg.data is not None and cfg.airports is None:
        raise CliError("--airports is required with --data")
    out = _out_dir(args.out or cfg.out)
    result = run_pipeline(cfg, out)
    failures = check_gates(result["report"], cfg.gates)
    if failures:
        raise GateFailure("; ".join(failures))
    print(out / "manifest.json")
    return 0


COMMANDS = {
    "make-mock": cmd_make_mock, "ingest": cmd_ingest, "fit": cmd_fit, "sample": cmd_sample,
    "reconstruct": cmd_reconstruct, "evaluate": cmd_evaluate, "summarize": cmd_summarize,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except GateFailure as exc:
        print(f"quality gate failed: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
