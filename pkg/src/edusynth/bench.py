"""Benchmark harness: configuration, orchestration of the six generators,
Table-style reports and KDE exports."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .dataset import Schema, SchemaError, Table, load_csv, seed_dataset, student_schema
from .generators import (
    GenTrainConfig,
    copulagan_config,
    dae_config,
    fit_and_generate,
    vae_config,
)
from .metrics import JSD_BINS, FidelityReport, fidelity_report
from .resample import ResampleConfig, resample
from .utility import TSTRResult, UtilityScores, split_holdout, tstr, utility_scores

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = "1"
METHODS = ("smote", "bootstrap", "ros", "dae", "vae", "copulagan")
DISPLAY_NAMES = {
    "smote": "SMOTE",
    "bootstrap": "Bootstrap",
    "ros": "Oversampling",
    "dae": "Autoencoder",
    "vae": "VAE",
    "copulagan": "CopulaGAN",
}
_RESAMPLER = {"smote": "smote", "bootstrap": "bootstrap", "ros": "oversample"}
_OVERRIDE_KEYS = {
    "smote": {"k_neighbors"},
    "bootstrap": {"n_bootstrap_replicates"},
    "ros": set(),
    "dae": {"epochs", "batch_size", "learning_rate"},
    "vae": {"epochs", "batch_size", "learning_rate"},
    "copulagan": {"epochs", "batch_size", "learning_rate"},
}


class ConfigError(ValueError):
    """Invalid or unreadable benchmark configuration."""


def derive_seed(master: int, name: str) -> int:
    """Stable 31-bit seed from (master seed, name)."""
    digest = hashlib.sha256(f"{int(master)}:{name}".encode()).digest()
    return int.from_bytes(digest[:4], "big") & 0x7FFFFFFF


# --------------------------------------------------------------------------- config


@dataclass(frozen=True)
class BenchmarkConfig:
    methods: tuple[str, ...]
    rows: int = 10000
    seed: int = 42
    input: Optional[str] = None
    seed_rows: int = 2000
    seed_data_seed: int = 42
    schema: Schema = field(default_factory=student_schema)
    output_dir: str = "bench-out"
    test_fraction: float = 0.30
    jsd_bins: int = JSD_BINS
    n_trees_classifier: int = 200
    n_trees_regressor: int = 300
    total_is_sum: bool = False
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.methods:
            raise ConfigError("methods must be non-empty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {list(METHODS)}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods must not repeat")
        if self.rows < 1:
            raise ConfigError("rows must be >= 1")
        if self.seed_rows < 10:
            raise ConfigError("seed_rows must be >= 10")
        for m, ov in self.overrides.items():
            if m not in METHODS:
                raise ConfigError(f"override for unknown method {m!r}")
            bad = set(ov) - _OVERRIDE_KEYS[m]
            if bad:
                raise ConfigError(f"unsupported overrides for {m}: {sorted(bad)}")

    def canonical(self) -> dict:
        d = {
            "methods": list(self.methods),
            "rows": self.rows,
            "seed": self.seed,
            "input": self.input,
            "seed_rows": self.seed_rows,
            "seed_data_seed": self.seed_data_seed,
            "schema": self.schema.to_dict(),
            "test_fraction": self.test_fraction,
            "jsd_bins": self.jsd_bins,
            "n_trees_classifier": self.n_trees_classifier,
            "n_trees_regressor": self.n_trees_regressor,
            "total_is_sum": self.total_is_sum,
            "overrides": {k: dict(sorted(v.items())) for k, v in sorted(self.overrides.items())},
        }
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_schema(path) -> Schema:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read schema file {path}: {exc.strerror}") from None
    try:
        doc = json.loads(raw) if path.suffix == ".json" else tomllib.loads(raw.decode("utf-8"))
        return Schema.from_dict(doc)
    except (ValueError, SchemaError) as exc:
        raise ConfigError(f"invalid schema file {path}: {exc}") from None


def load_config(path) -> BenchmarkConfig:
    """Read a TOML benchmark config; relative paths resolve against its directory."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    base = path.parent
    data = doc.get("data", {})
    run = doc.get("run", {})
    unknown = set(doc) - {"data", "run", "schema", "overrides"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    def rel(p):
        return None if p is None else str((base / p) if not os.path.isabs(p) else Path(p))

    if "schema" in doc:
        try:
            schema = Schema.from_dict(doc["schema"])
        except SchemaError as exc:
            raise ConfigError(f"invalid inline schema: {exc}") from None
    elif "schema" in data:
        schema = load_schema(rel(data["schema"]))
    else:
        schema = student_schema()
    try:
        schema = schema.with_targets(run.get("class_target"), run.get("regression_target"))
        return BenchmarkConfig(
            methods=tuple(run.get("methods", ())),
            rows=int(run.get("rows", 10000)),
            seed=int(run.get("seed", 42)),
            input=rel(data.get("input")),
            seed_rows=int(data.get("seed_rows", 2000)),
            seed_data_seed=int(data.get("seed", 42)),
            schema=schema,
            output_dir=rel(run.get("output_dir", "bench-out")),
            test_fraction=float(run.get("test_fraction", 0.30)),
            jsd_bins=int(run.get("jsd_bins", JSD_BINS)),
            n_trees_classifier=int(run.get("n_trees_classifier", 200)),
            n_trees_regressor=int(run.get("n_trees_regressor", 300)),
            total_is_sum=bool(run.get("total_is_sum", False)),
            overrides={k: dict(v) for k, v in doc.get("overrides", {}).items()},
        )
    except SchemaError as exc:
        raise ConfigError(str(exc)) from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid value in {path}: {exc}") from None


def load_real(cfg: BenchmarkConfig) -> Table:
    if cfg.input is None:
        return seed_dataset(cfg.seed_rows, cfg.seed_data_seed)
    try:
        table, rep = load_csv(cfg.input, cfg.schema)
    except FileNotFoundError:
        raise ConfigError(f"input CSV not found: {cfg.input}") from None
    if rep.dropped:
        log.info("dropped %d rows from %s (%s)", rep.dropped, cfg.input, rep)
    return table


# --------------------------------------------------------------------------- generation


def generate(method: str, table: Table, rows: int, seed: int, overrides: Optional[dict] = None,
             total_is_sum: bool = False) -> Table:
    """Produce ``rows`` synthetic rows from ``table`` with one of ``METHODS``."""
    overrides = dict(overrides or {})
    target = table.schema.class_target
    if method in _RESAMPLER:
        cfg = ResampleConfig(method=_RESAMPLER[method], target_rows=rows, seed=seed, **overrides)
        return resample(table, target, cfg)
    factory = {"dae": dae_config, "vae": vae_config, "copulagan": copulagan_config}[method]
    extra = {}
    if total_is_sum:
        parts = [n for n in table.schema.continuous_names if n != table.schema.regression_target]
        extra = {"derived_total": table.schema.regression_target, "sum_of": tuple(parts)}
    gen_cfg: GenTrainConfig = factory(seed=seed, **overrides, **extra)
    return fit_and_generate(method, table, rows, seed, gen_cfg)


# --------------------------------------------------------------------------- report


@dataclass
class MethodResult:
    method: str
    seed: int
    rows: int
    fidelity: Optional[FidelityReport] = None
    tstr: Optional[TSTRResult] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "rows": self.rows,
            "fidelity": self.fidelity.to_dict() if self.fidelity else None,
            "tstr": self.tstr.to_dict() if self.tstr else None,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MethodResult":
        return cls(
            d["method"],
            d["seed"],
            d["rows"],
            FidelityReport.from_dict(d["fidelity"]) if d["fidelity"] else None,
            TSTRResult.from_dict(d["tstr"]) if d["tstr"] else None,
            d["error"],
        )


@dataclass
class RunReport:
    methods: list[MethodResult]
    config: dict
    config_hash: str
    baseline: Optional[UtilityScores] = None
    holdout: dict = field(default_factory=dict)
    version: str = __version__
    timing: dict = field(default_factory=dict)

    def result(self, method: str) -> MethodResult:
        for r in self.methods:
            if r.method == method:
                return r
        raise KeyError(method)

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "environment": {"package": "edusynth", "version": self.version, "config_hash": self.config_hash},
            "config": self.config,
            "holdout": self.holdout,
            "baseline": asdict(self.baseline) if self.baseline else None,
            "methods": [m.to_dict() for m in self.methods],
        }
        if include_timing:
            d["timing"] = self.timing
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        if d.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema version {d.get('schema_version')!r}")
        env = d["environment"]
        return cls(
            [MethodResult.from_dict(m) for m in d["methods"]],
            d["config"],
            env["config_hash"],
            UtilityScores(**d["baseline"]) if d["baseline"] else None,
            d["holdout"],
            env["version"],
            d.get("timing", {}),
        )

    def __eq__(self, other):
        if not isinstance(other, RunReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def emit_json(report: RunReport, include_timing: bool = True) -> bytes:
    return (json.dumps(report.to_dict(include_timing), indent=2, sort_keys=True) + "\n").encode("utf-8")


def parse_json(blob) -> RunReport:
    return RunReport.from_dict(json.loads(blob))


MARKDOWN_COLUMNS = (
    "Method", "KS↓", "Wasserstein↓", "JS↓", "TSTR↑",
    "Cat. Fidelity↑", "DCR↑", "ML Utility↑",
)


def emit_markdown(report: RunReport) -> str:
    """Table with one row per method; errored methods show their error."""
    lines = [
        "| " + " | ".join(MARKDOWN_COLUMNS) + " |",
        "|" + "|".join(["---"] + [":---:"] * (len(MARKDOWN_COLUMNS) - 1)) + "|",
    ]
    for r in report.methods:
        name = DISPLAY_NAMES.get(r.method, r.method)
        if r.error or r.fidelity is None or r.tstr is None:
            lines.append(f"| {name} | " + " | ".join(["n/a"] * 7) + " |")
            continue
        f, t = r.fidelity, r.tstr
        cells = [
            f"{f.mean_ks:.2f}", f"{f.mean_wasserstein:.2f}", f"{f.mean_jsd:.2f}",
            f"{t.classification_accuracy:.3f}", f"{f.categorical_fidelity:.3f}",
            f"{f.dcr_score:.2f}", f"{t.ml_utility:.2f}",
        ]
        lines.append(f"| {name} | " + " | ".join(cells) + " |")
    if report.baseline is not None:
        b = report.baseline
        lines.append("")
        lines.append(
            f"Train-on-real baseline: accuracy {b.classification_accuracy:.3f}, "
            f"R² {b.regression_r2:.3f}, MAE {b.regression_mae:.2f}, ML utility {b.ml_utility:.2f}"
        )
    errors = [r for r in report.methods if r.error]
    for r in errors:
        lines.append(f"\n{DISPLAY_NAMES.get(r.method, r.method)} failed: {r.error}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- KDE


def silverman_bandwidth(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    sd = x.std(ddof=1) if n > 1 else 0.0
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    h = 0.9 * spread * n ** (-0.2)
    return float(h) if h > 0 else 1.0


def gaussian_kde(x: np.ndarray, grid: np.ndarray, bandwidth: Optional[float] = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    h = bandwidth or silverman_bandwidth(x)
    out = np.zeros(len(grid))
    for s in range(0, len(x), 2048):
        u = (grid[:, None] - x[None, s : s + 2048]) / h
        out += np.exp(-0.5 * u * u).sum(axis=1)
    return out / (len(x) * h * np.sqrt(2.0 * np.pi))


@dataclass
class KDECurve:
    method: str
    x: np.ndarray
    density_real: np.ndarray
    density_synth: np.ndarray


def kde_curves(real: Table, synths: dict[str, Table], column: Optional[str] = None,
               points: int = 512) -> list[KDECurve]:
    column = column or real.schema.regression_target
    xr = real[column]
    hr = silverman_bandwidth(xr)
    curves = []
    for method, synth in synths.items():
        xs = synth[column]
        hs = silverman_bandwidth(xs)
        pad = 4.0 * max(hr, hs)
        lo = min(xr.min(), xs.min()) - pad
        hi = max(xr.max(), xs.max()) + pad
        grid = np.linspace(lo, hi, points)
        curves.append(KDECurve(method, grid, gaussian_kde(xr, grid, hr), gaussian_kde(xs, grid, hs)))
    return curves


def emit_kde(real: Table, synths: dict[str, Table], column: Optional[str] = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "x", "density_real", "density_synth"])
    for c in kde_curves(real, synths, column):
        for x, dr, ds in zip(c.x, c.density_real, c.density_synth):
            w.writerow([c.method, repr(float(x)), repr(float(dr)), repr(float(ds))])
    return buf.getvalue()


# --------------------------------------------------------------------------- orchestration


def evaluate_pair(
    real: Table,
    synth: Table,
    holdout: tuple[Table, Table],
    utility_seed: int,
    baseline: Optional[UtilityScores] = None,
    jsd_bins: int = JSD_BINS,
    n_trees_classifier: int = 200,
    n_trees_regressor: int = 300,
) -> tuple[FidelityReport, TSTRResult]:
    fid = fidelity_report(real, synth, bins=jsd_bins)
    res = tstr(
        synth, real, seed=utility_seed, holdout=holdout, baseline=baseline,
        n_trees_classifier=n_trees_classifier, n_trees_regressor=n_trees_regressor,
    )
    return fid, res


def run_bench(cfg: BenchmarkConfig, real: Optional[Table] = None, keep_synthetic: bool = False):
    """Run every configured method against the real data.

    Generators see only the stratified training split; fidelity and privacy
    are measured against the full real table and utility on the held-out split.
    Returns the report, plus the synthetic tables when ``keep_synthetic``.
    """
    real = real if real is not None else load_real(cfg)
    schema = real.schema
    split_seed = derive_seed(cfg.seed, "holdout")
    util_seed = derive_seed(cfg.seed, "utility")
    train, test = split_holdout(real, schema.class_target, cfg.test_fraction, split_seed)
    trees = dict(n_trees_classifier=cfg.n_trees_classifier, n_trees_regressor=cfg.n_trees_regressor)
    baseline = utility_scores(train, test, schema.class_target, schema.regression_target, util_seed, **trees)
    results, timing, synths = [], {}, {}
    for method in cfg.methods:
        mseed = derive_seed(cfg.seed, method)
        start = time.perf_counter()
        try:
            synth = generate(method, train, cfg.rows, mseed, cfg.overrides.get(method), cfg.total_is_sum)
            fid, res = evaluate_pair(real, synth, (train, test), util_seed, baseline, cfg.jsd_bins, **trees)
            results.append(MethodResult(method, mseed, synth.n_rows, fid, res))
            if keep_synthetic:
                synths[method] = synth
        except Exception as exc:  # recorded; remaining methods still run
            log.exception("method %s failed", method)
            results.append(MethodResult(method, mseed, 0, error=f"{type(exc).__name__}: {exc}"))
        timing[method] = round(time.perf_counter() - start, 3)
        log.info("%s finished in %.1fs", method, timing[method])
    report = RunReport(
        results,
        cfg.canonical(),
        cfg.config_hash(),
        baseline,
        {"seed": split_seed, "train_rows": train.n_rows, "test_rows": test.n_rows,
         "utility_seed": util_seed, "real_rows": real.n_rows},
        timing=timing,
    )
    return (report, synths) if keep_synthetic else report


def write_outputs(cfg: BenchmarkConfig, report: RunReport, real: Table, synths: dict[str, Table]) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_bytes(emit_json(report))
    (out / "report.md").write_text(emit_markdown(report), encoding="utf-8")
    if synths:
        (out / "kde.csv").write_text(emit_kde(real, synths), encoding="utf-8")
    manifest = {
        "package": "edusynth",
        "version": __version__,
        "numpy": np.__version__,
        "config_hash": report.config_hash,
        "config": report.config,
        "files": sorted(p.name for p in out.iterdir() if p.name != "manifest.json"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out
