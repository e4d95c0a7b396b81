"""Benchmark pipeline: index build, radius sampling, predictor training and evaluation.

Artifacts written next to the index files:

    sampling.json   per-k terminal-radius histogram and chosen start radius
    training.csv    regressor samples (h0..h{m-1}, k, r_act)
    predictor.bin   trained radius predictor
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from radius_lsh.datasets import brute_force_knn
from radius_lsh.disk_index import DiskIndex, build_index
from radius_lsh.lsh import HashFamily, LSHParams, derive_params, radius_exponent
from radius_lsh.metrics import READ_FACTOR, SEEK_MS, accuracy_ratio, qpt
from radius_lsh.predictor import MLPConfig, RadiusPredictor, load_predictor, save_predictor, train
from radius_lsh.radius_model import (DEFAULT_K_SET, RadiusOracle, TrainingSet, build_histogram,
                                     collect_training_set, select_i2r)
from radius_lsh.schedule import RadiusSchedule, Strategy
from radius_lsh.search import SearchEngine

log = logging.getLogger(__name__)
query_log = logging.getLogger("radius_lsh.query")

SCHEMA_VERSION = 1
SAMPLING_FILE = "sampling.json"
TRAINING_FILE = "training.csv"
PREDICTOR_FILE = "predictor.bin"

# seed streams, so adding draws to one stage never shifts another
_TRAIN_STREAM, _SAMPLE_STREAM, _EVAL_STREAM = 1, 2, 3


class MissingArtifact(Exception):
    pass


@dataclass
class BenchConfig:
    c: float = 2.0
    w: float = 2.184
    delta: float = 0.1
    ks: tuple[int, ...] = DEFAULT_K_SET
    lam: float = 0.1
    training_size: int = 10_000
    page_size: int = 4096
    seed: int = 0
    strategies: tuple[str, ...] = tuple(s.value for s in Strategy)
    queries: int = 50
    sample_size: int = 100
    workers: int = 1
    b_width: str = "squared"
    seek_ms: float = SEEK_MS
    read_factor: float = READ_FACTOR
    hidden: int = 100
    max_epochs: int = 200
    cv_folds: int = 0
    exclude_self: bool = False

    def __post_init__(self):
        self.ks = tuple(int(k) for k in self.ks)
        self.strategies = tuple(Strategy(s).value for s in self.strategies)
        if self.b_width not in ("squared", "linear"):
            raise ValueError("b_width must be 'squared' or 'linear'")

    def mlp_config(self) -> MLPConfig:
        return MLPConfig(hidden=self.hidden, max_epochs=self.max_epochs, seed=self.seed)

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])

    def replace(self, **changes) -> "BenchConfig":
        return dataclasses.replace(self, **changes)


def _coerce(value: str, current):
    if isinstance(current, bool):
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if isinstance(current, tuple):
        items = [v.strip() for v in value.split(",") if v.strip()]
        return tuple(type(current[0])(v) for v in items) if current else tuple(items)
    return type(current)(value)


def parse_config(text: str, base: BenchConfig | None = None) -> BenchConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment, lists are comma separated."""
    base = base or BenchConfig()
    known = {f.name for f in dataclasses.fields(BenchConfig)}
    changes = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        changes[key] = _coerce(value, getattr(base, key))
    return base.replace(**changes)


def load_config(path: str | Path | None, overrides: dict | None = None) -> BenchConfig:
    cfg = parse_config(Path(path).read_text()) if path else BenchConfig()
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    return cfg.replace(**overrides) if overrides else cfg


def max_radius_for(data: np.ndarray, c: float) -> int:
    """Radius guard ``c**ceil(log_c(t * d))`` with ``t`` the largest absolute coordinate."""
    t = float(np.max(np.abs(data)))
    return max(1, math.ceil(c ** radius_exponent(t, data.shape[1], c)))


@dataclass
class Workspace:
    """Everything a query needs, opened from one index directory."""

    directory: Path
    index: DiskIndex
    family: HashFamily
    params: LSHParams
    engine: SearchEngine
    max_radius: int
    build_seconds: float = math.nan
    sampling: dict[int, dict] = field(default_factory=dict)
    predictor: RadiusPredictor | None = None

    def load_artifacts(self) -> "Workspace":
        sampling_path = self.directory / SAMPLING_FILE
        if sampling_path.exists():
            self.sampling = load_sampling(sampling_path)
        predictor_path = self.directory / PREDICTOR_FILE
        if predictor_path.exists():
            self.predictor = load_predictor(predictor_path)
        return self


def build_workspace(cfg: BenchConfig, data: np.ndarray, directory: str | Path) -> Workspace:
    data = np.asarray(data, dtype=np.float64)
    params = derive_params(data.shape[0], cfg.c, cfg.w, cfg.delta)
    started = time.perf_counter()
    family = HashFamily.for_dataset(data, params.m, cfg.c, cfg.w, cfg.seed,
                                    squared_width=cfg.b_width == "squared")
    index = build_index(data, family, directory, cfg.page_size, params)
    elapsed = time.perf_counter() - started
    log.info("built index of %d points x %d projections in %.3fs", data.shape[0], params.m, elapsed)
    return Workspace(Path(directory), index, family, params, SearchEngine(index, family, params, data),
                     max_radius_for(data, cfg.c), build_seconds=elapsed)


def open_workspace(cfg: BenchConfig, data: np.ndarray, directory: str | Path) -> Workspace:
    data = np.asarray(data, dtype=np.float64)
    index = DiskIndex(directory)
    family = index.load_family()
    params = derive_params(index.n, cfg.c, cfg.w, cfg.delta)
    if params.m != index.m:
        raise MissingArtifact(f"index at {directory} has {index.m} projections but the configuration "
                              f"implies {params.m}; rebuild with `radius-lsh build`")
    ws = Workspace(Path(directory), index, family, params, SearchEngine(index, family, params, data),
                   max_radius_for(data, cfg.c))
    return ws.load_artifacts()


def sample_radii(cfg: BenchConfig, ws: Workspace, data: np.ndarray) -> dict[int, dict]:
    """Histogram of exponential-schedule terminal radii and chosen start radius per k."""
    rng = cfg.rng(_SAMPLE_STREAM)
    qids = rng.choice(data.shape[0], size=min(cfg.sample_size, data.shape[0]), replace=False)
    table = {}
    for k in cfg.ks:
        hist = build_histogram(data[qids], k, ws.engine, ws.max_radius)
        table[k] = {"histogram": dict(sorted(hist.items())), "i2r": select_i2r(hist, cfg.c)}
    ws.sampling = table
    save_sampling(table, ws.directory / SAMPLING_FILE)
    return table


def save_sampling(table: dict[int, dict], path: str | Path) -> None:
    payload = {"version": SCHEMA_VERSION,
               "k": {str(k): {"i2r": v["i2r"],
                              "histogram": {str(r): c for r, c in v["histogram"].items()}}
                     for k, v in table.items()}}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_sampling(path: str | Path) -> dict[int, dict]:
    payload = json.loads(Path(path).read_text())
    return {int(k): {"i2r": int(v["i2r"]),
                     "histogram": Counter({int(r): int(c) for r, c in v["histogram"].items()})}
            for k, v in payload["k"].items()}


def collect_samples(cfg: BenchConfig, ws: Workspace, data: np.ndarray) -> TrainingSet:
    oracle = RadiusOracle.from_index(ws.index, data, ws.params, max_radius=ws.max_radius)
    seed = int(cfg.rng(_TRAIN_STREAM).integers(1 << 31))
    return collect_training_set(oracle, ws.family, data, cfg.training_size, cfg.ks, seed)


def train_workspace(cfg: BenchConfig, ws: Workspace, data: np.ndarray, kind: str = "mlp",
                    samples: TrainingSet | None = None) -> RadiusPredictor:
    if samples is None:
        samples = collect_samples(cfg, ws, data)
        samples.to_csv(ws.directory / TRAINING_FILE)
    predictor = train(samples, kind, cfg.mlp_config(), cv_folds=cfg.cv_folds,
                      max_radius=ws.max_radius, seed=cfg.seed)
    save_predictor(predictor, ws.directory / PREDICTOR_FILE)
    ws.predictor = predictor
    return predictor


@dataclass
class MetricRow:
    strategy: str
    k: int
    queries: int
    mean_disk_seeks: float
    mean_data_read_mb: float
    mean_io_cost_ms: float
    mean_alg_time_ms: float
    mean_fp_rem_time_ms: float
    mean_qpt_ms: float
    mean_ratio: float
    mean_terminal_radius: float
    mean_rounds: float
    incomplete: int
    flagged: int


CSV_COLUMNS = ["schema_version"] + [f.name for f in dataclasses.fields(MetricRow)]
WALL_CLOCK_COLUMNS = ("mean_alg_time_ms", "mean_fp_rem_time_ms", "mean_qpt_ms")


def schedule_for(strategy: str, k: int, sig: np.ndarray, cfg: BenchConfig, ws: Workspace
                 ) -> RadiusSchedule:
    s = Strategy(strategy)
    if s is Strategy.OVR:
        return RadiusSchedule.ovr(cfg.c, ws.max_radius)
    if s is Strategy.IVR:
        if k not in ws.sampling:
            raise MissingArtifact(f"no sampled start radius for k={k}; run `radius-lsh sample-radii`")
        return RadiusSchedule.ivr(ws.sampling[k]["i2r"], ws.max_radius)
    if ws.predictor is None:
        raise MissingArtifact(f"strategy {s.value} needs a trained predictor; run `radius-lsh train`")
    r_pred = ws.predictor.predict(sig, k)
    if s is Strategy.NN_IVR:
        return RadiusSchedule.nn_ivr(r_pred, ws.max_radius)
    return RadiusSchedule.nn_lambda(r_pred, cfg.lam, ws.max_radius)


def evaluation_queries(cfg: BenchConfig, n: int) -> np.ndarray:
    return cfg.rng(_EVAL_STREAM).choice(n, size=min(cfg.queries, n), replace=False)


def _run_one(cfg, ws, data, strategy, k, qid):
    q = data[qid]
    sig = ws.family.hash_points(q[None, :])[0]
    extra = 1 if cfg.exclude_self else 0
    report = ws.engine.query(q, k + extra, schedule_for(strategy, k, sig, cfg, ws))
    ids, dists = report.ids, report.distances
    if cfg.exclude_self:
        keep = ids != qid
        ids, dists = ids[keep][:k], dists[keep][:k]
        others = np.delete(np.arange(data.shape[0]), qid)
        truth_ids, truth = brute_force_knn(q, k, data[others])
    else:
        truth_ids, truth = brute_force_knn(q, k, data)
    if dists.size < k:
        ratio, flagged = math.nan, True
    else:
        ratio, flagged = accuracy_ratio(dists, truth, k)
    record = report.as_record()
    record.update(query=int(qid), k=k, ratio=ratio, qpt_ms=qpt(report.counters, cfg.seek_ms,
                                                                cfg.read_factor))
    query_log.debug(json.dumps(record))
    return report, ratio, flagged


def run_bench(cfg: BenchConfig, ws: Workspace, data: np.ndarray) -> list[MetricRow]:
    """Average cost counters and accuracy over the evaluation queries per (strategy, k)."""
    data = np.asarray(data, dtype=np.float64)
    qids = evaluation_queries(cfg, data.shape[0])
    for s in cfg.strategies:
        if Strategy(s).uses_predictor and ws.predictor is None:
            raise MissingArtifact(f"strategy {s} needs a trained predictor; run `radius-lsh train`")
        if Strategy(s) is Strategy.IVR and any(k not in ws.sampling for k in cfg.ks):
            raise MissingArtifact("start radii missing for some k; run `radius-lsh sample-radii`")
    rows = []
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        for strategy in cfg.strategies:
            for k in cfg.ks:
                results = list(pool.map(lambda qid: _run_one(cfg, ws, data, strategy, k, qid), qids))
                reports = [r for r, _, _ in results]
                ratios = [x for _, x, _ in results if not math.isnan(x)]
                seeks = np.mean([r.counters.disk_seeks for r in reports])
                mb = np.mean([r.counters.data_read_mb for r in reports])
                rows.append(MetricRow(
                    strategy=strategy, k=k, queries=len(reports),
                    mean_disk_seeks=float(seeks),
                    mean_data_read_mb=float(mb),
                    mean_io_cost_ms=float(seeks * cfg.seek_ms + mb * cfg.read_factor),
                    mean_alg_time_ms=float(np.mean([r.counters.alg_time_ms for r in reports])),
                    mean_fp_rem_time_ms=float(np.mean([r.counters.fp_rem_time_ms for r in reports])),
                    mean_qpt_ms=float(np.mean([qpt(r.counters, cfg.seek_ms, cfg.read_factor)
                                               for r in reports])),
                    mean_ratio=float(np.mean(ratios)) if ratios else math.nan,
                    mean_terminal_radius=float(np.mean([r.terminal_radius for r in reports])),
                    mean_rounds=float(np.mean([r.rounds for r in reports])),
                    incomplete=sum(not r.complete for r in reports),
                    flagged=sum(f for _, _, f in results),
                ))
                log.info("%s k=%d seeks=%.1f ratio=%.4f", strategy, k, seeks, rows[-1].mean_ratio)
    return rows


def rows_to_csv(rows: list[MetricRow], drop: tuple[str, ...] = ()) -> str:
    columns = [c for c in CSV_COLUMNS if c not in drop]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        values = {"schema_version": SCHEMA_VERSION, **dataclasses.asdict(row)}
        writer.writerow([_fmt(values[c]) for c in columns])
    return buf.getvalue()


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def strip_wall_clock(csv_text: str) -> str:
    """The CSV with timing-dependent columns removed, for determinism checks."""
    reader = csv.reader(io.StringIO(csv_text))
    header = next(reader)
    keep = [i for i, name in enumerate(header) if name not in WALL_CLOCK_COLUMNS]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in [header, *reader]:
        writer.writerow([row[i] for i in keep])
    return buf.getvalue()
