"""Command line entry point: ``radius-lsh <command> ...``.

Settings come from a flat ``key=value`` file (``--config``) and are
overridden by flags. Relative data and index paths resolve against
``$RADIUS_LSH_DATA`` when it is set.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from radius_lsh import bench
from radius_lsh.datasets import (brute_force_knn, gaussian_mixture, load_fvecs, resolve_path,
                                 write_fvecs, write_ivecs)
from radius_lsh.disk_index import DiskIndex, index_stats
from radius_lsh.radius_model import TrainingSet
from radius_lsh.schedule import RadiusSchedule, Strategy

log = logging.getLogger("radius_lsh")


def _csv_list(cast):
    return lambda text: tuple(cast(v) for v in text.split(",") if v)


def _add_common(p: argparse.ArgumentParser, index=True, data=True) -> None:
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--seed", type=int, help="seed threaded through every random component")
    if data:
        p.add_argument("--data", required=True, help="dataset in fvecs format")
    if index:
        p.add_argument("--index", required=True, help="index directory")


def _config(args) -> bench.BenchConfig:
    fields = {f.name for f in dataclasses.fields(bench.BenchConfig)}
    overrides = {k: v for k, v in vars(args).items() if k in fields}
    return bench.load_config(resolve_path(args.config) if args.config else None, overrides)


def _data(args) -> np.ndarray:
    return load_fvecs(resolve_path(args.data)).points


def cmd_synth(args) -> int:
    ds = gaussian_mixture(args.n, args.d, args.clusters, args.seed or 0)
    write_fvecs(resolve_path(args.out), ds.points)
    print(f"wrote {ds.n} x {ds.d} points to {args.out}")
    return 0


def cmd_build(args) -> int:
    cfg = _config(args)
    ws = bench.build_workspace(cfg, _data(args), resolve_path(args.index))
    print(json.dumps({"n": ws.index.n, "m": ws.params.m, "l": ws.params.l,
                      "build_seconds": ws.build_seconds, "max_radius": ws.max_radius}))
    return 0


def cmd_sample(args) -> int:
    cfg = _config(args)
    data = _data(args)
    ws = bench.open_workspace(cfg, data, resolve_path(args.index))
    started = time.perf_counter()
    table = bench.sample_radii(cfg, ws, data)
    for k, entry in table.items():
        print(f"k={k} i2r={entry['i2r']} histogram={dict(entry['histogram'])}")
    print(f"sampling took {time.perf_counter() - started:.3f}s")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    data = _data(args)
    ws = bench.open_workspace(cfg, data, resolve_path(args.index))
    samples = TrainingSet.from_csv(resolve_path(args.samples)) if args.samples else None
    started = time.perf_counter()
    pred = bench.train_workspace(cfg, ws, data, args.kind, samples)
    print(json.dumps({"kind": pred.kind, "cv_mse": pred.cv_mse, "cv_r2": pred.cv_r2,
                      "seconds": time.perf_counter() - started}))
    return 0


def cmd_query(args) -> int:
    cfg = _config(args)
    data = _data(args)
    ws = bench.open_workspace(cfg, data, resolve_path(args.index))
    if args.query_file:
        q = load_fvecs(resolve_path(args.query_file)).points[args.row]
    else:
        q = data[args.query_id]
    max_radius = args.max_radius or ws.max_radius
    sig = ws.family.hash_points(q[None, :])[0]
    strategy = Strategy(args.strategy)
    if strategy is Strategy.IVR and args.i2r:
        schedule = RadiusSchedule.ivr(args.i2r, max_radius)
    else:
        schedule = dataclasses.replace(bench.schedule_for(strategy.value, args.k, sig, cfg, ws),
                                       max_radius=max_radius)
    report = ws.engine.query(q, args.k, schedule)
    record = report.as_record()
    record["qpt_ms"] = bench.qpt(report.counters, cfg.seek_ms, cfg.read_factor)
    print(json.dumps(record))
    return 0 if report.complete else 3


def cmd_bench(args) -> int:
    cfg = _config(args)
    data = _data(args)
    directory = resolve_path(args.index)
    if (directory / "meta.bin").exists():
        ws = bench.open_workspace(cfg, data, directory)
    elif args.prepare:
        ws = bench.build_workspace(cfg, data, directory)
    else:
        raise bench.MissingArtifact(f"no index at {directory}; run `radius-lsh build` or pass --prepare")
    if args.prepare:
        if not ws.sampling:
            bench.sample_radii(cfg, ws, data)
        if ws.predictor is None:
            bench.train_workspace(cfg, ws, data)
    rows = bench.run_bench(cfg, ws, data)
    text = bench.rows_to_csv(rows)
    if args.out:
        Path(resolve_path(args.out)).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_ground_truth(args) -> int:
    data = _data(args)
    if args.queries:
        queries = load_fvecs(resolve_path(args.queries)).points
    else:
        queries = data[bench.evaluation_queries(_config(args), data.shape[0])]
    table = np.vstack([brute_force_knn(q, args.k, data)[0] for q in queries])
    write_ivecs(resolve_path(args.out), table)
    print(f"wrote {table.shape[0]} x {args.k} neighbour ids to {args.out}")
    return 0


def cmd_stats(args) -> int:
    stats = index_stats(DiskIndex(resolve_path(args.index)))
    print(json.dumps(dataclasses.asdict(stats)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radius-lsh", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a Gaussian-mixture dataset as fvecs")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--clusters", type=int, default=10)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build", help="hash the dataset and write the paged index")
    _add_common(p)
    p.add_argument("--page-size", dest="page_size", type=int)
    p.add_argument("--b-width", dest="b_width", choices=("squared", "linear"))
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("sample-radii", help="pick per-k start radii from sampled queries")
    _add_common(p)
    p.add_argument("--sample-size", dest="sample_size", type=int)
    p.add_argument("--ks", type=_csv_list(int))
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("train", help="collect ground-truth radii and fit the predictor")
    _add_common(p)
    p.add_argument("--kind", choices=("mlp", "linear"), default="mlp")
    p.add_argument("--training-size", dest="training_size", type=int)
    p.add_argument("--cv-folds", dest="cv_folds", type=int)
    p.add_argument("--ks", type=_csv_list(int))
    p.add_argument("--samples", help="reuse a training.csv instead of recomputing radii")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("query", help="run one top-k query and print its report")
    _add_common(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--query-id", type=int, help="use dataset point N as the query")
    group.add_argument("--query-file", help="fvecs file holding the query")
    p.add_argument("--row", type=int, default=0, help="row of --query-file")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default="ovr")
    p.add_argument("--lam", type=float)
    p.add_argument("--i2r", type=int, help="override the sampled start radius")
    p.add_argument("--max-radius", type=int)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="evaluate strategies and write the metrics CSV")
    _add_common(p)
    p.add_argument("--out")
    p.add_argument("--strategies", type=_csv_list(str))
    p.add_argument("--ks", type=_csv_list(int))
    p.add_argument("--queries", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--lam", type=float)
    p.add_argument("--prepare", action="store_true",
                   help="build the index, start radii and predictor when missing")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ground-truth", help="exact k-NN ids as ivecs")
    _add_common(p, index=False)
    p.add_argument("--queries", help="fvecs query file (default: the evaluation queries)")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ground_truth)

    p = sub.add_parser("stats", help="index file count and sizes")
    p.add_argument("--index", required=True)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s %(message)s")
    try:
        return args.func(args)
    except (bench.MissingArtifact, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
