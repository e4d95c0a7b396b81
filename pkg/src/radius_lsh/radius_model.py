"""Ground-truth projected radii, sampled start radii and regressor training data."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from radius_lsh.disk_index import DiskIndex, read_projection
from radius_lsh.lsh import HashFamily, LSHParams, ParameterError, signature
from radius_lsh.schedule import RadiusSchedule, radii
from radius_lsh.search import SearchEngine, SearchError, euclidean

DEFAULT_K_SET = (1, 25, 50, 75, 100)


def bucket_matrix(index: DiskIndex) -> np.ndarray:
    """``(n, m)`` bucket of every point in every projection, read back from disk."""
    out = np.empty((index.n, index.m), dtype=np.int64)
    for i in range(index.m):
        entries = read_projection(index, i)
        out[entries["id"].astype(np.int64), i] = entries["bucket"]
    return out


class RadiusOracle:
    """Smallest window radius at which a query would stop, without touching disk.

    A point becomes a candidate at radius ``R`` once ``R`` reaches the
    ``l``-th smallest of its per-projection bucket gaps to the query, so one
    partial sort per query decides the stopping test for every ``R``.
    """

    def __init__(self, buckets: np.ndarray, data: np.ndarray, params: LSHParams,
                 max_radius: int = 1 << 30, min_radius: int = 1):
        self.buckets = np.asarray(buckets, dtype=np.int64)
        self.data = np.asarray(data, dtype=np.float64)
        self.params = params
        self.max_radius = int(max_radius)
        self.min_radius = int(min_radius)
        if self.buckets.shape[0] != self.data.shape[0]:
            raise ParameterError("bucket matrix and dataset disagree on n")
        if not 1 <= params.l <= self.buckets.shape[1]:
            raise ParameterError(f"threshold l={params.l} outside [1, {self.buckets.shape[1]}]")

    @classmethod
    def from_index(cls, index: DiskIndex, data: np.ndarray, params: LSHParams, **kw) -> "RadiusOracle":
        return cls(bucket_matrix(index), data, params, **kw)

    def _thresholds(self, sig: np.ndarray) -> np.ndarray:
        gaps = np.abs(self.buckets - sig[None, :])
        kth = self.params.l - 1
        return np.partition(gaps, kth, axis=1)[:, kth]

    def _feasible(self, radius: int, k: int, thresholds: np.ndarray, dists: np.ndarray) -> bool:
        cand = thresholds <= radius
        n_cand = int(np.count_nonzero(cand))
        if n_cand >= k + self.params.false_positive_allowance:
            return True
        return int(np.count_nonzero(cand & (dists <= self.params.c * radius))) >= k

    def _search(self, k: int, thresholds: np.ndarray, dists: np.ndarray) -> int:
        lo = self.min_radius
        if self._feasible(lo, k, thresholds, dists):
            return lo
        # doubling brackets the answer in (lo, hi]
        hi = max(1, lo)
        while not self._feasible(hi, k, thresholds, dists):
            if hi >= self.max_radius:
                raise SearchError(f"k={k} not reachable within radius {self.max_radius}")
            lo, hi = hi, min(2 * hi, self.max_radius)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self._feasible(mid, k, thresholds, dists):
                hi = mid
            else:
                lo = mid
        return hi

    def radii(self, q, sig: np.ndarray, ks) -> list[int]:
        """``R_act`` for each ``k`` in ``ks`` for one query."""
        n = self.data.shape[0]
        for k in ks:
            if not 1 <= k <= n:
                raise ParameterError(f"k={k} is not reachable in a dataset of {n} points")
        thresholds = self._thresholds(np.asarray(sig, dtype=np.int64))
        dists = euclidean(self.data, q)
        return [self._search(int(k), thresholds, dists) for k in ks]

    def radius(self, q, sig: np.ndarray, k: int) -> int:
        return self.radii(q, sig, [k])[0]


def ground_truth_radius(q, k: int, index: DiskIndex, family: HashFamily, params: LSHParams,
                        data: np.ndarray, min_radius: int = 1, max_radius: int = 1 << 30) -> int:
    """Smallest integer window radius at which a top-``k`` query for ``q`` stops."""
    oracle = RadiusOracle.from_index(index, data, params, min_radius=min_radius,
                                     max_radius=max_radius)
    return oracle.radius(q, signature(q, family), k)


def build_histogram(queries: np.ndarray, k: int, engine: SearchEngine,
                    max_radius: int = 1 << 30) -> Counter:
    """Terminal radius counts of plain exponential-schedule queries for one ``k``."""
    hist: Counter = Counter()
    schedule = RadiusSchedule.ovr(engine.params.c, max_radius=max_radius)
    for q in np.atleast_2d(queries):
        hist[engine.query(q, k, schedule).terminal_radius] += 1
    return hist


def select_i2r(hist: Counter | dict, c: float = 2.0) -> int:
    """Start radius: the exponential-schedule radius just before the most frequent one.

    Count ties go to the smaller radius.
    """
    if not hist:
        raise ValueError("empty radius histogram")
    peak = min(hist, key=lambda r: (-hist[r], r))
    seq = radii(RadiusSchedule.ovr(c), until=peak)
    before = [r for r in seq if r < peak]
    return before[-1] if before else 1


@dataclass
class TrainingSet:
    """Features are a query's bucket signature plus ``k``; targets are ``R_act``."""

    signatures: np.ndarray
    ks: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.signatures = np.asarray(self.signatures, dtype=np.int64)
        self.ks = np.asarray(self.ks, dtype=np.int64)
        self.targets = np.asarray(self.targets, dtype=np.int64)
        if not (self.signatures.shape[0] == self.ks.shape[0] == self.targets.shape[0]):
            raise ValueError("signatures, ks and targets must have the same length")

    def __len__(self) -> int:
        return self.targets.shape[0]

    @property
    def features(self) -> np.ndarray:
        return np.column_stack([self.signatures, self.ks]).astype(np.float64)

    def to_csv(self, path: str | Path) -> None:
        m = self.signatures.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"h{i}" for i in range(m)] + ["k", "r_act"])
            for sig, k, r in zip(self.signatures, self.ks, self.targets):
                writer.writerow([*sig.tolist(), int(k), int(r)])

    @classmethod
    def from_csv(cls, path: str | Path) -> "TrainingSet":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[-2:] != ["k", "r_act"]:
                raise ValueError(f"{path}: expected trailing k, r_act columns")
            rows = np.array([[int(v) for v in row] for row in reader], dtype=np.int64)
        rows = rows.reshape(-1, len(header))
        return cls(rows[:, :-2], rows[:, -2], rows[:, -1])


def collect_training_set(oracle: RadiusOracle, family: HashFamily, data: np.ndarray,
                         size: int, ks=DEFAULT_K_SET, seed: int = 0) -> TrainingSet:
    """``size`` samples from queries drawn out of the dataset, each paired with every ``k``."""
    data = np.asarray(data, dtype=np.float64)
    ks = list(ks)
    n_queries = math.ceil(size / len(ks))
    rng = np.random.default_rng(seed)
    qids = rng.choice(data.shape[0], size=n_queries, replace=n_queries > data.shape[0])
    sigs = family.hash_points(data[qids])
    rows_sig, rows_k, rows_r = [], [], []
    for qi, sig in zip(qids, sigs):
        for k, r in zip(ks, oracle.radii(data[qi], sig, ks)):
            rows_sig.append(sig)
            rows_k.append(k)
            rows_r.append(r)
    return TrainingSet(np.array(rows_sig[:size]), np.array(rows_k[:size]), np.array(rows_r[:size]))
