"""Collision-counting top-k search over the disk index.

A point collides with the query in projection ``i`` at radius ``R`` when
``|h_i(x) - h_i(q)| <= R``. Growing ``R`` only ever adds buckets on both sides
of the previous window, so each expansion reads at most two new bucket ranges
per projection. Points colliding in at least ``l`` projections are verified
against their exact distance.

A round at radius ``R`` stops the search when either

* at least ``k`` verified points lie within ``c * R`` of the query, or
* at least ``k + ceil(beta * n)`` points have been verified.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from radius_lsh.disk_index import CostCounters, DiskIndex, read_bucket_range
from radius_lsh.lsh import HashFamily, LSHParams, signature
from radius_lsh.schedule import RadiusSchedule, ScheduleExhausted, next_radius

log = logging.getLogger(__name__)


def euclidean(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Exact distances from ``q`` to each row; shared by every distance path."""
    diff = np.asarray(points, dtype=np.float64) - np.asarray(q, dtype=np.float64)
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def should_stop(verified_dists: np.ndarray, radius: int, k: int, params: LSHParams) -> bool:
    if verified_dists.size >= k + params.false_positive_allowance:
        return True
    return int(np.count_nonzero(verified_dists <= params.c * radius)) >= k


class SearchError(Exception):
    pass


@dataclass
class CandidateSet:
    """Collision counts plus the points already verified by exact distance."""

    counts: np.ndarray
    verified_ids: list[np.ndarray] = field(default_factory=list)
    verified_dists: list[np.ndarray] = field(default_factory=list)
    is_verified: np.ndarray | None = None

    @classmethod
    def empty(cls, n: int) -> "CandidateSet":
        return cls(counts=np.zeros(n, dtype=np.int32), is_verified=np.zeros(n, dtype=bool))

    def ids(self) -> np.ndarray:
        return np.concatenate(self.verified_ids) if self.verified_ids else np.empty(0, np.int64)

    def dists(self) -> np.ndarray:
        return np.concatenate(self.verified_dists) if self.verified_dists else np.empty(0)

    def __len__(self) -> int:
        return int(self.is_verified.sum())


@dataclass
class QueryReport:
    ids: np.ndarray
    distances: np.ndarray
    counters: CostCounters
    terminal_radius: int
    strategy: str
    radii: list[int]
    complete: bool
    candidates: int

    @property
    def rounds(self) -> int:
        return len(self.radii)

    def as_record(self) -> dict:
        return {
            "strategy": self.strategy,
            "ids": [int(i) for i in self.ids],
            "distances": [float(x) for x in self.distances],
            "terminal_radius": self.terminal_radius,
            "rounds": self.rounds,
            "complete": self.complete,
            "candidates": self.candidates,
            "disk_seeks": self.counters.disk_seeks,
            "data_read_mb": self.counters.data_read_mb,
            "alg_time_ms": self.counters.alg_time_ms,
            "fp_rem_time_ms": self.counters.fp_rem_time_ms,
        }


def top_k(ids: np.ndarray, dists: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """k smallest distances, ties broken by ascending id."""
    order = np.lexsort((ids, dists))[:k]
    return ids[order], dists[order]


class SearchEngine:
    """Answers top-k queries against one index; holds no per-query state."""

    def __init__(self, index: DiskIndex, family: HashFamily, params: LSHParams, data: np.ndarray):
        if family.m != index.m:
            raise SearchError(f"family has {family.m} functions, index has {index.m} projections")
        if params.l > family.m:
            raise SearchError(f"threshold l={params.l} exceeds m={family.m}")
        self.index = index
        self.family = family
        self.params = params
        self.data = np.asarray(data, dtype=np.float64)
        if self.data.shape[0] != index.n:
            raise SearchError(f"dataset has {self.data.shape[0]} points, index has {index.n}")

    def expand_and_count(self, q: np.ndarray, sig: np.ndarray, prev_r: int | None, new_r: int,
                         cand: CandidateSet, counters: CostCounters) -> CandidateSet:
        """Grow every projection's window from ``prev_r`` to ``new_r`` and verify new candidates.

        ``prev_r=None`` means nothing has been read yet.
        """
        if prev_r is not None and not new_r > prev_r:
            raise ValueError(f"new radius {new_r} must exceed previous radius {prev_r}")
        started = time.perf_counter()
        io_time = 0.0
        counts = cand.counts
        for i in range(self.index.m):
            h = int(sig[i])
            if prev_r is None:
                ranges = ((h - new_r, h + new_r),)
            else:
                ranges = ((h - new_r, h - prev_r - 1), (h + prev_r + 1, h + new_r))
            for lo, hi in ranges:
                t0 = time.perf_counter()
                try:
                    ids = read_bucket_range(self.index, i, lo, hi, counters)
                except Exception as exc:
                    raise SearchError(f"projection {i}: {exc}") from exc
                io_time += time.perf_counter() - t0
                # ids are unique within one projection and the two ranges are disjoint
                counts[ids] += 1

        fp_start = time.perf_counter()
        fresh = np.flatnonzero((counts >= self.params.l) & ~cand.is_verified)
        if fresh.size:
            cand.is_verified[fresh] = True
            cand.verified_ids.append(fresh)
            cand.verified_dists.append(euclidean(self.data[fresh], q))
        fp_time = time.perf_counter() - fp_start

        counters.fp_rem_time_ms += fp_time * 1e3
        counters.alg_time_ms += (fp_start - started - io_time) * 1e3
        return cand

    def query(self, q, k: int, schedule: RadiusSchedule) -> QueryReport:
        if k < 1:
            raise ValueError("k must be >= 1")
        q = np.asarray(q, dtype=np.float64)
        counters = CostCounters()
        t0 = time.perf_counter()
        sig = signature(q, self.family)
        cand = CandidateSet.empty(self.index.n)
        counters.alg_time_ms += (time.perf_counter() - t0) * 1e3

        examined: list[int] = []
        current = None
        complete = False
        while True:
            try:
                radius = next_radius(schedule, current)
            except ScheduleExhausted:
                break
            self.expand_and_count(q, sig, current, radius, cand, counters)
            examined.append(radius)
            current = radius
            t0 = time.perf_counter()
            stop = should_stop(cand.dists(), radius, k, self.params)
            counters.alg_time_ms += (time.perf_counter() - t0) * 1e3
            if stop:
                complete = True
                break

        t0 = time.perf_counter()
        ids, dists = top_k(cand.ids(), cand.dists(), k)
        counters.alg_time_ms += (time.perf_counter() - t0) * 1e3
        if not complete:
            log.warning("query stopped at max radius %s with %d of %d results",
                        current, ids.size, k)
        return QueryReport(ids=ids, distances=dists, counters=counters,
                           terminal_radius=current if current is not None else 0,
                           strategy=schedule.strategy.value, radii=examined,
                           complete=complete, candidates=len(cand))

    def candidates_at(self, q, radius: int) -> tuple[np.ndarray, np.ndarray]:
        """Collision counts and verified ids after a single read at fixed ``radius``."""
        q = np.asarray(q, dtype=np.float64)
        cand = CandidateSet.empty(self.index.n)
        self.expand_and_count(q, signature(q, self.family), None, radius, cand, CostCounters())
        return cand.counts, np.sort(cand.ids())
