"""Paged per-projection bucket files with I/O accounting.

Directory layout (all integers little-endian)::

    meta.bin        header: magic, version, n, d, m, l, page_size, entry_size,
                    c, w, delta, seed, then the family file name
    family.bin      the hash family (see ``radius_lsh.lsh.save_family``)
    proj_<i>.pages  entries (bucket: int64, point_id: uint32) sorted by
                    (bucket, id), packed into fixed-size zero-padded pages;
                    the final page is truncated to its entries
    proj_<i>.dir    header then one record per page:
                    (first_bucket: int64, last_bucket: int64, offset: uint64, count: uint32)

The page directories are loaded into memory when the index is opened and are
not charged to the read counters.
"""

from __future__ import annotations

import os
import struct
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from radius_lsh.lsh import HashFamily, LSHParams, load_family, save_family

ENTRY_DTYPE = np.dtype([("bucket", "<i8"), ("id", "<u4")])
DIR_DTYPE = np.dtype([("first", "<i8"), ("last", "<i8"), ("offset", "<u8"), ("count", "<u4")])
ENTRY_SIZE = ENTRY_DTYPE.itemsize
DEFAULT_PAGE_SIZE = 4096
MIN_PAGE_SIZE = 64
BYTES_PER_MB = 1 << 20

INDEX_MAGIC = b"LSHIDX\x00\x00"
DIR_MAGIC = b"LSHDIR\x00\x00"
INDEX_VERSION = 1
_META = struct.Struct("<8sIQIIIIIdddQH")
_DIR_HEADER = struct.Struct("<8sIIIQ")
FAMILY_FILE = "family.bin"


class IndexFileError(Exception):
    """Base class for index build and read failures."""


class BuildError(IndexFileError):
    pass


class InputError(IndexFileError):
    pass


@dataclass
class CostCounters:
    """Per-query cost accumulators; I/O is counted, never timed."""

    disk_seeks: int = 0
    bytes_read: int = 0
    alg_time_ms: float = 0.0
    fp_rem_time_ms: float = 0.0

    @property
    def data_read_mb(self) -> float:
        return self.bytes_read / BYTES_PER_MB

    def add(self, other: "CostCounters") -> None:
        self.disk_seeks += other.disk_seeks
        self.bytes_read += other.bytes_read
        self.alg_time_ms += other.alg_time_ms
        self.fp_rem_time_ms += other.fp_rem_time_ms


@dataclass(frozen=True)
class IndexMeta:
    n: int
    d: int
    m: int
    l: int
    page_size: int
    c: float
    w: float
    delta: float
    seed: int


def _page_file(directory: Path, i: int) -> Path:
    return directory / f"proj_{i}.pages"


def _dir_file(directory: Path, i: int) -> Path:
    return directory / f"proj_{i}.dir"


def _pack_pages(entries: np.ndarray, page_size: int) -> tuple[bytes, np.ndarray]:
    cap = page_size // ENTRY_SIZE
    n = entries.shape[0]
    n_pages = -(-n // cap)
    directory = np.zeros(n_pages, dtype=DIR_DTYPE)
    starts = np.arange(n_pages) * cap
    ends = np.minimum(starts + cap, n)
    directory["first"] = entries["bucket"][starts]
    directory["last"] = entries["bucket"][ends - 1]
    directory["offset"] = starts // cap * page_size
    directory["count"] = ends - starts

    padded = np.zeros(n_pages * cap, dtype=ENTRY_DTYPE)
    padded[:n] = entries
    raw = np.zeros((n_pages, page_size), dtype=np.uint8)
    raw[:, : cap * ENTRY_SIZE] = padded.view(np.uint8).reshape(n_pages, cap * ENTRY_SIZE)
    last_bytes = int(directory["count"][-1]) * ENTRY_SIZE
    blob = raw.tobytes()[: (n_pages - 1) * page_size + last_bytes]
    return blob, directory


def build_index(data: np.ndarray, family: HashFamily, directory: str | Path,
                page_size: int = DEFAULT_PAGE_SIZE, params: LSHParams | None = None,
                ids: np.ndarray | None = None) -> "DiskIndex":
    """Hash every point in every projection and write the paged bucket files."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise InputError("dataset must be a non-empty (n, d) array")
    if data.shape[1] != family.d:
        raise InputError(f"dataset is {data.shape[1]}-dimensional, family expects {family.d}")
    if page_size < MIN_PAGE_SIZE:
        raise InputError(f"page_size must be at least {MIN_PAGE_SIZE} bytes, got {page_size}")
    n = data.shape[0]
    if ids is None:
        ids = np.arange(n, dtype=np.int64)
    else:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.shape != (n,):
            raise InputError("one id per point is required")
        if np.unique(ids).size != n:
            raise InputError("duplicate point ids")
    if ids.min() < 0 or ids.max() >= 1 << 32:
        raise InputError("point ids must fit in an unsigned 32-bit field")

    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        buckets = family.hash_points(data)
        for i in range(family.m):
            order = np.lexsort((ids, buckets[:, i]))
            entries = np.empty(n, dtype=ENTRY_DTYPE)
            entries["bucket"] = buckets[order, i]
            entries["id"] = ids[order]
            blob, page_dir = _pack_pages(entries, page_size)
            _page_file(directory, i).write_bytes(blob)
            with open(_dir_file(directory, i), "wb") as fh:
                fh.write(_DIR_HEADER.pack(DIR_MAGIC, INDEX_VERSION, i, page_dir.size, n))
                fh.write(page_dir.tobytes())
        save_family(family, directory / FAMILY_FILE)
        name = FAMILY_FILE.encode()
        c, w, delta, l = ((params.c, params.w, params.delta, params.l) if params
                          else (0.0, family.w, 0.0, 0))
        with open(directory / "meta.bin", "wb") as fh:
            fh.write(_META.pack(INDEX_MAGIC, INDEX_VERSION, n, family.d, family.m, l, page_size,
                                ENTRY_SIZE, c, w, delta, family.seed & 0xFFFFFFFFFFFFFFFF, len(name)))
            fh.write(name)
    except OSError as exc:
        raise BuildError(f"failed writing index under {directory}: {exc}") from exc
    return DiskIndex(directory)


class DiskIndex:
    """Read side of an index directory.

    File handles are opened on first use and read with ``os.pread``, so one
    instance can serve concurrent queries; each query passes its own counters.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        raw = (self.directory / "meta.bin").read_bytes()
        (magic, version, n, d, m, l, page_size, entry_size, c, w, delta, seed,
         name_len) = _META.unpack_from(raw)
        if magic != INDEX_MAGIC:
            raise InputError(f"{self.directory}: not an index directory")
        if version != INDEX_VERSION or entry_size != ENTRY_SIZE:
            raise InputError(f"{self.directory}: unsupported index layout v{version}")
        self.family_file = raw[_META.size:_META.size + name_len].decode()
        self.meta = IndexMeta(n, d, m, l, page_size, c, w, delta, seed)
        self.page_dirs = [self._load_dir(i) for i in range(m)]
        self._fds: list[int | None] = [None] * m
        self._lock = threading.Lock()

    def _load_dir(self, i: int) -> np.ndarray:
        raw = _dir_file(self.directory, i).read_bytes()
        magic, version, proj, count, _ = _DIR_HEADER.unpack_from(raw)
        if magic != DIR_MAGIC or version != INDEX_VERSION or proj != i:
            raise InputError(f"{_dir_file(self.directory, i)}: bad page directory header")
        return np.frombuffer(raw, dtype=DIR_DTYPE, count=count, offset=_DIR_HEADER.size)

    @property
    def m(self) -> int:
        return self.meta.m

    @property
    def n(self) -> int:
        return self.meta.n

    @property
    def page_size(self) -> int:
        return self.meta.page_size

    def load_family(self) -> HashFamily:
        return load_family(self.directory / self.family_file)

    def _fd(self, i: int) -> int:
        fd = self._fds[i]
        if fd is None:
            with self._lock:
                fd = self._fds[i]
                if fd is None:
                    fd = os.open(_page_file(self.directory, i), os.O_RDONLY)
                    self._fds[i] = fd
        return fd

    def read_pages(self, projection_id: int, first_page: int, last_page: int) -> np.ndarray:
        """Entries of pages ``first_page..last_page`` inclusive, uncounted."""
        page_dir = self.page_dirs[projection_id]
        start = int(page_dir["offset"][first_page])
        n_pages = last_page - first_page + 1
        length = (n_pages - 1) * self.page_size + int(page_dir["count"][last_page]) * ENTRY_SIZE
        try:
            buf = os.pread(self._fd(projection_id), length, start)
        except OSError as exc:
            raise IndexFileError(f"projection {projection_id}: read failed: {exc}") from exc
        if len(buf) != length:
            raise IndexFileError(f"projection {projection_id}: short read at offset {start}")
        cap = self.page_size // ENTRY_SIZE
        raw = np.zeros(n_pages * self.page_size, dtype=np.uint8)
        raw[:length] = np.frombuffer(buf, dtype=np.uint8)
        body = raw.reshape(n_pages, self.page_size)[:, : cap * ENTRY_SIZE]
        entries = np.ascontiguousarray(body).view(ENTRY_DTYPE).reshape(-1)
        total = int(page_dir["count"][first_page:last_page + 1].sum())
        return entries[:total]

    def page_span(self, projection_id: int, lo_bucket: int, hi_bucket: int) -> tuple[int, int]:
        """Inclusive page range whose bucket span overlaps ``[lo, hi]``; empty if first > last."""
        page_dir = self.page_dirs[projection_id]
        first = int(np.searchsorted(page_dir["last"], lo_bucket, side="left"))
        last = int(np.searchsorted(page_dir["first"], hi_bucket, side="right")) - 1
        return first, last

    def close(self) -> None:
        with self._lock:
            for i, fd in enumerate(self._fds):
                if fd is not None:
                    os.close(fd)
                    self._fds[i] = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def read_bucket_range(index: DiskIndex, projection_id: int, lo_bucket: int, hi_bucket: int,
                      counters: CostCounters) -> np.ndarray:
    """Point ids whose bucket lies in ``[lo_bucket, hi_bucket]`` for one projection.

    A bucket range always maps to consecutive pages, so a non-empty read costs
    exactly one seek plus ``page_size`` bytes per page touched.
    """
    if not 0 <= projection_id < index.m:
        raise IndexError(f"unknown projection {projection_id} (index has {index.m})")
    if lo_bucket > hi_bucket:
        raise ValueError(f"lo_bucket {lo_bucket} exceeds hi_bucket {hi_bucket}")
    first, last = index.page_span(projection_id, lo_bucket, hi_bucket)
    if first > last:
        return np.empty(0, dtype=np.int64)
    counters.disk_seeks += 1
    counters.bytes_read += (last - first + 1) * index.page_size
    entries = index.read_pages(projection_id, first, last)
    lo = np.searchsorted(entries["bucket"], lo_bucket, side="left")
    hi = np.searchsorted(entries["bucket"], hi_bucket, side="right")
    return entries["id"][lo:hi].astype(np.int64)


def read_projection(index: DiskIndex, projection_id: int) -> np.ndarray:
    """All entries of one projection file, bypassing the counters."""
    n_pages = index.page_dirs[projection_id].size
    return index.read_pages(projection_id, 0, n_pages - 1)


@dataclass(frozen=True)
class IndexStats:
    file_count: int
    total_bytes: int
    page_bytes: int
    pages_per_projection: list[int]
    entries_per_projection: list[int]


def index_stats(index: DiskIndex) -> IndexStats:
    files = [p for p in index.directory.iterdir() if p.is_file()]
    page_bytes = sum(_page_file(index.directory, i).stat().st_size for i in range(index.m))
    return IndexStats(
        file_count=len(files),
        total_bytes=sum(p.stat().st_size for p in files),
        page_bytes=page_bytes,
        pages_per_projection=[int(d.size) for d in index.page_dirs],
        entries_per_projection=[int(d["count"].sum()) for d in index.page_dirs],
    )
