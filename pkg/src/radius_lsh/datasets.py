"""Vector file I/O, synthetic data and the exact k-NN oracle."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from radius_lsh.search import euclidean

DATA_DIR_ENV = "RADIUS_LSH_DATA"


class FormatError(ValueError):
    pass


@dataclass
class Dataset:
    points: np.ndarray
    source: str = "memory"
    knn: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[0] == 0:
            raise FormatError("a dataset needs at least one point of fixed dimensionality")
        if not np.all(np.isfinite(self.points)):
            raise FormatError("dataset contains non-finite coordinates")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def resolve_path(path: str | Path) -> Path:
    """Relative paths resolve against ``$RADIUS_LSH_DATA`` when it is set."""
    path = Path(path)
    base = os.environ.get(DATA_DIR_ENV)
    if base and not path.is_absolute():
        return Path(base) / path
    return path


def _read_vecs(path: str | Path, dtype: str) -> np.ndarray:
    raw = Path(path).read_bytes()
    rows = []
    offset = 0
    dim = None
    while offset < len(raw):
        if offset + 4 > len(raw):
            raise FormatError(f"{path}: truncated dimension header at byte {offset}")
        d = int(np.frombuffer(raw, dtype="<i4", count=1, offset=offset)[0])
        if d <= 0:
            raise FormatError(f"{path}: invalid dimension {d} at byte {offset}")
        if dim is None:
            dim = d
        elif d != dim:
            raise FormatError(f"{path}: dimension {d} at byte {offset} differs from {dim}")
        if offset + 4 + 4 * d > len(raw):
            raise FormatError(f"{path}: truncated record at byte {offset}")
        rows.append(np.frombuffer(raw, dtype=dtype, count=d, offset=offset + 4))
        offset += 4 + 4 * d
    if dim is None:
        raise FormatError(f"{path}: empty file")
    return np.vstack(rows)


def _write_vecs(path: str | Path, rows: np.ndarray, dtype: str) -> None:
    rows = np.asarray(rows)
    n, d = rows.shape
    out = np.empty((n, d + 1), dtype="<i4")
    out[:, 0] = d
    out[:, 1:] = rows.astype(dtype).view("<i4")
    Path(path).write_bytes(out.tobytes())


def load_fvecs(path: str | Path) -> Dataset:
    return Dataset(_read_vecs(path, "<f4").astype(np.float64), source=f"fvecs:{path}")


def write_fvecs(path: str | Path, points: np.ndarray) -> None:
    _write_vecs(path, points, "<f4")


def load_ivecs(path: str | Path) -> np.ndarray:
    return _read_vecs(path, "<i4").astype(np.int64)


def write_ivecs(path: str | Path, rows: np.ndarray) -> None:
    _write_vecs(path, rows, "<i4")


def gaussian_mixture(n: int = 10_000, d: int = 32, clusters: int = 10, seed: int = 0,
                     center_range: float = 1000.0, spread: tuple[float, float] = (40.0, 160.0)
                     ) -> Dataset:
    """Clusters with log-uniform spreads, so required radii depend on where a query falls.

    Values are rounded to float32 so the set survives an fvecs round trip unchanged.
    """
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-center_range, center_range, size=(clusters, d))
    sigmas = np.exp(rng.uniform(np.log(spread[0]), np.log(spread[1]), size=clusters))
    weights = rng.dirichlet(np.full(clusters, 2.0))
    labels = rng.choice(clusters, size=n, p=weights)
    points = centers[labels] + rng.standard_normal((n, d)) * sigmas[labels, None]
    return Dataset(points.astype(np.float32).astype(np.float64), source=f"mixture:seed={seed}")


def brute_force_knn(q, k: int, data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest neighbours of ``q``; ties go to the smaller id."""
    data = np.asarray(data)
    if not 1 <= k <= data.shape[0]:
        raise ValueError(f"k must lie in [1, {data.shape[0]}], got {k}")
    dists = euclidean(data, q)
    order = np.lexsort((np.arange(data.shape[0]), dists))[:k]
    return order.astype(np.int64), dists[order]
