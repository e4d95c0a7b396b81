"""Euclidean p-stable hashing and collision-counting parameters.

A hash function maps a point to ``floor((a . x + b) / w)`` with ``a`` drawn
from N(0, I). A family of ``m`` such functions (one per hash layer) plus the
thresholds derived here is everything the collision-counting search needs.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from radius_lsh.rng import SplitMix64

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class ParameterError(ValueError):
    """Raised for inputs outside the domain of a formula."""


def _adaptive_simpson(f, lo: float, hi: float, tol: float, max_depth: int = 60) -> float:
    def simpson(a, fa, b, fb):
        mid = 0.5 * (a + b)
        fm = f(mid)
        return mid, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    fa, fb = f(lo), f(hi)
    mid, fm, whole = simpson(lo, fa, hi, fb)
    total = 0.0
    stack = [(lo, fa, hi, fb, mid, fm, whole, tol, max_depth)]
    while stack:
        a, fa, b, fb, m, fm, whole, eps, depth = stack.pop()
        lm, flm, left = simpson(a, fa, m, fm)
        rm, frm, right = simpson(m, fm, b, fb)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        else:
            stack.append((a, fa, m, fm, lm, flm, left, eps / 2.0, depth - 1))
            stack.append((m, fm, b, fb, rm, frm, right, eps / 2.0, depth - 1))
    return total


def collision_prob(r: float, w: float, tol: float = 1e-9) -> float:
    """Probability that two points at distance ``r`` share a bucket of width ``w``.

    Integrates the folded-normal density of the projected gap against the
    chance that a random offset keeps both points in one bucket.
    """
    if not r > 0 or not w > 0:
        raise ParameterError(f"collision_prob needs r > 0 and w > 0, got r={r}, w={w}")
    scale = 2.0 / (_SQRT_2PI * r)
    inv_two_r2 = 1.0 / (2.0 * r * r)

    def integrand(t: float) -> float:
        return scale * math.exp(-t * t * inv_two_r2) * (1.0 - t / w)

    return _adaptive_simpson(integrand, 0.0, w, tol)


@dataclass(frozen=True)
class LSHParams:
    n: int
    c: float
    w: float
    delta: float
    beta: float
    p1: float
    p2: float
    z: float
    alpha: float
    m: int
    l: int

    @property
    def false_positive_allowance(self) -> int:
        """Number of extra candidates tolerated before stopping, ``ceil(beta * n)``."""
        return math.ceil(self.beta * self.n - 1e-9)


def derive_params(n: int, c: float = 2.0, w: float = 2.184, delta: float = 0.1) -> LSHParams:
    """Collision-counting constants for a dataset of ``n`` points."""
    if n < 100:
        raise ParameterError(f"n must be >= 100 so that beta = 100/n <= 1, got {n}")
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    if not c > 1.0:
        raise ParameterError(f"approximation ratio c must exceed 1, got {c}")
    if not w > 0.0:
        raise ParameterError(f"bucket width w must be positive, got {w}")

    beta = 100.0 / n
    p1 = collision_prob(1.0, w)
    p2 = collision_prob(c, w)
    z = math.sqrt(math.log(2.0 / beta) / math.log(1.0 / delta))
    m = math.ceil(math.log(1.0 / delta) / (2.0 * (p1 - p2) ** 2) * (1.0 + z) ** 2)
    alpha = (z * p1 + p2) / (1.0 + z)
    l = math.ceil(alpha * m)
    return LSHParams(n=n, c=c, w=w, delta=delta, beta=beta, p1=p1, p2=p2,
                     z=z, alpha=alpha, m=m, l=l)


def radius_exponent(t: float, d: int, c: float) -> int:
    """Smallest integer ``e >= 0`` with ``c**e >= t * d``."""
    target = t * d
    if target <= 1.0:
        return 0
    e = max(0, math.ceil(math.log(target) / math.log(c)))
    # log rounding can be off by one near exact powers
    while e > 0 and c ** (e - 1) >= target:
        e -= 1
    while c ** e < target:
        e += 1
    return e


def offset_upper_bound(t: float, d: int, c: float, w: float, squared_width: bool = True) -> float:
    """Upper end of the interval offsets ``b`` are drawn from.

    ``squared_width`` selects ``c**e * w**2``; otherwise ``c**e * w``.
    """
    scale = c ** radius_exponent(t, d, c)
    return scale * (w * w if squared_width else w)


@dataclass(frozen=True)
class HashFunction:
    a: np.ndarray
    b: float
    w: float

    def __post_init__(self):
        if self.w <= 0:
            raise ParameterError("bucket width must be positive")


def project(points: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Row-wise ``points @ a.T`` with a fixed summation order.

    BLAS may reorder sums differently for a single row than for a block, which
    would let a query and the identical indexed point fall on opposite sides of
    a bucket boundary. Accumulating one coordinate at a time keeps every row
    bit-identical no matter how many rows are hashed together.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    out = np.zeros((points.shape[0], a.shape[0]), dtype=np.float64)
    for j in range(points.shape[1]):
        out += points[:, j, None] * a[None, :, j]
    return out


class HashFamily:
    """``m`` independent hash functions sharing bucket width ``w``.

    Regenerating with the same ``(d, m, w, seed, b_upper)`` reproduces the
    functions bit for bit.
    """

    def __init__(self, a: np.ndarray, b: np.ndarray, w: float, seed: int, b_upper: float):
        a = np.ascontiguousarray(a, dtype=np.float64)
        b = np.ascontiguousarray(b, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] == 0:
            raise ParameterError("a hash family needs at least one function")
        if b.shape != (a.shape[0],):
            raise ParameterError("one offset per hash function is required")
        if w <= 0:
            raise ParameterError("bucket width must be positive")
        self.a = a
        self.b = b
        self.w = float(w)
        self.seed = int(seed)
        self.b_upper = float(b_upper)
        self.a.flags.writeable = False
        self.b.flags.writeable = False

    @classmethod
    def generate(cls, d: int, m: int, w: float, seed: int, b_upper: float) -> "HashFamily":
        if d < 1 or m < 1:
            raise ParameterError(f"need d >= 1 and m >= 1, got d={d}, m={m}")
        rng = SplitMix64(seed)
        a = rng.standard_normal(m * d).reshape(m, d)
        b = rng.uniform(m) * b_upper
        return cls(a, b, w, seed, b_upper)

    @classmethod
    def for_dataset(cls, data: np.ndarray, m: int, c: float, w: float, seed: int,
                    squared_width: bool = True) -> "HashFamily":
        """Family whose offset interval is sized from the dataset's largest coordinate."""
        data = np.asarray(data)
        t = float(np.max(np.abs(data))) if data.size else 0.0
        return cls.generate(data.shape[1], m, w, seed,
                            offset_upper_bound(t, data.shape[1], c, w, squared_width))

    @property
    def d(self) -> int:
        return self.a.shape[1]

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def functions(self) -> list[HashFunction]:
        return [HashFunction(self.a[i], float(self.b[i]), self.w) for i in range(self.m)]

    def hash_points(self, points: np.ndarray) -> np.ndarray:
        """Bucket matrix of shape ``(n, m)``."""
        points = np.atleast_2d(points)
        if points.shape[1] != self.d:
            raise ParameterError(f"expected {self.d}-dimensional points, got {points.shape[1]}")
        return np.floor((project(points, self.a) + self.b) / self.w).astype(np.int64)

    def __eq__(self, other):
        if not isinstance(other, HashFamily):
            return NotImplemented
        return (self.w == other.w and self.seed == other.seed and self.b_upper == other.b_upper
                and np.array_equal(self.a, other.a) and np.array_equal(self.b, other.b))


def hash_point(coords, fn: HashFunction) -> int:
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape != fn.a.shape:
        raise ParameterError(f"point has {coords.shape[0]} coordinates, function expects {fn.a.shape[0]}")
    proj = project(coords, fn.a[None, :])[0, 0]
    return math.floor((proj + fn.b) / fn.w)


def hash_level(bucket: int, radius: int) -> int:
    """Bucket at level ``radius``: ``floor(bucket / radius)``, rounding toward -inf."""
    if radius < 1:
        raise ParameterError(f"level radius must be >= 1, got {radius}")
    return int(bucket) // int(radius)


def signature(q, family: HashFamily) -> np.ndarray:
    """The query's bucket in every projection, as a length-``m`` int64 vector."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 1:
        raise ParameterError("signature expects a single point")
    return family.hash_points(q[None, :])[0]


# Family file: little-endian header then m records of (a[0..d), b).
FAMILY_MAGIC = b"LSHFAM\x00\x00"
FAMILY_VERSION = 1
_FAMILY_HEADER = struct.Struct("<8sIIIddQ")


def save_family(family: HashFamily, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_FAMILY_HEADER.pack(FAMILY_MAGIC, FAMILY_VERSION, family.d, family.m,
                                     family.w, family.b_upper, family.seed & 0xFFFFFFFFFFFFFFFF))
        records = np.concatenate([family.a, family.b[:, None]], axis=1)
        fh.write(records.astype("<f8").tobytes())


def load_family(path: str | Path) -> HashFamily:
    raw = Path(path).read_bytes()
    if len(raw) < _FAMILY_HEADER.size:
        raise ValueError(f"{path}: truncated hash family header")
    magic, version, d, m, w, b_upper, seed = _FAMILY_HEADER.unpack_from(raw)
    if magic != FAMILY_MAGIC:
        raise ValueError(f"{path}: not a hash family file")
    if version != FAMILY_VERSION:
        raise ValueError(f"{path}: unsupported hash family version {version}")
    body = np.frombuffer(raw, dtype="<f8", offset=_FAMILY_HEADER.size)
    if body.size != m * (d + 1):
        raise ValueError(f"{path}: expected {m * (d + 1)} values, found {body.size}")
    records = body.reshape(m, d + 1).astype(np.float64)
    return HashFamily(records[:, :d], records[:, d], w, seed, b_upper)
