"""SplitMix64 generator with Box-Muller normals.

The hash family must be bit-reproducible across platforms and numpy
versions, so it draws from this counter-based generator instead of
``numpy.random``. SplitMix64 output ``i`` depends only on ``seed`` and
``i``, which lets whole blocks be produced with vectorised uint64 math.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / float(1 << 53)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Seedable 64-bit generator; ``draw`` advances an internal counter."""

    def __init__(self, seed: int) -> None:
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._counter = 0

    def next_u64(self, count: int) -> np.ndarray:
        idx = np.arange(self._counter + 1, self._counter + count + 1, dtype=np.uint64)
        self._counter += count
        with np.errstate(over="ignore"):
            return _mix(np.uint64(self.seed) + idx * _GAMMA)

    def uniform(self, count: int) -> np.ndarray:
        """Doubles in [0, 1) with 53 random bits each."""
        return (self.next_u64(count) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def standard_normal(self, count: int) -> np.ndarray:
        """Box-Muller transform; consumes two uniforms per output value."""
        u = self.uniform(2 * count).reshape(count, 2)
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        return radius * np.cos(2.0 * np.pi * u[:, 1])
