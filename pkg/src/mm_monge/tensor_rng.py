"""Dense float64 helpers and a counter-based random generator.

Matrices are plain ``numpy.ndarray`` objects of dtype float64 and shape
``(rows, cols)``; rows are samples, columns are coordinates.

The generator is SplitMix64 evaluated on a running 64-bit counter, so a
block of ``n`` draws is a pure function of ``(seed, counter)`` and can be
produced in one vectorised call.  Output is identical on every platform
that has IEEE doubles, independent of the numpy version.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "SizeError",
    "Rng",
    "as_matrix",
    "check_finite",
    "standard_normal_matrix",
    "pairwise_sq_dists",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


class SizeError(ValueError):
    """Raised when array shapes or sample counts are incompatible."""


def as_matrix(a, name: str = "array") -> np.ndarray:
    """Coerce ``a`` to a C-contiguous float64 2-d array."""
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise SizeError(f"{name} must be 2-d, got shape {m.shape}")
    return m


def check_finite(a: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise FloatingPointError(f"{name} contains non-finite entries")
    return a


def _splitmix64(counters: np.ndarray) -> np.ndarray:
    z = counters * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class Rng:
    """Seeded stream of uint64 words.

    Single owner only.  Use :meth:`spawn` to hand independent streams to
    workers instead of sharing one generator.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        # counter starts at seed + 1 so that seed 0 does not emit mix(0) = 0
        self._counter = (self.seed * 0x2545F4914F6CDD1D + 1) & _MASK64

    def _words(self, n: int) -> np.ndarray:
        start = self._counter
        self._counter = (start + n) & _MASK64
        with np.errstate(over="ignore"):
            ctr = np.uint64(start) + np.arange(n, dtype=np.uint64)
            return _splitmix64(ctr)

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles in [0, 1) with 53 random bits each."""
        w = self._words(n)
        return (w >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)

    def standard_normal(self, n: int) -> np.ndarray:
        """Box-Muller; always consumes ``2 * ceil(n / 2)`` uniforms."""
        k = (n + 1) // 2
        u = self.uniform(2 * k)
        u1 = 1.0 - u[:k]  # (0, 1], keeps log finite
        u2 = u[k:]
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.empty(2 * k)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:n]

    def integers(self, high: int, n: int) -> np.ndarray:
        """``n`` draws from {0, ..., high-1}, with replacement."""
        if high < 1:
            raise SizeError("high must be >= 1")
        idx = np.floor(self.uniform(n) * high).astype(np.int64)
        return np.minimum(idx, high - 1)

    def spawn(self, n: int) -> list[Rng]:
        seeds = self._words(n)
        return [Rng(int(s)) for s in seeds]


def standard_normal_matrix(rng: Rng, rows: int, cols: int) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise SizeError(f"need rows, cols >= 1, got {rows}x{cols}")
    return rng.standard_normal(rows * cols).reshape(rows, cols)


def pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``D[i, j] = sum_k (a[i, k] - b[j, k])**2`` by direct subtraction.

    cdist's sqeuclidean metric subtracts per pair, so the result is never
    negative and ``pairwise_sq_dists(a, a)`` has an exact zero diagonal
    (the |a|^2 + |b|^2 - 2ab expansion guarantees neither).
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise SizeError(f"column mismatch: {a.shape[1]} vs {b.shape[1]}")
    return cdist(a, b, "sqeuclidean")
