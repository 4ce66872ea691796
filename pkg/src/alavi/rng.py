"""Portable seeded randomness for instance generation.

Everything downstream of a seed must replay bit-for-bit, independent of
numpy version or platform.  The generator is splitmix64: output ``i`` of
stream ``s`` is ``mix64(s + i*GOLDEN)``, which vectorizes because the raw
states form an arithmetic progression.  Named substreams are derived by
hashing a label into the seed, so each matrix of an instance draws from
its own stream.  Normal variates use Box-Muller on 53-bit uniforms (no
rejection step, hence no data-dependent stream consumption).
"""

from __future__ import annotations

import math

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix64_scalar(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return (z ^ (z >> 31)) & _MASK


def _fnv1a64(label: str) -> int:
    h = _FNV_OFFSET
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK
    return h


def stream_seed(seed: int, label: str) -> int:
    """Derive the 64-bit seed of the named substream."""
    return _mix64_scalar(_mix64_scalar(seed) ^ _fnv1a64(label))


def _mix64_array(state: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (state ^ (state >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


class PortableRng:
    """Sequential splitmix64 stream with uniform and normal draws."""

    def __init__(self, seed: int, label: str = ""):
        self._seed = np.uint64(stream_seed(seed, label) if label else seed & _MASK)
        self._index = 0

    def raw(self, count: int) -> np.ndarray:
        """Next ``count`` raw 64-bit outputs."""
        idx = np.arange(self._index + 1, self._index + count + 1, dtype=np.uint64)
        self._index += count
        with np.errstate(over="ignore"):
            state = self._seed + idx * np.uint64(_GOLDEN)
        return _mix64_array(state)

    def uniform(self, count: int) -> np.ndarray:
        """Uniforms in [0, 1) with 53-bit resolution."""
        return (self.raw(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, count: int) -> np.ndarray:
        """Standard normals via Box-Muller; consumes 2*ceil(count/2) raw outputs."""
        pairs = (count + 1) // 2
        raw = self.raw(2 * pairs)
        # u1 in (0, 1] so the log is finite; u2 in [0, 1).
        u1 = ((raw[:pairs] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (raw[pairs:] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * math.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:count]

    def normal_matrix(self, rows: int, cols: int) -> np.ndarray:
        """Row-major matrix of standard normals."""
        return self.normal(rows * cols).reshape(rows, cols)

    def uniform_box(self, lo: np.ndarray, hi: np.ndarray, count: int) -> np.ndarray:
        """``count`` points uniform in the box [lo, hi], shape (count, dim)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        u = self.uniform(count * lo.size).reshape(count, lo.size)
        return lo + u * (hi - lo)
