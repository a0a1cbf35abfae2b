"""Seeded splitmix64 generator.

Used wherever reproducibility must hold bit-for-bit across platforms and
library versions (data-generation rotation draws, fixture weights). The
update constant is 0x9E3779B97F4A7C15 and the mix constants are
0xBF58476D1CE4E5B9 / 0x94D049BB133111EB, i.e. plain splitmix64.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, name: str) -> int:
    """Stable sub-seed for a named stream (FNV-1a over the name, mixed with the seed)."""
    with np.errstate(over="ignore"):
        h = _FNV_OFFSET
        for byte in name.encode("utf-8"):
            h = (h ^ np.uint64(byte)) * _FNV_PRIME
        return int(_mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GOLDEN * h))


class SplitMix64:
    """Deterministic stream of uniforms; vectorised, no hidden global state."""

    def __init__(self, seed: int):
        self._state = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self._drawn = np.uint64(0)

    def _raw(self, n: int) -> np.ndarray:
        idx = np.arange(1, n + 1, dtype=np.uint64) + self._drawn
        self._drawn += np.uint64(n)
        with np.errstate(over="ignore"):
            return _mix(self._state + idx * _GOLDEN)

    def uniform(self, low: float = 0.0, high: float = 1.0, size: int | tuple[int, ...] = ()) -> np.ndarray | float:
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        out = low + (high - low) * u
        return out.reshape(shape) if shape else float(out[0])

    def integers(self, low: int, high: int, size: int = 1) -> np.ndarray:
        # rejection-free modulo; fine for the small ranges used here
        return (self._raw(size) % np.uint64(high - low)).astype(np.int64) + low
