"""Counter-based hashing RNG.

Every random quantity in the package is a pure function of a 64-bit seed and
an integer key, so configurations can be regenerated piecewise, in any order,
on any platform.
"""
from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_OFFSET = 1 << 30


def _mix_int(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        z ^= z >> np.uint64(30)
        z *= np.uint64(_M1)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_M2)
        z ^= z >> np.uint64(31)
    return z


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed for a (seed, key, key, ...) tuple."""
    h = _mix_int(seed + _GOLDEN)
    for k in keys:
        h = _mix_int(h ^ _mix_int((k & _MASK) + _GOLDEN))
    return h


def uniforms(seed: int, kind: int, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Uniform [0, 1) values keyed by (seed, kind, x, y).

    ``kind`` separates streams (horizontal edges, vertical edges, vertex tie-breaks).
    Coordinates must lie in [-2**30, 2**30).
    """
    xs = np.asarray(xs, dtype=np.int64) + _OFFSET
    ys = np.asarray(ys, dtype=np.int64) + _OFFSET
    counter = (np.uint64(kind & 3) << np.uint64(62)) | (xs.astype(np.uint64) << np.uint64(31)) | ys.astype(np.uint64)
    key = np.uint64(_mix_int(seed + _GOLDEN))
    h = _mix_array(counter ^ key)
    with np.errstate(over="ignore"):
        h = _mix_array(h + np.uint64(_GOLDEN))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
