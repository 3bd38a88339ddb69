"""Counter-based deterministic random draws.

Every stochastic value in the simulator is a pure function of a seed plus
integer counters (stream tag, octave, pixel index, ...). There is no
sequential generator state, so results cannot depend on evaluation order,
chunking, or thread count.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / (1 << 53)


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _as_u64(value) -> np.ndarray:
    arr = np.asarray(value)
    if arr.dtype == np.uint64:
        return arr
    if arr.dtype.kind not in "iu":
        raise TypeError(f"hash words must be integers, got dtype {arr.dtype}")
    return arr.astype(np.int64).view(np.uint64)


def hash_u64(seed: int, *words) -> np.ndarray:
    """Mix a seed and integer words (scalars or arrays) into uint64 values.

    Array words broadcast against each other; the result has the broadcast
    shape (0-d for all-scalar input).
    """
    with np.errstate(over="ignore"):
        out = _mix(np.asarray(np.uint64(seed & _MASK64)) + _GAMMA)
        for word in words:
            out = _mix((out ^ _as_u64(word)) + _GAMMA)
        return out


def uniform(seed: int, *words) -> np.ndarray:
    """Uniform draw in [0, 1), one value per broadcast element."""
    bits = hash_u64(seed, *words) >> np.uint64(11)
    return bits.astype(np.float64) * _INV_2_53


def normal(seed: int, *words) -> np.ndarray:
    """Standard normal draw via Box-Muller on two decorrelated uniforms."""
    u1 = uniform(seed, *words, 0)
    u2 = uniform(seed, *words, 1)
    radius = np.sqrt(-2.0 * np.log1p(-u1))  # 1 - u1 in (0, 1], no log(0)
    return radius * np.cos(2.0 * np.pi * u2)
