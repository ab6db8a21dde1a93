"""Counter-based uniforms and seed derivation.

Coupling from the past must replay identical randomness when it restarts
further in the past.  Rather than storing the draws, every uniform is a hash
of ``(stream key, time, node)``, so any entry can be regenerated on demand and
whole batches of independent streams can be advanced together.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z):
    # splitmix64 finaliser
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def _u64(x):
    if isinstance(x, (int, np.integer)):
        return np.uint64(int(x) & _MASK64)
    return np.asarray(x).astype(np.int64).astype(np.uint64)


def stream_keys(seed: int, index) -> np.ndarray:
    """Per-draw stream keys derived from ``(seed, index)``."""
    with np.errstate(over="ignore"):
        h = _mix(_u64(seed) + _GOLDEN)
        return np.atleast_1d(_mix(h ^ (_u64(index) + _GOLDEN)))


def counter_uniforms(keys, time, node) -> np.ndarray:
    """Uniform(0, 1) variates for each stream key at ``(time, node)``."""
    keys = np.asarray(keys, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix(keys ^ (_u64(time) + _GOLDEN))
        h = _mix(h ^ (_u64(node) + _GOLDEN))
    return (np.asarray(h) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def derive_seed(master: int, *keys: int) -> int:
    """Independent 64-bit seed for the stream identified by ``keys``."""
    ss = np.random.SeedSequence(entropy=int(master) & _MASK64, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
