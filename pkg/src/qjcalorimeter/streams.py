"""Counter-based random streams.

Every trajectory owns a key derived from ``(master_seed, index)``; each draw
is a hash of ``(key, substream, counter)``.  Nothing is sequential, so the
numbers a trajectory sees do not depend on which worker runs it or in what
order.  The mixer is the SplitMix64 finaliser.
"""

from __future__ import annotations

import numpy as np
from numba import njit, uint64

_GOLDEN = uint64(0x9E3779B97F4A7C15)
_M1 = uint64(0xBF58476D1CE4E5B9)
_M2 = uint64(0x94D049BB133111EB)
_SEED_SALT = uint64(0x5DEECE66D1CE4E5B)
_S30 = uint64(30)
_S27 = uint64(27)
_S31 = uint64(31)
_S11 = uint64(11)
_INV53 = 1.0 / 9007199254740992.0

# substreams of one trajectory
INIT = 0
JUMP = 1
MODE = 2
MEASURE = 3


@njit(cache=True, nogil=True)
def mix64(z):
    z = uint64(z)
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def trajectory_key(seed, index):
    base = mix64(uint64(seed) ^ _SEED_SALT)
    return mix64(base + uint64(index) * _GOLDEN)


@njit(cache=True, nogil=True)
def substream_key(key, tag):
    return mix64(uint64(key) ^ mix64(uint64(tag) + _GOLDEN))


@njit(cache=True, nogil=True)
def uniform(skey, counter):
    """Uniform double in ``[0, 1)`` for draw ``counter`` of substream ``skey``."""
    z = mix64(uint64(skey) + (uint64(counter) + uint64(1)) * _GOLDEN)
    return float(z >> _S11) * _INV53


@njit(cache=True, nogil=True)
def _keys(seed, start, count):
    out = np.empty(count, dtype=np.uint64)
    for i in range(count):
        out[i] = trajectory_key(seed, uint64(start + i))
    return out


def trajectory_keys(seed: int, start: int, count: int) -> np.ndarray:
    """Keys of trajectories ``start .. start+count-1`` as ``uint64``."""
    return _keys(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF), np.int64(start), np.int64(count))


class CounterRNG:
    """Tiny sequential view over one substream, for Python-level callers.

    Provides ``random()`` so it can stand in wherever a generator with that
    method is expected.
    """

    def __init__(self, seed: int, index: int = 0, tag: int = JUMP):
        # keys come back as Python ints; keep them unsigned for the next call
        key = np.uint64(trajectory_key(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF), np.uint64(index)))
        self._skey = np.uint64(substream_key(key, np.uint64(tag)))
        self._counter = 0

    def random(self) -> float:
        u = uniform(self._skey, np.uint64(self._counter))
        self._counter += 1
        return u
