"""Counter-based 64-bit random numbers.

Every draw is a pure function of ``(seed, a, b, c)``: no generator state is
carried between calls, so any consumer can jump to any position of any
substream. The mixer is the SplitMix64 finalizer applied in a chain, one
round per coordinate.
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV_2_53 = 1.0 / 9007199254740992.0

# Stream tags keep generators from different subsystems independent.
STREAM_UNIFORM = 1
STREAM_SWAPS = 2
STREAM_TRANSPORT = 3
STREAM_SOURCE = 4
STREAM_COMB = 5
STREAM_FISSION = 6


@njit(cache=True, nogil=True)
def mix64(x):
    x = np.uint64(x)
    x = (x ^ (x >> _S30)) * _M1
    x = (x ^ (x >> _S27)) * _M2
    return x ^ (x >> _S31)


@njit(cache=True, nogil=True)
def hash4(seed, a, b, c):
    """64-bit hash of four integer coordinates."""
    h = mix64(np.uint64(seed) + _GOLDEN)
    h = mix64(h ^ (np.uint64(a) + _GOLDEN))
    h = mix64(h ^ (np.uint64(b) + _GOLDEN))
    return mix64(h ^ (np.uint64(c) + _GOLDEN))


@njit(cache=True, nogil=True)
def uniform01(seed, a, b, c):
    """Uniform double in [0, 1) with 53 random bits."""
    return float(hash4(seed, a, b, c) >> _S11) * _INV_2_53


@njit(cache=True, nogil=True)
def _fill_uniform(seed, a, b, counters, out):
    for i in range(counters.shape[0]):
        out[i] = uniform01(seed, a, b, counters[i])


@njit(cache=True, nogil=True)
def _fill_bounded(seed, a, b, counters, bound, out):
    ub = np.uint64(bound)
    for i in range(counters.shape[0]):
        out[i] = hash4(seed, a, b, counters[i]) % ub


class CounterRNG:
    """Substream ``(seed, stream, substream)`` addressed by an integer counter.

    >>> rng = CounterRNG(7, stream=1)
    >>> rng.random(3) == rng.random(3)
    True
    """

    def __init__(self, seed: int, stream: int = 0, substream: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = int(stream)
        self.substream = int(substream)

    def random(self, counter: int) -> float:
        return uniform01(
            np.uint64(self.seed), self.stream, self.substream, np.uint64(counter)
        )

    def random_array(self, counters) -> np.ndarray:
        counters = np.ascontiguousarray(counters, dtype=np.uint64)
        out = np.empty(counters.shape[0], dtype=np.float64)
        _fill_uniform(np.uint64(self.seed), self.stream, self.substream, counters, out)
        return out

    def integers(self, counters, bound: int) -> np.ndarray:
        """Integers in ``[0, bound)``; modulo bias is below ``bound / 2**64``."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        counters = np.ascontiguousarray(counters, dtype=np.uint64)
        out = np.empty(counters.shape[0], dtype=np.uint64)
        _fill_bounded(
            np.uint64(self.seed), self.stream, self.substream, counters, bound, out
        )
        return out

    def spawn(self, substream: int) -> "CounterRNG":
        return CounterRNG(self.seed, self.stream, substream)
