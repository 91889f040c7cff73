"""Input generators and presortedness metrics for sorting experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from sortmc import rng as _rng
from sortmc.sort_core import make_records


@dataclass(frozen=True)
class GenSpec:
    n: int
    r: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"n must be >= 0, got {self.n}")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"r must lie in [0, 1], got {self.r}")

    @property
    def swap_count(self) -> int:
        return math.floor(self.n * self.r)


@dataclass(frozen=True)
class PresortReport:
    inversion_fraction: float
    sorted_runs: int
    displaced_fraction: float
    inversions: int = 0
    n: int = 0


def gen_uniform_random(n: int, seed: int) -> np.ndarray:
    """``n`` records with keys drawn independently from {0, ..., n-1}."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n == 0:
        return make_records(np.empty(0, dtype=np.uint64))
    gen = _rng.CounterRNG(seed, _rng.STREAM_UNIFORM, n)
    keys = gen.integers(np.arange(n, dtype=np.uint64), n)
    return make_records(keys)


@njit(cache=True)
def _apply_swaps(keys, seed, stream, count):
    n = keys.shape[0]
    un = np.uint64(n)
    for s in range(count):
        i = _rng.hash4(seed, stream, n, 2 * s) % un
        j = _rng.hash4(seed, stream, n, 2 * s + 1) % un
        t = keys[i]
        keys[i] = keys[j]
        keys[j] = t


def gen_partially_sorted(spec: GenSpec) -> np.ndarray:
    """Identity array 0..n-1 with floor(n*r) random pair swaps applied.

    Pairs are drawn independently with replacement; a pair with equal
    indices still counts as one of the swaps.
    """
    keys = np.arange(spec.n, dtype=np.uint64)
    if spec.n:
        _apply_swaps(keys, np.uint64(spec.seed & 0xFFFFFFFFFFFFFFFF),
                     _rng.STREAM_SWAPS, spec.swap_count)
    return make_records(keys)


@njit(cache=True)
def _merge_count(keys):
    # Bottom-up merge sort on a copy; counts pairs i < j with keys[i] > keys[j].
    n = keys.shape[0]
    src = keys.copy()
    dst = np.empty_like(src)
    inversions = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i = lo
            j = mid
            k = lo
            while i < mid and j < hi:
                if src[j] < src[i]:
                    dst[k] = src[j]
                    inversions += mid - i
                    j += 1
                else:
                    dst[k] = src[i]
                    i += 1
                k += 1
            while i < mid:
                dst[k] = src[i]
                i += 1
                k += 1
            while j < hi:
                dst[k] = src[j]
                j += 1
                k += 1
        src, dst = dst, src
        width *= 2
    return inversions, src


def count_inversions(keys) -> int:
    keys = np.ascontiguousarray(keys)
    if keys.shape[0] < 2:
        return 0
    return int(_merge_count(keys)[0])


def inversion_fraction(arr) -> PresortReport:
    """Presortedness of an array of records, judged by key only.

    ``inversion_fraction`` is inversions over n(n-1)/2; ``sorted_runs`` counts
    maximal non-decreasing runs (0 for an empty array); ``displaced_fraction``
    is the share of positions whose key differs from the sorted key there.
    """
    keys = np.ascontiguousarray(np.asarray(arr)["key"])
    n = keys.shape[0]
    if n == 0:
        return PresortReport(0.0, 0, 0.0, 0, 0)
    if n == 1:
        return PresortReport(0.0, 1, 0.0, 0, 1)
    inversions, sorted_keys = _merge_count(keys)
    runs = 1 + int(np.count_nonzero(keys[1:] < keys[:-1]))
    displaced = np.count_nonzero(keys != sorted_keys) / n
    frac = inversions / (n * (n - 1) / 2)
    return PresortReport(float(frac), runs, float(displaced), int(inversions), n)
