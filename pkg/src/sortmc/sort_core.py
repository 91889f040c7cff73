"""Three instrumented sorting algorithms over (key, payload) records.

Records live in numpy structured arrays of dtype :data:`KEY_RECORD`. Every
algorithm orders them lexicographically by ``(key, payload)``, so outputs of
different algorithms can be compared byte for byte.

=================  =====================================  ==============
AlgorithmId        scheme                                 comparisons
=================  =====================================  ==============
ADAPTIVE           single-thread introsort, adaptive      O(n log n)
PARTITION          parallel recursive quicksort           O(n log n)
BITONIC            stage-synchronous bitonic network      O(n log^2 n)
=================  =====================================  ==============
"""

from __future__ import annotations

import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from sortmc import _sortkernels as _k

KEY_RECORD = np.dtype([("key", np.uint64), ("payload", np.int64)])
MAX_KEY = np.uint64(np.iinfo(np.uint64).max)
# Padding is the largest possible record, so it always sorts to the tail.
PAD_PAYLOAD = np.iinfo(np.int64).max
DEFAULT_GRAIN = 8192
MIN_STAGE_CHUNK = 4096


class AlgorithmId(str, enum.Enum):
    ADAPTIVE = "AdaptiveSingleThread"
    PARTITION = "PartitionMultiThread"
    BITONIC = "BitonicNetwork"


@dataclass
class SortStats:
    comparisons: int = 0
    swaps: int = 0
    stages: int = 0
    wall_nanos: int = 0
    threads_used: int = 1


def make_records(keys, payloads=None) -> np.ndarray:
    """Build a record array; payloads default to the position index."""
    keys = np.asarray(keys)
    if keys.ndim != 1:
        raise ValueError("keys must be one-dimensional")
    if keys.dtype.kind == "i" and keys.size and keys.min() < 0:
        raise ValueError("keys must be non-negative")
    out = np.empty(keys.shape[0], dtype=KEY_RECORD)
    out["key"] = keys
    out["payload"] = np.arange(keys.shape[0]) if payloads is None else payloads
    return out


def _split(arr) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(arr)
    if arr.dtype != KEY_RECORD:
        raise TypeError(f"expected KEY_RECORD array, got dtype {arr.dtype}")
    return arr["key"].copy(), arr["payload"].copy()


def _join(keys, pays) -> np.ndarray:
    out = np.empty(keys.shape[0], dtype=KEY_RECORD)
    out["key"] = keys
    out["payload"] = pays
    return out


def sort_adaptive(arr) -> tuple[np.ndarray, SortStats]:
    """Single-threaded introspective sort; near-linear on nearly sorted input."""
    keys, pays = _split(arr)
    counters = np.zeros(2, dtype=np.int64)
    t0 = time.perf_counter_ns()
    _k.introsort(keys, pays, 0, keys.shape[0], counters)
    wall = time.perf_counter_ns() - t0
    stats = SortStats(int(counters[0]), int(counters[1]), 0, wall, 1)
    return _join(keys, pays), stats


def _partition_task(keys, pays, lo, hi):
    counters = np.zeros(2, dtype=np.int64)
    p, _ = _k.partition(keys, pays, lo, hi, counters)
    return p, counters


def _leaf_task(keys, pays, lo, hi):
    counters = np.zeros(2, dtype=np.int64)
    _k.introsort(keys, pays, lo, hi, counters)
    return counters


def sort_parallel(arr, workers: int, grain: int = DEFAULT_GRAIN
                  ) -> tuple[np.ndarray, SortStats]:
    """Recursive-partition quicksort with subranges handed to a thread pool.

    Partitioning proceeds level by level: every range longer than ``grain``
    is partitioned concurrently, and ranges at or below ``grain`` are
    finished with :func:`sort_adaptive`'s kernel. The sequence of partitions
    does not depend on ``workers``, so neither does the output or the
    comparison count. The partition phase has no depth limit.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if grain < _k.INSERTION_THRESHOLD:
        raise ValueError(f"grain must be >= {_k.INSERTION_THRESHOLD}")
    keys, pays = _split(arr)
    n = keys.shape[0]
    comps = 0
    swaps = 0
    t0 = time.perf_counter_ns()
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    run = pool.map if pool is not None else map
    try:
        pending = [(0, n)]
        leaves = []
        while pending:
            big = [r for r in pending if r[1] - r[0] > grain]
            leaves.extend(r for r in pending if r[1] - r[0] <= grain)
            pending = []
            results = run(lambda r: _partition_task(keys, pays, r[0], r[1]), big)
            for (lo, hi), (p, counters) in zip(big, results):
                comps += int(counters[0])
                swaps += int(counters[1])
                pending.append((lo, p))
                pending.append((p + 1, hi))
        for counters in run(lambda r: _leaf_task(keys, pays, r[0], r[1]), leaves):
            comps += int(counters[0])
            swaps += int(counters[1])
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    wall = time.perf_counter_ns() - t0
    return _join(keys, pays), SortStats(comps, swaps, 0, wall, workers)


def pad_to_power_of_two(arr) -> np.ndarray:
    """Append sentinel records up to the next power of two.

    An input whose length is already a power of two is returned unchanged
    (the same object). An empty input yields one sentinel.
    """
    arr = np.asarray(arr)
    n = arr.shape[0]
    if n and n & (n - 1) == 0:
        return arr
    target = 1 if n == 0 else 1 << (n - 1).bit_length()
    out = np.empty(target, dtype=KEY_RECORD)
    out[:n] = arr
    out["key"][n:] = MAX_KEY
    out["payload"][n:] = PAD_PAYLOAD
    return out


def bitonic_stage_schedule(n_pow2: int) -> list[np.ndarray]:
    """Explicit comparator schedule of the bitonic network on ``n_pow2`` wires.

    Each stage is an ``(n_pow2 // 2, 3)`` int64 array of ``(i, j, ascending)``
    rows with ``i < j``; comparators within a stage touch disjoint wires.
    A comparator with ``ascending == 1`` leaves the smaller record at ``i``.
    """
    if n_pow2 < 2 or n_pow2 & (n_pow2 - 1):
        raise ValueError(f"n_pow2 must be a power of two >= 2, got {n_pow2}")
    c = np.arange(n_pow2 // 2, dtype=np.int64)
    stages = []
    block = 2
    while block <= n_pow2:
        dist = block // 2
        while dist >= 1:
            i = (c // dist) * 2 * dist + (c % dist)
            stage = np.empty((c.shape[0], 3), dtype=np.int64)
            stage[:, 0] = i
            stage[:, 1] = i + dist
            stage[:, 2] = (i & block) == 0
            stages.append(stage)
            dist //= 2
        block *= 2
    return stages


def apply_schedule(values, schedule) -> np.ndarray:
    """Run a comparator schedule over plain comparable values (numpy).

    Wires run along axis 0, so a 2-D input sorts every column at once.
    """
    v = np.array(values, copy=True)
    for stage in schedule:
        i, j = stage[:, 0], stage[:, 1]
        asc = stage[:, 2].astype(bool).reshape((-1,) + (1,) * (v.ndim - 1))
        a, b = v[i], v[j]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        v[i] = np.where(asc, lo, hi)
        v[j] = np.where(asc, hi, lo)
    return v


def _stage_chunks(half: int, workers: int) -> list[tuple[int, int]]:
    # Below a few thousand comparators per chunk the barrier costs more than it saves.
    step = max(-(-half // workers), MIN_STAGE_CHUNK)
    return [(c0, min(c0 + step, half)) for c0 in range(0, half, step)]


def sort_bitonic(arr, workers: int = 1) -> tuple[np.ndarray, SortStats]:
    """Data-oblivious bitonic sort, one barrier-separated stage at a time.

    Input is padded to a power of two first; the returned array holds only
    the genuine records. With ``workers > 1`` each stage's comparators are
    split into contiguous chunks run on a thread pool, and the pool is
    drained before the next stage starts.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    arr = np.asarray(arr)
    n = arr.shape[0]
    keys, pays = _split(pad_to_power_of_two(arr))
    m = keys.shape[0]
    counters = np.zeros(2, dtype=np.int64)
    t0 = time.perf_counter_ns()
    half = m // 2
    chunks = _stage_chunks(half, workers) if half else []
    threads = max(1, len(chunks))
    if threads == 1:
        stages = _k.bitonic_network(keys, pays, counters)
    else:
        stages = 0
        with ThreadPoolExecutor(max_workers=threads) as pool:
            block = 2
            while block <= m:
                dist = block // 2
                while dist >= 1:
                    futures = [pool.submit(_k.bitonic_stage, keys, pays, block, dist, c0, c1)
                               for c0, c1 in chunks]
                    counters[1] += sum(f.result() for f in futures)
                    counters[0] += half
                    stages += 1
                    dist //= 2
                block *= 2
    wall = time.perf_counter_ns() - t0
    stats = SortStats(int(counters[0]), int(counters[1]), int(stages), wall, threads)
    return _join(keys[:n], pays[:n]), stats


def bitonic_comparator_count(n: int) -> int:
    """Comparators the network runs on ``n`` records after padding."""
    m = 1 if n <= 1 else 1 << (n - 1).bit_length()
    k = m.bit_length() - 1
    return (m // 2) * (k * (k + 1) // 2)


def sort_with(algorithm: AlgorithmId | str, arr, workers: int = 1
              ) -> tuple[np.ndarray, SortStats]:
    """Dispatch on :class:`AlgorithmId`."""
    algorithm = AlgorithmId(algorithm)
    if algorithm is AlgorithmId.ADAPTIVE:
        return sort_adaptive(arr)
    if algorithm is AlgorithmId.PARTITION:
        return sort_parallel(arr, workers)
    return sort_bitonic(arr, workers)


def is_sorted(arr) -> bool:
    """Lexicographic (key, payload) non-decreasing check."""
    arr = np.asarray(arr)
    if arr.shape[0] < 2:
        return True
    k, p = arr["key"], arr["payload"]
    k0, k1 = k[:-1], k[1:]
    return bool(np.all((k0 < k1) | ((k0 == k1) & (p[:-1] <= p[1:]))))
