"""Numba kernels behind :mod:`sortmc.sort_core`.

All kernels operate on a pair of contiguous arrays ``keys`` (uint64) and
``pays`` (int64) that are permuted together, and order records
lexicographically by ``(key, payload)``. ``counters`` is an int64 array of
length 2 holding ``[comparisons, swaps]``; kernels add to it.
"""

import llvmlite.binding as _llvm
import numpy as np
from numba import njit

# The x86 backend otherwise rewrites the bitonic compare-exchange selects
# into branches, which makes network run time depend on the data.
_llvm.set_option("sortmc", "-x86-cmov-converter=false")

INSERTION_THRESHOLD = 16
PARTIAL_INSERTION_LIMIT = 8


@njit(cache=True, nogil=True, inline="always")
def _lt(ka, pa, kb, pb):
    return ka < kb or (ka == kb and pa < pb)


@njit(cache=True, nogil=True, inline="always")
def _swap(keys, pays, i, j):
    k = keys[i]
    keys[i] = keys[j]
    keys[j] = k
    p = pays[i]
    pays[i] = pays[j]
    pays[j] = p


@njit(cache=True, nogil=True)
def insertion_sort(keys, pays, lo, hi, counters):
    for i in range(lo + 1, hi):
        k = keys[i]
        p = pays[i]
        j = i - 1
        while j >= lo:
            counters[0] += 1
            if not _lt(k, p, keys[j], pays[j]):
                break
            keys[j + 1] = keys[j]
            pays[j + 1] = pays[j]
            counters[1] += 1
            j -= 1
        keys[j + 1] = k
        pays[j + 1] = p


@njit(cache=True, nogil=True)
def partial_insertion_sort(keys, pays, lo, hi, counters, limit):
    """Insertion sort that gives up once more than ``limit`` elements moved.

    Returns True when [lo, hi) ends up sorted. On a sorted range this costs
    exactly ``hi - lo - 1`` comparisons.
    """
    moved = 0
    for i in range(lo + 1, hi):
        counters[0] += 1
        if not _lt(keys[i], pays[i], keys[i - 1], pays[i - 1]):
            continue
        k = keys[i]
        p = pays[i]
        j = i
        while True:
            keys[j] = keys[j - 1]
            pays[j] = pays[j - 1]
            counters[1] += 1
            j -= 1
            if j == lo:
                break
            counters[0] += 1
            if not _lt(k, p, keys[j - 1], pays[j - 1]):
                break
        keys[j] = k
        pays[j] = p
        moved += i - j
        if moved > limit:
            return False
    return True


@njit(cache=True, nogil=True)
def _sift_down(keys, pays, lo, root, end, counters):
    while True:
        child = 2 * root + 1
        if child >= end:
            return
        if child + 1 < end:
            counters[0] += 1
            if _lt(keys[lo + child], pays[lo + child],
                   keys[lo + child + 1], pays[lo + child + 1]):
                child += 1
        counters[0] += 1
        if not _lt(keys[lo + root], pays[lo + root],
                   keys[lo + child], pays[lo + child]):
            return
        _swap(keys, pays, lo + root, lo + child)
        counters[1] += 1
        root = child


@njit(cache=True, nogil=True)
def heapsort(keys, pays, lo, hi, counters):
    n = hi - lo
    for start in range(n // 2 - 1, -1, -1):
        _sift_down(keys, pays, lo, start, n, counters)
    for end in range(n - 1, 0, -1):
        _swap(keys, pays, lo, lo + end)
        counters[1] += 1
        _sift_down(keys, pays, lo, 0, end, counters)


@njit(cache=True, nogil=True)
def _sort3(keys, pays, a, b, c, counters):
    # Leaves the median of the three positions at b.
    counters[0] += 1
    if _lt(keys[b], pays[b], keys[a], pays[a]):
        _swap(keys, pays, a, b)
        counters[1] += 1
    counters[0] += 1
    if _lt(keys[c], pays[c], keys[b], pays[b]):
        _swap(keys, pays, b, c)
        counters[1] += 1
        counters[0] += 1
        if _lt(keys[b], pays[b], keys[a], pays[a]):
            _swap(keys, pays, a, b)
            counters[1] += 1


@njit(cache=True, nogil=True)
def partition(keys, pays, lo, hi, counters):
    """Median-of-three Hoare partition of [lo, hi), requires hi - lo >= 3.

    Returns ``(pivot_index, already_partitioned)``; the second flag is True
    when the scan needed no exchanges.
    """
    mid = lo + (hi - lo) // 2
    _sort3(keys, pays, mid, lo, hi - 1, counters)
    pk = keys[lo]
    pp = pays[lo]
    i = lo + 1
    j = hi - 1
    exchanged = False
    while True:
        while i <= j:
            counters[0] += 1
            if not _lt(keys[i], pays[i], pk, pp):
                break
            i += 1
        while i <= j:
            counters[0] += 1
            if not _lt(pk, pp, keys[j], pays[j]):
                break
            j -= 1
        if i >= j:
            break
        _swap(keys, pays, i, j)
        counters[1] += 1
        exchanged = True
        i += 1
        j -= 1
    if j != lo:
        _swap(keys, pays, lo, j)
        counters[1] += 1
    return j, not exchanged


@njit(cache=True, nogil=True)
def _floor_log2(n):
    k = 0
    while n > 1:
        n >>= 1
        k += 1
    return k


@njit(cache=True, nogil=True)
def introsort(keys, pays, lo, hi, counters):
    """Introspective sort of [lo, hi) that is adaptive to presortedness.

    A bounded insertion pass runs first, so sorted input costs n - 1
    comparisons. Otherwise quicksort with a 2*floor(log2 n) depth budget
    before heapsort takes over; slices of at most 16 go to insertion sort.
    When a partition scan exchanged nothing, both halves get another bounded
    insertion attempt, which keeps nearly sorted input near linear.
    """
    n = hi - lo
    if n < 2:
        return
    if partial_insertion_sort(keys, pays, lo, hi, counters, PARTIAL_INSERTION_LIMIT):
        return
    max_depth = 2 * _floor_log2(n)
    # Explicit stack; its height is bounded by the depth budget.
    stack = np.empty((2 * max_depth + 64, 3), dtype=np.int64)
    top = 0
    stack[0, 0] = lo
    stack[0, 1] = hi
    stack[0, 2] = max_depth
    top = 1
    while top > 0:
        top -= 1
        a = stack[top, 0]
        b = stack[top, 1]
        depth = stack[top, 2]
        while True:
            size = b - a
            if size <= INSERTION_THRESHOLD:
                insertion_sort(keys, pays, a, b, counters)
                break
            if depth == 0:
                heapsort(keys, pays, a, b, counters)
                break
            depth -= 1
            p, clean = partition(keys, pays, a, b, counters)
            if clean:
                left_ok = partial_insertion_sort(
                    keys, pays, a, p, counters, PARTIAL_INSERTION_LIMIT)
                right_ok = partial_insertion_sort(
                    keys, pays, p + 1, b, counters, PARTIAL_INSERTION_LIMIT)
                if left_ok and right_ok:
                    break
                if left_ok:
                    a = p + 1
                    continue
                if right_ok:
                    b = p
                    continue
            if p - a < b - p - 1:
                stack[top, 0] = a
                stack[top, 1] = p
                stack[top, 2] = depth
                top += 1
                a = p + 1
            else:
                stack[top, 0] = p + 1
                stack[top, 1] = b
                stack[top, 2] = depth
                top += 1
                b = p


@njit(cache=True, nogil=True, inline="always")
def _compare_exchange(keys, pays, a, b, ascending):
    # a, b and ascending are uint64; unsigned indices skip wraparound checks.
    ka = keys[a]
    kb = keys[b]
    pa = pays[a]
    pb = pays[b]
    eq = np.uint64(ka == kb)
    b_first = np.uint64(kb < ka) | (eq & np.uint64(pb < pa))
    a_first = np.uint64(ka < kb) | (eq & np.uint64(pa < pb))
    do = (ascending & b_first) | ((np.uint64(1) - ascending) & a_first)
    mask = np.uint64(0) - do
    kx = (ka ^ kb) & mask
    px = (pa ^ pb) & np.int64(mask)
    keys[a] = ka ^ kx
    keys[b] = kb ^ kx
    pays[a] = pa ^ px
    pays[b] = pb ^ px
    return do


@njit(cache=True, nogil=True)
def _stage_span(keys, pays, block, dist, i0, i1):
    # Comparators whose lower wire lies in [i0, i1), walked one half-block
    # run at a time so the direction is constant inside the inner loop.
    swaps = np.uint64(0)
    i = i0
    while i < i1:
        run_end = min(i1, (i // (2 * dist)) * 2 * dist + dist)
        ascending = np.uint64((i & block) == 0)
        for w in range(i, run_end):
            swaps += _compare_exchange(keys, pays, np.uint64(w),
                                       np.uint64(w + dist), ascending)
        i = run_end + dist
    return np.int64(swaps)


@njit(cache=True, nogil=True)
def bitonic_stage(keys, pays, block, dist, c0, c1):
    """Comparators ``c0 .. c1-1`` of the stage (block, dist); returns swaps.

    Comparator ``c`` joins ``i`` and ``i + dist`` where ``i`` is the c-th
    index whose ``dist`` bit is clear; it sorts ascending iff ``i & block``
    is zero.
    """
    if c0 >= c1:
        return 0
    i0 = (c0 // dist) * 2 * dist + (c0 % dist)
    last = c1 - 1
    i1 = (last // dist) * 2 * dist + (last % dist) + 1
    return _stage_span(keys, pays, block, dist, i0, i1)


@njit(cache=True, nogil=True)
def bitonic_network(keys, pays, counters):
    """Whole network on one thread; returns the number of stages run."""
    n = keys.shape[0]
    half = n // 2
    stages = 0
    block = 2
    while block <= n:
        dist = block // 2
        while dist >= 1:
            counters[1] += _stage_span(keys, pays, block, dist, 0, n)
            counters[0] += half
            stages += 1
            dist //= 2
        block *= 2
    return stages
