import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sortmc.presort import (GenSpec, count_inversions, gen_partially_sorted,
                            gen_uniform_random, inversion_fraction)
from sortmc.rng import STREAM_SWAPS, hash4
from sortmc.sort_core import make_records


def brute_inversions(keys):
    keys = list(keys)
    return sum(1 for i in range(len(keys)) for j in range(i + 1, len(keys))
               if keys[i] > keys[j])


def test_uniform_random_deterministic_and_in_range():
    a = gen_uniform_random(1000, 5)
    assert np.array_equal(a, gen_uniform_random(1000, 5))
    assert not np.array_equal(a["key"], gen_uniform_random(1000, 6)["key"])
    assert a["key"].max() < 1000
    assert np.array_equal(a["payload"], np.arange(1000))
    assert gen_uniform_random(0, 1).shape == (0,)
    with pytest.raises(ValueError):
        gen_uniform_random(-1, 0)


def test_partially_sorted_replays_swaps():
    # Independent replay of the documented swap sequence.
    spec = GenSpec(257, 0.1, 11)
    keys = list(range(spec.n))
    for s in range(spec.swap_count):
        i = int(hash4(np.uint64(11), STREAM_SWAPS, spec.n, 2 * s)) % spec.n
        j = int(hash4(np.uint64(11), STREAM_SWAPS, spec.n, 2 * s + 1)) % spec.n
        keys[i], keys[j] = keys[j], keys[i]
    assert gen_partially_sorted(spec)["key"].tolist() == keys


def test_partially_sorted_extremes():
    ident = gen_partially_sorted(GenSpec(1000, 0.0, 1))
    assert np.array_equal(ident["key"], np.arange(1000))
    full = gen_partially_sorted(GenSpec(1000, 1.0, 1))
    assert sorted(full["key"].tolist()) == list(range(1000))
    assert inversion_fraction(full).inversion_fraction > 0.2
    assert GenSpec(1000, 1e-7).swap_count == 0
    assert GenSpec(10, 0.35).swap_count == 3


@pytest.mark.parametrize("n,r", [(-1, 0.1), (10, -0.1), (10, 1.5)])
def test_genspec_validation(n, r):
    with pytest.raises(ValueError):
        GenSpec(n, r)


def test_inversions_against_brute_force():
    gen = np.random.default_rng(0)
    for trial in range(50):
        n = int(gen.integers(0, 300))
        keys = gen.integers(0, max(1, n // 4 + 1), n).astype(np.uint64)
        assert count_inversions(keys) == brute_inversions(keys)


def test_report_fields():
    arr = make_records(np.array([3, 1, 2, 2, 0], dtype=np.uint64))
    rep = inversion_fraction(arr)
    assert rep.inversions == brute_inversions([3, 1, 2, 2, 0]) == 7
    assert rep.inversion_fraction == pytest.approx(7 / 10)
    assert rep.sorted_runs == 3  # [3] [1 2 2] [0]
    # Sorted keys are 0 1 2 2 3; positions 0 and 4 differ.
    assert rep.displaced_fraction == pytest.approx(2 / 5)


def test_report_degenerate():
    empty = inversion_fraction(make_records(np.zeros(0, np.uint64)))
    assert (empty.inversion_fraction, empty.sorted_runs, empty.n) == (0.0, 0, 0)
    one = inversion_fraction(make_records(np.array([4], np.uint64)))
    assert (one.inversion_fraction, one.sorted_runs) == (0.0, 1)
    ties = inversion_fraction(make_records(np.full(50, 7, np.uint64)))
    assert ties.inversion_fraction == 0.0 and ties.sorted_runs == 1


def test_reversed_is_fully_inverted():
    rep = inversion_fraction(make_records(np.arange(100, dtype=np.uint64)[::-1].copy()))
    assert rep.inversion_fraction == 1.0
    assert rep.sorted_runs == 100


def test_more_swaps_more_disorder():
    fracs = [inversion_fraction(gen_partially_sorted(GenSpec(4096, r, 3))).inversion_fraction
             for r in (0.0, 1e-3, 1e-2, 1e-1)]
    assert fracs[0] == 0.0
    assert all(a < b for a, b in zip(fracs, fracs[1:]))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 20), max_size=120))
def test_property_inversions(keys):
    arr = np.array(keys, dtype=np.uint64)
    assert count_inversions(arr) == brute_inversions(keys)
    if len(keys) > 1:
        rep = inversion_fraction(make_records(arr))
        assert math.isclose(rep.inversion_fraction,
                            brute_inversions(keys) / (len(keys) * (len(keys) - 1) / 2))
