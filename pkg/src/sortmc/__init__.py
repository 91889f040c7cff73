"""Particle-sorting performance lab.

Sorting algorithms with cost counters, presortedness generators and metrics,
a benchmark harness, and a multi-group Monte Carlo eigenvalue mini-app with
pluggable inter-event particle sorting.
"""

from sortmc.sort_core import (
    KEY_RECORD,
    MAX_KEY,
    PAD_PAYLOAD,
    AlgorithmId,
    SortStats,
    bitonic_stage_schedule,
    make_records,
    pad_to_power_of_two,
    sort_adaptive,
    sort_bitonic,
    sort_parallel,
    sort_with,
)
from sortmc.presort import (
    GenSpec,
    PresortReport,
    gen_partially_sorted,
    gen_uniform_random,
    inversion_fraction,
)

__version__ = "0.1.0"

__all__ = [
    "KEY_RECORD",
    "MAX_KEY",
    "PAD_PAYLOAD",
    "AlgorithmId",
    "SortStats",
    "bitonic_stage_schedule",
    "make_records",
    "pad_to_power_of_two",
    "sort_adaptive",
    "sort_bitonic",
    "sort_parallel",
    "sort_with",
    "GenSpec",
    "PresortReport",
    "gen_partially_sorted",
    "gen_uniform_random",
    "inversion_fraction",
]
