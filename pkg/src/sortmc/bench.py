"""Size and swap-ratio sweeps over the sorting algorithms.

Timing discipline: each timed call covers only the sort itself. Inputs are
generated before the clock starts and verified after it stops. Warmup calls
(which also absorb JIT compilation) are discarded. The headline statistic is
the median over repetitions.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from sortmc import rng as _rng
from sortmc.presort import GenSpec, gen_partially_sorted, gen_uniform_random
from sortmc._io import atomic_write_text, csv_text
from sortmc.sort_core import AlgorithmId, is_sorted, sort_with

log = logging.getLogger(__name__)

CSV_COLUMNS = ["algorithm", "n", "r", "median_nanos", "min_nanos",
               "comparisons", "stages", "repetitions"]
DEFAULT_SIZES = [2 ** k for k in range(9, 21)]
DEFAULT_RATIOS = [1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0]
# Input, two working copies and the output, 16 bytes per record each.
BYTES_PER_RECORD = 64


class SweepConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    algorithms: list[AlgorithmId] = Field(default_factory=lambda: list(AlgorithmId))
    sizes: list[int] = Field(default_factory=lambda: list(DEFAULT_SIZES))
    ratios: list[float] = Field(default_factory=lambda: list(DEFAULT_RATIOS))
    fixed_n: int = Field(2 ** 20, ge=0)
    repetitions: int = Field(9, ge=1)
    warmup: int = Field(1, ge=0)
    workers: int = Field(1, ge=1)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    memory_cap_bytes: int = Field(4 * 2 ** 30, ge=1)

    @field_validator("sizes")
    @classmethod
    def _sizes_increasing(cls, v):
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("sizes must be strictly increasing")
        if any(n < 0 for n in v):
            raise ValueError("sizes must be non-negative")
        return v

    @field_validator("ratios")
    @classmethod
    def _ratios_increasing(cls, v):
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("ratios must be strictly increasing")
        if any(not 0.0 <= r <= 1.0 for r in v):
            raise ValueError("ratios must lie in [0, 1]")
        return v

    @model_validator(mode="after")
    def _algorithms_nonempty(self):
        if not self.algorithms:
            raise ValueError("algorithms must not be empty")
        return self


@dataclass
class BenchRecord:
    algorithm: AlgorithmId
    n: int
    r: Optional[float]
    median_nanos: int
    min_nanos: int
    comparisons: int
    stages: int
    repetitions: int
    skipped: Optional[str] = None


def _rep_seed(seed: int, n: int, rep: int) -> int:
    return int(_rng.hash4(np.uint64(seed), _rng.STREAM_UNIFORM + 100, n, rep))


def _median_int(values: list[int]) -> int:
    # Lower median keeps the statistic an observed value.
    return sorted(values)[(len(values) - 1) // 2]


def _verify(original, result) -> None:
    if result.shape[0] != original.shape[0] or not is_sorted(result):
        raise RuntimeError("sort produced unsorted output")
    if not np.array_equal(np.sort(result["payload"]), np.sort(original["payload"])):
        raise RuntimeError("sort output is not a permutation of its input")


def _measure(cfg: SweepConfig, algorithm: AlgorithmId, n: int, r: Optional[float],
             make_input) -> BenchRecord:
    if n * BYTES_PER_RECORD > cfg.memory_cap_bytes:
        reason = f"n={n} needs ~{n * BYTES_PER_RECORD} bytes > cap {cfg.memory_cap_bytes}"
        log.warning("skipping %s: %s", algorithm.value, reason)
        return BenchRecord(algorithm, n, r, 0, 0, 0, 0, 0, skipped=reason)
    if cfg.warmup:
        warm = make_input(-1)
        for _ in range(cfg.warmup):
            sort_with(algorithm, warm, cfg.workers)
    times, comps, stages = [], [], []
    for rep in range(cfg.repetitions):
        arr = make_input(rep)
        t0 = time.perf_counter_ns()
        out, stats = sort_with(algorithm, arr, cfg.workers)
        times.append(time.perf_counter_ns() - t0)
        _verify(arr, out)
        comps.append(stats.comparisons)
        stages.append(stats.stages)
    return BenchRecord(algorithm, n, r, _median_int(times), min(times),
                       _median_int(comps), _median_int(stages), cfg.repetitions)


def run_size_sweep(cfg: SweepConfig) -> list[BenchRecord]:
    """Uniform random keys, one row per (algorithm, n)."""
    records = []
    for algorithm in cfg.algorithms:
        for n in cfg.sizes:
            def make(rep, n=n):
                return gen_uniform_random(n, _rep_seed(cfg.seed, n, rep + 1))
            rec = _measure(cfg, algorithm, n, None, make)
            log.info("size sweep %s n=%d median=%dns", algorithm.value, n, rec.median_nanos)
            records.append(rec)
    return records


def run_ratio_sweep(cfg: SweepConfig) -> list[BenchRecord]:
    """Partially sorted keys at ``cfg.fixed_n``, one row per (algorithm, r)."""
    records = []
    n = cfg.fixed_n
    for algorithm in cfg.algorithms:
        for r in cfg.ratios:
            def make(rep, r=r):
                return gen_partially_sorted(GenSpec(n, r, _rep_seed(cfg.seed, n, rep + 1)))
            rec = _measure(cfg, algorithm, n, r, make)
            log.info("ratio sweep %s r=%g median=%dns", algorithm.value, r, rec.median_nanos)
            records.append(rec)
    return records


def format_ratio(r: Optional[float]) -> str:
    if r is None:
        return ""
    return np.format_float_positional(r, trim="-")


def write_csv(records: list[BenchRecord], path) -> Path:
    """Write measured rows atomically; skipped rows are left out."""
    rows = [
        [AlgorithmId(rec.algorithm).value, rec.n, format_ratio(rec.r), rec.median_nanos,
         rec.min_nanos, rec.comparisons, rec.stages, rec.repetitions]
        for rec in records if not rec.skipped
    ]
    return atomic_write_text(path, csv_text(CSV_COLUMNS, rows))


def read_csv(path) -> list[BenchRecord]:
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != CSV_COLUMNS:
                raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
            return [
                BenchRecord(
                    algorithm=AlgorithmId(row["algorithm"]),
                    n=int(row["n"]),
                    r=float(row["r"]) if row["r"] else None,
                    median_nanos=int(row["median_nanos"]),
                    min_nanos=int(row["min_nanos"]),
                    comparisons=int(row["comparisons"]),
                    stages=int(row["stages"]),
                    repetitions=int(row["repetitions"]),
                )
                for row in reader
            ]
    except OSError as exc:
        raise OSError(f"cannot read CSV {path}: {exc}") from exc


def loglog_fit(records: list[BenchRecord], algorithm, min_n: int = 0,
               max_n: int | None = None) -> tuple[float, float]:
    """Least-squares line of log(median time) on log(n); returns (slope, R^2)."""
    algorithm = AlgorithmId(algorithm)
    pts = [(rec.n, rec.median_nanos) for rec in records
           if rec.algorithm == algorithm and not rec.skipped and rec.n >= min_n
           and (max_n is None or rec.n <= max_n)]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points for {algorithm.value}, got {len(pts)}")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def spread(values) -> float:
    values = list(values)
    return max(values) / min(values) if values and min(values) > 0 else math.inf
