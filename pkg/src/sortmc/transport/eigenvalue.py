"""Power iteration over cycles of event-based transport."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit
from pydantic import BaseModel, ConfigDict, Field, model_validator

from sortmc._io import atomic_write_text, csv_text
from sortmc.sort_core import bitonic_comparator_count
from sortmc.rng import STREAM_COMB, STREAM_SOURCE, CounterRNG, uniform01
from sortmc.transport.events import (FissionSites, Tallies, TransportContext,
                                     cycle_key, transport_event_iteration)
from sortmc.transport.geometry import Geometry
from sortmc.transport.materials import MaterialMG
from sortmc.transport.particles import ParticleBank, SortStrategy, sort_bank

log = logging.getLogger(__name__)

LOST_FRACTION_LIMIT = 1e-6
WEIGHT_TOLERANCE = 1e-9


class ExtinctionError(RuntimeError):
    pass


class LostParticleError(RuntimeError):
    pass


class CycleConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    particles_per_cycle: int = Field(10_000, ge=1)
    inactive_cycles: int = Field(20, ge=0)
    total_cycles: int = Field(100, ge=1)
    seed: int = Field(1, ge=0, lt=2 ** 64)
    split_xs_lookup: bool = False

    @model_validator(mode="after")
    def _cycles(self):
        if self.total_cycles <= self.inactive_cycles:
            raise ValueError(
                f"total_cycles ({self.total_cycles}) must exceed "
                f"inactive_cycles ({self.inactive_cycles})")
        return self

    @property
    def active_cycles(self) -> int:
        return self.total_cycles - self.inactive_cycles


@dataclass
class TallySet:
    flux: np.ndarray           # (cells, groups) mean track length per source particle, cm
    flux_rel_err: np.ndarray   # (cells, groups)
    fission_power: np.ndarray  # (cells,) sums to 1 when anything fissions
    keff_cycle: list[float]
    keff_mean: float
    keff_std: float
    inactive_cycles: int

    def keff_text(self) -> str:
        """Mean with the standard deviation in units of the last printed digits."""
        if self.keff_std <= 0 or not math.isfinite(self.keff_std):
            return f"{self.keff_mean:.5f}"
        digits = max(0, -int(math.floor(math.log10(self.keff_std))))
        unc = round(self.keff_std * 10 ** digits)
        return f"{self.keff_mean:.{digits}f} ({unc})"


@dataclass
class TraceRow:
    cycle: int
    event_pass: int
    inversion_fraction: float
    sorted_runs: int
    n: int
    comparisons: int
    bitonic_comparisons: int


TRACE_COLUMNS = ["cycle", "event_pass", "inversion_fraction", "sorted_runs", "n",
                 "comparisons", "bitonic_comparisons"]


@dataclass
class RunResult:
    tallies: TallySet
    trace: list[TraceRow] = field(default_factory=list)
    lost_particles: int = 0
    histories: int = 0
    event_passes: int = 0
    max_weight_error: float = 0.0


def comb_select(weights: np.ndarray, target: int, offset: float) -> np.ndarray:
    """Indices picked by ``target`` evenly spaced teeth starting at ``offset`` in [0, 1)."""
    weights = np.asarray(weights, dtype=np.float64)
    total = weights.sum()
    teeth = (offset + np.arange(target)) * (total / target)
    idx = np.searchsorted(np.cumsum(weights), teeth, side="right")
    return np.minimum(idx, weights.shape[0] - 1)


def sample_fission_bank(sites: FissionSites, target: int, rng: CounterRNG) -> ParticleBank:
    """Systematic resampling of exactly ``target`` sites, weights reset to 1.

    Sites are taken in canonical (parent, child) order so that the result
    does not depend on the order in which they were banked.
    """
    if target < 1:
        raise ValueError(f"target must be >= 1, got {target}")
    if len(sites) == 0:
        raise ExtinctionError(
            "the fission bank is empty; the population died out. "
            "Increase particles_per_cycle or check that the system can multiply")
    sites = sites.canonical()
    pick = comb_select(sites.weight, target, rng.random(0))
    bank = ParticleBank.empty(target)
    bank.id[:] = np.arange(target)
    bank.position[:] = sites.position[pick]
    bank.group[:] = sites.group[pick]
    return bank


@njit(cache=True, nogil=True)
def _isotropic_directions(seed, key, ids, out):
    for i in range(ids.shape[0]):
        mu = 2.0 * uniform01(seed, key, ids[i], 0) - 1.0
        phi = 2.0 * math.pi * uniform01(seed, key, ids[i], 1)
        s = math.sqrt(max(0.0, 1.0 - mu * mu))
        out[i, 0] = s * math.cos(phi)
        out[i, 1] = s * math.sin(phi)
        out[i, 2] = mu
        norm = math.sqrt(out[i, 0] ** 2 + out[i, 1] ** 2 + out[i, 2] ** 2)
        out[i, 0] /= norm
        out[i, 1] /= norm
        out[i, 2] /= norm


def initial_source(geom: Geometry, materials: Sequence[MaterialMG], n: int,
                   seed: int) -> ParticleBank:
    """Uniform positions in the fissile cells, groups drawn from each cell's spectrum."""
    fissile = [c for c, m in enumerate(geom.cell_material)
               if np.any(materials[m].nu_fission > 0)]
    if not fissile:
        raise ExtinctionError("no cell contains fissile material")
    bank = ParticleBank.empty(n)
    bank.id[:] = np.arange(n)
    rng = CounterRNG(seed, cycle_key(0, STREAM_SOURCE), 1)
    if geom.is_infinite:
        cells = np.zeros(n, np.int64)
    else:
        r_max = geom.radii[max(fissile)]
        pos = np.empty((0, 3))
        counter = 0
        while pos.shape[0] < n:
            batch = 2 * (n - pos.shape[0]) + 64
            trial = rng.random_array(np.arange(counter, counter + 3 * batch)).reshape(batch, 3)
            counter += 3 * batch
            trial = (2.0 * trial - 1.0) * r_max
            ok = np.isin(geom.locate(trial), fissile)
            pos = np.concatenate([pos, trial[ok]])
        bank.position[:] = pos[:n]
        cells = geom.locate(bank.position)
    bank.cell[:] = cells
    chi_rng = CounterRNG(seed, cycle_key(0, STREAM_SOURCE), 2)
    xi = chi_rng.random_array(np.arange(n))
    for c in np.unique(cells):
        sel = cells == c
        cdf = np.cumsum(materials[geom.cell_material[c]].chi)
        bank.group[sel] = np.minimum(np.searchsorted(cdf, xi[sel], side="right"),
                                     cdf.shape[0] - 1)
    return bank


def start_cycle(bank: ParticleBank, geom: Geometry, seed: int, cycle: int) -> ParticleBank:
    """Reset a source bank for transport: unit weights, fresh counters, isotropic directions."""
    bank.cell[:] = geom.locate(bank.position)
    bank.alive[:] = True
    bank.weight[:] = 1.0
    bank.event_counter[:] = 0
    _isotropic_directions(np.uint64(seed), cycle_key(cycle, STREAM_SOURCE), bank.id,
                          bank.direction)
    return bank


def run_eigenvalue(geom: Geometry, materials: Sequence[MaterialMG], cfg: CycleConfig,
                   strategy: SortStrategy | None = None, workers: int = 1,
                   trace: bool = True) -> RunResult:
    """k-eigenvalue power iteration.

    Every sort strategy and worker count gives bitwise identical k and
    tallies for a fixed seed; only the trace and the timings differ.
    """
    strategy = strategy or SortStrategy()
    n = cfg.particles_per_cycle
    cells = geom.n_cells
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        ctx = TransportContext(geom, materials, cfg.seed, workers, cfg.split_xs_lookup, pool)
        groups = ctx.groups
        result = RunResult(tallies=None)  # type: ignore[arg-type]
        bank = initial_source(geom, materials, n, cfg.seed)
        keff: list[float] = []
        flux_sum = np.zeros((cells, groups))
        flux_sq = np.zeros((cells, groups))
        power_sum = np.zeros(cells)
        for cycle in range(cfg.total_cycles):
            ctx.cycle = cycle
            bank = start_cycle(bank, geom, cfg.seed, cycle)
            tallies = Tallies.zeros(n, cells, groups)
            site_parts: list[FissionSites] = []
            event_pass = 0
            while len(bank):
                if strategy.sorts_before_pass(event_pass):
                    bank, stats, report = sort_bank(bank, strategy, groups, workers)
                    if trace:
                        result.trace.append(TraceRow(
                            cycle, event_pass, report.inversion_fraction,
                            report.sorted_runs, report.n, stats.comparisons,
                            bitonic_comparator_count(report.n)))
                bank, sites, ledger = transport_event_iteration(bank, ctx, tallies)
                site_parts.append(sites)
                result.lost_particles += ledger.lost_count
                err = ledger.relative_error()
                if err > WEIGHT_TOLERANCE:
                    raise RuntimeError(
                        f"weight not conserved in cycle {cycle} pass {event_pass}: "
                        f"relative error {err:.3g}")
                result.max_weight_error = max(result.max_weight_error, err)
                event_pass += 1
            result.event_passes += event_pass
            result.histories += n
            if result.lost_particles > LOST_FRACTION_LIMIT * result.histories:
                raise LostParticleError(
                    f"{result.lost_particles} lost particles in {result.histories} "
                    f"histories exceeds the limit of {LOST_FRACTION_LIMIT:g}")
            # Reduction in ascending particle id.
            k_cycle = float(tallies.k.sum()) / n
            keff.append(k_cycle)
            if cycle >= cfg.inactive_cycles:
                f = tallies.flux.sum(axis=0) / n
                flux_sum += f
                flux_sq += f * f
                power_sum += tallies.power.sum(axis=0) / n
            log.debug("cycle %d k=%.6f passes=%d", cycle, k_cycle, event_pass)
            ctx.k_prev = k_cycle if k_cycle > 0 else ctx.k_prev
            bank = sample_fission_bank(FissionSites.concat(site_parts), n,
                                       CounterRNG(cfg.seed, cycle_key(cycle, STREAM_COMB)))
    finally:
        if pool is not None:
            pool.shutdown()
    result.tallies = _finish(keff, flux_sum, flux_sq, power_sum, cfg)
    return result


def _finish(keff, flux_sum, flux_sq, power_sum, cfg: CycleConfig) -> TallySet:
    m = cfg.active_cycles
    active = np.asarray(keff[cfg.inactive_cycles:])
    mean = float(active.mean())
    std = float(active.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    flux = flux_sum / m
    if m > 1:
        var = np.maximum(flux_sq / m - flux * flux, 0.0) * m / (m - 1)
        sd_mean = np.sqrt(var / m)
    else:
        sd_mean = np.zeros_like(flux)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(flux > 0, sd_mean / flux, 0.0)
    total_power = power_sum.sum()
    power = power_sum / total_power if total_power > 0 else power_sum
    return TallySet(flux, rel, power, list(keff), mean, std, cfg.inactive_cycles)


def keff_rows(t: TallySet) -> list[list[str]]:
    rows = []
    for i, k in enumerate(t.keff_cycle):
        active = t.keff_cycle[t.inactive_cycles:i + 1]
        mean = repr(float(np.mean(active))) if active else ""
        std = (repr(float(np.std(active, ddof=1) / math.sqrt(len(active))))
               if len(active) > 1 else "")
        rows.append([str(i), repr(float(k)), mean, std])
    return rows


def write_keff_csv(t: TallySet, path) -> Path:
    return atomic_write_text(path, csv_text(["cycle", "k_cycle", "running_mean",
                                              "running_std"], keff_rows(t)))


def write_flux_csv(t: TallySet, path) -> Path:
    rows = [[c, g, repr(float(t.flux[c, g])), repr(float(t.flux_rel_err[c, g]))]
            for c in range(t.flux.shape[0]) for g in range(t.flux.shape[1])]
    return atomic_write_text(path, csv_text(["cell", "group", "value", "rel_err"], rows))


def write_trace_csv(trace: list[TraceRow], path) -> Path:
    rows = [[getattr(r, c) for c in TRACE_COLUMNS] for r in trace]
    return atomic_write_text(path, csv_text(TRACE_COLUMNS, rows))


def presortedness_trace(result: RunResult) -> list[dict]:
    """One row per sort_bank call."""
    return [{c: getattr(r, c) for c in TRACE_COLUMNS} for r in result.trace]
