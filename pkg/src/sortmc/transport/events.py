"""Event-based transport: one flight per particle per pass, in three stages.

Each stage is a numba kernel over a half-open range of bank slots, so a pass
can be split across threads. Every random number is addressed by
``(seed, cycle key, particle id, event counter)``, and every tally lands in a
row owned by the particle id. Results therefore do not depend on bank order
or on how the ranges were split.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from sortmc.rng import STREAM_FISSION, STREAM_TRANSPORT, uniform01
from sortmc.transport.geometry import Geometry
from sortmc.transport.materials import MaterialMG
from sortmc.transport.particles import ParticleBank

# Fates written by the stages.
ALIVE = 0
CAPTURED = 1
FISSIONED = 2
LEAKED = 3
LOST = 4

EVENT_COLLISION = 0
EVENT_OUTER = 1
EVENT_INNER = -1

_RADIAL_TOL = 1e-9
_SURFACE_TOL = 1e-6
MIN_CHUNK = 2048


def cycle_key(cycle: int, stream: int) -> int:
    return (int(cycle) << 8) | int(stream)


@dataclass
class XSArrays:
    """Material data flattened for the kernels, indexed by material then group."""

    total: np.ndarray            # (M, G)
    fission: np.ndarray          # (M, G)
    nu_fission: np.ndarray       # (M, G)
    nu: np.ndarray               # (M, G), zero where nothing fissions
    p_scatter: np.ndarray        # (M, G)
    p_fission: np.ndarray        # (M, G)
    scatter_cdf: np.ndarray      # (M, G, G)
    chi_cdf: np.ndarray          # (M, G)

    @classmethod
    def build(cls, materials: Sequence[MaterialMG]) -> "XSArrays":
        groups = {m.groups for m in materials}
        if len(groups) != 1:
            raise ValueError(f"materials disagree on group count: {sorted(groups)}")
        total = np.array([m.total for m in materials], dtype=np.float64)
        if np.any(total <= 0):
            raise ValueError("every material needs a positive total cross section")
        scatter = np.array([m.scatter for m in materials], dtype=np.float64)
        fission = np.array([m.fission for m in materials], dtype=np.float64)
        nu_fission = np.array([m.nu_fission for m in materials], dtype=np.float64)
        chi = np.array([m.chi for m in materials], dtype=np.float64)
        s_row = scatter.sum(axis=2)
        with np.errstate(invalid="ignore", divide="ignore"):
            nu = np.where(fission > 0, nu_fission / fission, 0.0)
            cdf = np.cumsum(scatter, axis=2) / s_row[:, :, None]
        cdf = np.where(s_row[:, :, None] > 0, cdf, 1.0)
        cdf[:, :, -1] = 1.0
        chi_cdf = np.cumsum(chi, axis=1)
        chi_cdf[:, -1] = 1.0
        return cls(total, fission, nu_fission, nu, s_row / total, fission / total,
                   np.ascontiguousarray(cdf), chi_cdf)


@njit(cache=True, nogil=True)
def _sample_cdf(cdf, xi):
    g = 0
    while g < cdf.shape[0] - 1 and xi >= cdf[g]:
        g += 1
    return g


@njit(cache=True, nogil=True)
def _isotropic(seed, key, pid, counter, out):
    mu = 2.0 * uniform01(seed, key, pid, counter) - 1.0
    phi = 2.0 * math.pi * uniform01(seed, key, pid, counter + np.uint64(1))
    s = math.sqrt(max(0.0, 1.0 - mu * mu))
    out[0] = s * math.cos(phi)
    out[1] = s * math.sin(phi)
    out[2] = mu
    norm = math.sqrt(out[0] * out[0] + out[1] * out[1] + out[2] * out[2])
    out[0] /= norm
    out[1] /= norm
    out[2] /= norm


@njit(cache=True, nogil=True)
def xs_lookup_stage(lo, hi, group, cell, cell_mat, total, sigt):
    for i in range(lo, hi):
        sigt[i] = total[cell_mat[cell[i]], group[i]]


@njit(cache=True, nogil=True)
def distance_stage(lo, hi, seed, key, ids, pos, dirs, group, cell, counter,
                   total, cell_mat, radii, sigt, use_sigt, dist, event):
    """Sample a flight length and compare it with the distance to the cell surfaces."""
    for i in range(lo, hi):
        c = cell[i]
        st = sigt[i] if use_sigt else total[cell_mat[c], group[i]]
        xi = uniform01(seed, key, ids[i], counter[i])
        counter[i] += np.uint64(1)
        d = -math.log(1.0 - xi) / st
        ev = EVENT_COLLISION
        if math.isfinite(radii[c]):
            px, py, pz = pos[i, 0], pos[i, 1], pos[i, 2]
            b = px * dirs[i, 0] + py * dirs[i, 1] + pz * dirs[i, 2]
            p2 = px * px + py * py + pz * pz
            # Outer surface of the cell: the particle is inside, so take the far root.
            r = radii[c]
            disc = b * b - min(0.0, p2 - r * r)
            d_out = -b + math.sqrt(disc)
            if d_out < d:
                d = max(d_out, 0.0)
                ev = EVENT_OUTER
            if c > 0 and b < 0.0:
                r = radii[c - 1]
                disc = b * b - (p2 - r * r)
                if disc > 0.0:
                    d_in = -b - math.sqrt(disc)
                    if d_in < d:
                        d = max(d_in, 0.0)
                        ev = EVENT_INNER
        dist[i] = d
        event[i] = ev


@njit(cache=True, nogil=True)
def advance_stage(lo, hi, ids, pos, dirs, group, weight, cell, alive, fate,
                  fission, cell_mat, radii, reflective, dist, event,
                  acc_flux, acc_power):
    """Move, score track length, then cross, reflect or leak at surfaces."""
    n_cells = radii.shape[0]
    for i in range(lo, hi):
        c = cell[i]
        g = group[i]
        d = dist[i]
        w = weight[i]
        pid = ids[i]
        acc_flux[pid, c, g] += w * d
        acc_power[pid, c] += w * d * fission[cell_mat[c], g]
        for k in range(3):
            pos[i, k] += d * dirs[i, k]
        ev = event[i]
        if ev == EVENT_COLLISION:
            if math.isfinite(radii[c]):
                r = math.sqrt(pos[i, 0] ** 2 + pos[i, 1] ** 2 + pos[i, 2] ** 2)
                r_in = radii[c - 1] if c > 0 else 0.0
                if r > radii[c] * (1.0 + _RADIAL_TOL) or r < r_in * (1.0 - _RADIAL_TOL):
                    alive[i] = False
                    fate[i] = LOST
            continue
        surface = radii[c] if ev == EVENT_OUTER else radii[c - 1]
        r = math.sqrt(pos[i, 0] ** 2 + pos[i, 1] ** 2 + pos[i, 2] ** 2)
        if abs(r - surface) > _SURFACE_TOL * surface:
            alive[i] = False
            fate[i] = LOST
            continue
        nx, ny, nz = pos[i, 0] / r, pos[i, 1] / r, pos[i, 2] / r
        pos[i, 0] = surface * nx
        pos[i, 1] = surface * ny
        pos[i, 2] = surface * nz
        if ev == EVENT_INNER:
            cell[i] = c - 1
        elif c < n_cells - 1:
            cell[i] = c + 1
        elif reflective:
            un = dirs[i, 0] * nx + dirs[i, 1] * ny + dirs[i, 2] * nz
            ux = dirs[i, 0] - 2.0 * un * nx
            uy = dirs[i, 1] - 2.0 * un * ny
            uz = dirs[i, 2] - 2.0 * un * nz
            norm = math.sqrt(ux * ux + uy * uy + uz * uz)
            dirs[i, 0] = ux / norm
            dirs[i, 1] = uy / norm
            dirs[i, 2] = uz / norm
        else:
            alive[i] = False
            fate[i] = LEAKED


@njit(cache=True, nogil=True)
def collide_stage(lo, hi, seed, key, ids, dirs, group, weight, cell, alive, fate,
                  counter, event, cell_mat, nu_fission, total, nu, p_scatter,
                  p_fission, scatter_cdf, k_prev, acc_k, n_sites):
    """Collision estimator, then analog scatter, fission or capture."""
    u = np.empty(3)
    for i in range(lo, hi):
        n_sites[i] = 0
        if not alive[i] or event[i] != EVENT_COLLISION:
            continue
        m = cell_mat[cell[i]]
        g = group[i]
        pid = ids[i]
        w = weight[i]
        acc_k[pid] += w * nu_fission[m, g] / total[m, g]
        xi = uniform01(seed, key, pid, counter[i])
        counter[i] += np.uint64(1)
        if xi < p_scatter[m, g]:
            group[i] = _sample_cdf(scatter_cdf[m, g], uniform01(seed, key, pid, counter[i]))
            counter[i] += np.uint64(1)
            _isotropic(seed, key, pid, counter[i], u)
            counter[i] += np.uint64(2)
            dirs[i, 0] = u[0]
            dirs[i, 1] = u[1]
            dirs[i, 2] = u[2]
        elif xi < p_scatter[m, g] + p_fission[m, g]:
            xi2 = uniform01(seed, key, pid, counter[i])
            counter[i] += np.uint64(1)
            n_sites[i] = int(math.floor(w * nu[m, g] / k_prev + xi2))
            alive[i] = False
            fate[i] = FISSIONED
        else:
            alive[i] = False
            fate[i] = CAPTURED


@njit(cache=True, nogil=True)
def fill_sites(seed, key, ids, pos, cell, cell_mat, chi_cdf, n_sites, offsets,
               site_parent, site_child, site_pos, site_group):
    for i in range(ids.shape[0]):
        base = offsets[i]
        m = cell_mat[cell[i]]
        for k in range(n_sites[i]):
            j = base + k
            site_parent[j] = ids[i]
            site_child[j] = k
            site_pos[j, 0] = pos[i, 0]
            site_pos[j, 1] = pos[i, 1]
            site_pos[j, 2] = pos[i, 2]
            site_group[j] = _sample_cdf(chi_cdf[m], uniform01(seed, key, ids[i], np.uint64(k)))


@dataclass
class FissionSites:
    parent: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    child: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    position: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    group: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    weight: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return self.parent.shape[0]

    @classmethod
    def concat(cls, parts: list["FissionSites"]) -> "FissionSites":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls()
        return cls(*(np.concatenate([getattr(p, f) for p in parts])
                     for f in ("parent", "child", "position", "group", "weight")))

    def canonical(self) -> "FissionSites":
        """Sites ordered by (parent id, child index), independent of bank order."""
        order = np.lexsort((self.child, self.parent))
        return FissionSites(self.parent[order], self.child[order], self.position[order],
                            self.group[order], self.weight[order])


@dataclass
class PassLedger:
    """Weight bookkeeping for one event pass."""

    before: float = 0.0
    surviving: float = 0.0
    captured: float = 0.0
    fissioned: float = 0.0
    leaked: float = 0.0
    lost: float = 0.0
    lost_count: int = 0

    @property
    def after(self) -> float:
        return self.surviving + self.captured + self.fissioned + self.leaked + self.lost

    def relative_error(self) -> float:
        return abs(self.after - self.before) / self.before if self.before else 0.0


@dataclass
class Tallies:
    """Per-particle-id accumulators for one cycle."""

    flux: np.ndarray   # (N, C, G) track length, cm
    power: np.ndarray  # (N, C) fission rate proxy
    k: np.ndarray      # (N,) collision estimator sum

    @classmethod
    def zeros(cls, n: int, cells: int, groups: int) -> "Tallies":
        return cls(np.zeros((n, cells, groups)), np.zeros((n, cells)), np.zeros(n))


class TransportContext:
    """Everything an event pass needs besides the bank itself."""

    def __init__(self, geom: Geometry, materials: Sequence[MaterialMG], seed: int,
                 workers: int = 1, split_xs_lookup: bool = False,
                 pool: ThreadPoolExecutor | None = None):
        if max(geom.cell_material) >= len(materials) or min(geom.cell_material) < 0:
            raise ValueError("geometry references a material that was not supplied")
        self.geom = geom
        self.materials = list(materials)
        self.xs = XSArrays.build(self.materials)
        self.groups = self.xs.total.shape[1]
        self.cell_mat = np.asarray(geom.cell_material, dtype=np.int64)
        self.radii = geom.radii_array()
        self.reflective = geom.boundary.value == "reflective"
        self.seed = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self.workers = int(workers)
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.split_xs_lookup = bool(split_xs_lookup)
        self.pool = pool
        self.cycle = 0
        self.k_prev = 1.0

    def _run(self, kernel, n: int, *args) -> None:
        if self.workers == 1 or self.pool is None or n < 2 * MIN_CHUNK:
            kernel(0, n, *args)
            return
        chunks = min(self.workers, n // MIN_CHUNK)
        edges = np.linspace(0, n, chunks + 1).astype(np.int64)
        futures = [self.pool.submit(kernel, int(a), int(b), *args)
                   for a, b in zip(edges[:-1], edges[1:])]
        for f in futures:
            f.result()


def transport_event_iteration(bank: ParticleBank, ctx: TransportContext, tallies: Tallies
                              ) -> tuple[ParticleBank, FissionSites, PassLedger]:
    """One event for every live particle; returns the compacted bank and new sites."""
    n = len(bank)
    if n == 0:
        return bank, FissionSites(), PassLedger()
    if not bank.alive.all():
        raise ValueError("transport_event_iteration expects a bank of live particles")
    xs = ctx.xs
    key = cycle_key(ctx.cycle, STREAM_TRANSPORT)
    sigt = np.empty(n)
    dist = np.empty(n)
    event = np.empty(n, np.int64)
    fate = np.zeros(n, np.int8)
    n_sites = np.zeros(n, np.int64)
    ledger = PassLedger(before=float(bank.weight.sum()))

    if ctx.split_xs_lookup:
        ctx._run(xs_lookup_stage, n, bank.group, bank.cell, ctx.cell_mat, xs.total, sigt)
    ctx._run(distance_stage, n, ctx.seed, key, bank.id, bank.position, bank.direction,
             bank.group, bank.cell, bank.event_counter, xs.total, ctx.cell_mat, ctx.radii,
             sigt, ctx.split_xs_lookup, dist, event)
    ctx._run(advance_stage, n, bank.id, bank.position, bank.direction, bank.group,
             bank.weight, bank.cell, bank.alive, fate, xs.fission, ctx.cell_mat, ctx.radii,
             ctx.reflective, dist, event, tallies.flux, tallies.power)
    ctx._run(collide_stage, n, ctx.seed, key, bank.id, bank.direction, bank.group,
             bank.weight, bank.cell, bank.alive, fate, bank.event_counter, event,
             ctx.cell_mat, xs.nu_fission, xs.total, xs.nu, xs.p_scatter, xs.p_fission,
             xs.scatter_cdf, float(ctx.k_prev), tallies.k, n_sites)

    w = bank.weight
    ledger.surviving = float(w[fate == ALIVE].sum())
    ledger.captured = float(w[fate == CAPTURED].sum())
    ledger.fissioned = float(w[fate == FISSIONED].sum())
    ledger.leaked = float(w[fate == LEAKED].sum())
    ledger.lost = float(w[fate == LOST].sum())
    ledger.lost_count = int(np.count_nonzero(fate == LOST))

    sites = FissionSites()
    total_sites = int(n_sites.sum())
    if total_sites:
        offsets = np.zeros(n, np.int64)
        np.cumsum(n_sites[:-1], out=offsets[1:])
        sites = FissionSites(np.empty(total_sites, np.int64), np.empty(total_sites, np.int64),
                             np.empty((total_sites, 3)), np.empty(total_sites, np.int64),
                             np.ones(total_sites))
        fill_sites(ctx.seed, cycle_key(ctx.cycle, STREAM_FISSION), bank.id, bank.position,
                   bank.cell, ctx.cell_mat, xs.chi_cdf, n_sites, offsets,
                   sites.parent, sites.child, sites.position, sites.group)
    return bank.compact(), sites, ledger
