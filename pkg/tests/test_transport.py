import math

import numpy as np
import pytest
from pydantic import ValidationError

from sortmc.rng import CounterRNG
from sortmc.transport import eigenvalue as ev
from sortmc.transport.eigenvalue import (CycleConfig, ExtinctionError, LostParticleError,
                                         comb_select, initial_source, presortedness_trace,
                                         run_eigenvalue, sample_fission_bank, start_cycle,
                                         write_flux_csv, write_keff_csv, write_trace_csv)
from sortmc.transport.events import (FissionSites, Tallies, TransportContext,
                                     transport_event_iteration)
from sortmc.transport.geometry import Boundary, Geometry
from sortmc.transport.materials import MaterialMG, analytic_kinf_oracle, infinite_medium_flux
from sortmc.transport.particles import (KeyScheme, ParticleBank, SortMode, SortStrategy,
                                        sort_bank, sort_keys)

ALL_MODES = [SortStrategy(mode=m, k_events=3 if m.every_k else None) for m in SortMode]


def one_particle(pos, direction, group=0, cell=0):
    bank = ParticleBank.empty(1)
    bank.position[0] = pos
    bank.direction[0] = np.asarray(direction, float) / np.linalg.norm(direction)
    bank.group[0] = group
    bank.cell[0] = cell
    return bank


def source_bank(geom, mats, n, seed=1):
    return start_cycle(initial_source(geom, mats, n, seed), geom, seed, 0)


# geometry ------------------------------------------------------------------

def test_geometry_validation():
    with pytest.raises(ValueError):
        Geometry((3.0, 2.5), (0, 1))
    with pytest.raises(ValueError):
        Geometry((-1.0,), (0,))
    with pytest.raises(ValueError):
        Geometry((1.0, 2.0), (0,))
    g = Geometry.pebble(boundary="vacuum")
    assert g.boundary is Boundary.VACUUM and g.n_cells == 2 and g.outer_radius == 3.0
    assert Geometry.infinite().is_infinite and Geometry.infinite().outer_radius == math.inf


def test_locate():
    g = Geometry.pebble()
    pts = [[0, 0, 0], [2.4, 0, 0], [0, 2.6, 0], [0, 0, 2.99], [3.1, 0, 0], [2.5, 0, 0]]
    assert g.locate(pts).tolist() == [0, 0, 1, 1, -1, 0]
    assert Geometry.infinite().locate([[1e9, 0, 0]]).tolist() == [0]
    # On the 2.5 cm surface both neighbours are acceptable.
    assert g.consistent([[2.5, 0, 0], [2.5, 0, 0], [2.4, 0, 0]], [0, 1, 1]).tolist() == [
        True, True, False]


# single events -----------------------------------------------------------------

def capture_only(total):
    return MaterialMG.from_arrays(total, [[0.0]], 0.0)


def test_free_path_mean_matches_exponential():
    n = 100_000
    ctx = TransportContext(Geometry.infinite(), [capture_only(2.0)], seed=11)
    bank = ParticleBank.empty(n)
    bank.id[:] = np.arange(n)
    bank.direction[:, 2] = 1.0
    tallies = Tallies.zeros(n, 1, 1)
    out, sites, ledger = transport_event_iteration(bank, ctx, tallies)
    paths = tallies.flux[:, 0, 0]
    mean, sigma = paths.mean(), 0.5 / math.sqrt(n)
    assert abs(mean - 0.5) < 3 * sigma
    # Pure capture: one collision pass empties the bank.
    assert len(out) == 0 and len(sites) == 0
    assert ledger.captured == pytest.approx(n)


def test_reflection_contract():
    geom = Geometry((3.0,), (0,), Boundary.REFLECTIVE)
    ctx = TransportContext(geom, [capture_only(1e-9)], seed=3)
    bank = one_particle([2.9, 0.0, 0.0], [1.0, 0.3, -0.2])
    out, _, _ = transport_event_iteration(bank, ctx, Tallies.zeros(1, 1, 1))
    p, u = out.position[0], out.direction[0]
    assert np.linalg.norm(p) <= 3.0 * (1 + 1e-12)
    assert abs(np.linalg.norm(u) - 1.0) < 1e-9
    assert np.dot(u, p / np.linalg.norm(p)) <= 0.0
    # The tangential part is kept, the normal part flips.
    n = p / np.linalg.norm(p)
    u0 = np.array([1.0, 0.3, -0.2]) / np.linalg.norm([1.0, 0.3, -0.2])
    np.testing.assert_allclose(u, u0 - 2 * np.dot(u0, n) * n, atol=1e-12)


def test_vacuum_leaks():
    geom = Geometry((3.0,), (0,), Boundary.VACUUM)
    ctx = TransportContext(geom, [capture_only(1e-9)], seed=3)
    out, _, ledger = transport_event_iteration(one_particle([2.9, 0, 0], [1, 0, 0]), ctx,
                                               Tallies.zeros(1, 1, 1))
    assert len(out) == 0 and ledger.leaked == 1.0


def test_crossing_moves_between_cells():
    geom = Geometry.pebble()
    ctx = TransportContext(geom, [capture_only(1e-9), capture_only(1e-9)], seed=3)
    bank = one_particle([2.0, 0, 0], [1, 0, 0], cell=0)
    tallies = Tallies.zeros(1, 2, 1)
    bank, _, _ = transport_event_iteration(bank, ctx, tallies)
    assert bank.cell[0] == 1 and bank.position[0, 0] == pytest.approx(2.5)
    bank, _, _ = transport_event_iteration(bank, ctx, tallies)
    assert bank.cell[0] == 1 and bank.position[0, 0] == pytest.approx(3.0)
    assert bank.direction[0, 0] == pytest.approx(-1.0)
    bank, _, _ = transport_event_iteration(bank, ctx, tallies)
    assert bank.cell[0] == 0 and bank.position[0, 0] == pytest.approx(2.5)
    np.testing.assert_allclose(tallies.flux[0, :, 0], [0.5, 1.0])


def test_inconsistent_particle_is_lost():
    geom = Geometry.pebble()
    ctx = TransportContext(geom, [capture_only(1e-9), capture_only(1e-9)], seed=3)
    bank = one_particle([2.8, 0, 0], [1, 0, 0], cell=0)
    out, _, ledger = transport_event_iteration(bank, ctx, Tallies.zeros(1, 2, 1))
    assert len(out) == 0 and ledger.lost_count == 1 and ledger.lost == 1.0


def test_event_iteration_needs_live_bank():
    ctx = TransportContext(Geometry.infinite(), [capture_only(1.0)], seed=1)
    bank = one_particle([0, 0, 0], [0, 0, 1])
    bank.alive[0] = False
    with pytest.raises(ValueError):
        transport_event_iteration(bank, ctx, Tallies.zeros(1, 1, 1))


def test_pass_invariants_on_pebble(pebble_2g):
    geom, mats = pebble_2g
    ctx = TransportContext(geom, mats, seed=5)
    bank = source_bank(geom, mats, 5000)
    tallies = Tallies.zeros(5000, 2, 2)
    for _ in range(40):
        before = len(bank)
        bank, sites, ledger = transport_event_iteration(bank, ctx, tallies)
        assert ledger.relative_error() < 1e-9
        assert ledger.lost_count == 0
        assert len(bank) <= before
        if len(bank) == 0:
            break
        assert np.all(np.abs(np.linalg.norm(bank.direction, axis=1) - 1.0) < 1e-9)
        assert np.all(bank.weight > 0)
        assert np.all(geom.consistent(bank.position, bank.cell))
        if len(sites):
            assert np.all(sites.weight == 1.0)
            assert np.array_equal(geom.locate(sites.position), np.zeros(len(sites)))
    assert np.all(tallies.flux >= 0)


def test_context_validation():
    with pytest.raises(ValueError):
        TransportContext(Geometry.pebble(), [capture_only(1.0)], seed=1)
    with pytest.raises(ValueError):
        TransportContext(Geometry.infinite(), [capture_only(1.0)], seed=1, workers=0)
    two_group = MaterialMG.from_arrays([1.0, 1.0], np.zeros((2, 2)), [0.0, 0.0])
    with pytest.raises(ValueError):
        TransportContext(Geometry.pebble(), [capture_only(1.0), two_group], seed=1)


# population control ---------------------------------------------------------

def sites_with(weights):
    n = len(weights)
    return FissionSites(np.arange(n), np.zeros(n, np.int64), np.zeros((n, 3)),
                        np.zeros(n, np.int64), np.asarray(weights, float))


@pytest.mark.parametrize("offset", [0.0, 0.3, 0.999999])
def test_comb_equal_weights_picks_each_once(offset):
    assert np.array_equal(comb_select(np.ones(100), 100, offset), np.arange(100))


@pytest.mark.parametrize("offset", [0.0, 0.5, 0.999999])
def test_comb_weighted_counts(offset):
    idx = comb_select(np.array([2.0, 1.0, 1.0]), 4, offset)
    assert np.bincount(idx, minlength=3).tolist() == [2, 1, 1]


def test_sample_fission_bank():
    rng = CounterRNG(1, 5)
    sites = sites_with(np.ones(7))
    sites.position[:, 0] = np.arange(7)
    bank = sample_fission_bank(sites, 14, rng)
    assert len(bank) == 14 and np.all(bank.weight == 1.0)
    assert np.array_equal(bank.id, np.arange(14))
    assert np.bincount(bank.position[:, 0].astype(int)).tolist() == [2] * 7
    again = sample_fission_bank(sites, 14, rng)
    assert np.array_equal(again.position, bank.position)
    with pytest.raises(ValueError):
        sample_fission_bank(sites, 0, rng)
    with pytest.raises(ExtinctionError, match="particles_per_cycle"):
        sample_fission_bank(FissionSites(), 10, rng)


def test_sample_fission_bank_ignores_site_order():
    sites = sites_with(np.ones(50))
    sites.position[:, 1] = np.arange(50)
    perm = np.random.default_rng(0).permutation(50)
    shuffled = FissionSites(sites.parent[perm], sites.child[perm], sites.position[perm],
                            sites.group[perm], sites.weight[perm])
    rng = CounterRNG(9, 5)
    assert np.array_equal(sample_fission_bank(sites, 31, rng).position,
                          sample_fission_bank(shuffled, 31, rng).position)


# sorting the bank -------------------------------------------------------------

def test_strategy_validation():
    with pytest.raises(ValidationError, match="k_events"):
        SortStrategy(mode="AdaptiveEveryKEvents")
    with pytest.raises(ValidationError):
        SortStrategy(mode="BitonicEveryKEvents", k_events=0)
    with pytest.raises(ValidationError):
        SortStrategy(mode="Sometimes")
    s = SortStrategy(mode="AdaptiveEveryKEvents", k_events=4)
    assert [s.sorts_before_pass(p) for p in range(9)] == [1, 0, 0, 0, 1, 0, 0, 0, 1]
    g = SortStrategy(mode="BitonicEachGeneration")
    assert [g.sorts_before_pass(p) for p in range(3)] == [True, False, False]


def test_sort_keys():
    bank = ParticleBank.empty(3)
    bank.cell[:] = [1, 0, 1]
    bank.group[:] = [0, 22, 5]
    assert sort_keys(bank, KeyScheme.GROUP, 23).tolist() == [0, 22, 5]
    assert sort_keys(bank, KeyScheme.CELL, 23).tolist() == [1, 0, 1]
    assert sort_keys(bank, KeyScheme.CELL_THEN_GROUP, 23).tolist() == [23, 22, 28]


@pytest.mark.parametrize("strategy", ALL_MODES, ids=lambda s: s.mode.value)
def test_sort_bank_preserves_ids(pebble_2g, strategy):
    geom, mats = pebble_2g
    bank = source_bank(geom, mats, 3000)
    bank.group[:] = np.random.default_rng(1).integers(0, 2, 3000)
    out, stats, report = sort_bank(bank, strategy, groups=2)
    assert sorted(out.id.tolist()) == list(range(3000))
    keys = sort_keys(out, strategy.key_scheme, 2)
    if strategy.mode is SortMode.NONE:
        assert np.array_equal(out.id, bank.id) and stats.comparisons == 0
    else:
        assert np.all(np.diff(keys.astype(np.int64)) >= 0)
        # Particles keep all their fields when permuted.
        pos = {int(i): tuple(p) for i, p in zip(bank.id, bank.position)}
        assert all(pos[int(i)] == tuple(p) for i, p in zip(out.id, out.position))
    assert report.n == 3000 and report.inversion_fraction > 0


def test_sorted_bank_is_cheap_for_adaptive(pebble_2g):
    geom, mats = pebble_2g
    bank = source_bank(geom, mats, 4000)
    adaptive = SortStrategy(mode="AdaptiveEachGeneration")
    bank, _, _ = sort_bank(bank, adaptive, 2)
    again, stats, report = sort_bank(bank, adaptive, 2)
    assert report.inversion_fraction == 0.0
    assert stats.comparisons < 2 * len(bank)


def test_one_scatter_pass_leaves_bank_partly_sorted(pebble_2g):
    geom, mats = pebble_2g
    ctx = TransportContext(geom, mats, seed=8)
    bank = source_bank(geom, mats, 8000)
    strategy = SortStrategy(mode="AdaptiveEachGeneration")
    bank, _, _ = sort_bank(bank, strategy, 2)
    bank, _, _ = transport_event_iteration(bank, ctx, Tallies.zeros(8000, 2, 2))
    _, _, report = sort_bank(bank, SortStrategy(), 2)
    assert 0.0 < report.inversion_fraction < 0.5


# power iteration ----------------------------------------------------------------

def test_cycle_config_validation():
    with pytest.raises(ValidationError, match="total_cycles"):
        CycleConfig(inactive_cycles=10, total_cycles=10)
    with pytest.raises(ValidationError):
        CycleConfig(particles_per_cycle=0)
    with pytest.raises(ValidationError):
        CycleConfig(seed=-1)
    with pytest.raises(ValidationError):
        CycleConfig(cycles=3)
    assert CycleConfig(inactive_cycles=0, total_cycles=1).active_cycles == 1


def test_initial_source_in_fissile_cells(pebble_2g):
    geom, mats = pebble_2g
    bank = initial_source(geom, mats, 2000, 4)
    assert np.all(geom.locate(bank.position) == 0)
    r = np.linalg.norm(bank.position, axis=1)
    # Uniform in a ball: P(r < R/2) = 1/8.
    assert abs(np.mean(r < 1.25) - 0.125) < 4 * math.sqrt(0.125 * 0.875 / 2000)
    with pytest.raises(ExtinctionError):
        initial_source(geom, [mats[1], mats[1]], 10, 1)


def test_one_group_statistically_consistent_over_seeds():
    mat = MaterialMG.from_arrays(1.0, [[0.6]], 0.5)
    k_ref = analytic_kinf_oracle(mat)
    zs = []
    for seed in range(20):
        cfg = CycleConfig(particles_per_cycle=1000, inactive_cycles=3, total_cycles=23, seed=seed)
        t = run_eigenvalue(Geometry.infinite(), [mat], cfg).tallies
        zs.append((t.keff_mean - k_ref) / t.keff_std)
    assert max(abs(z) for z in zs) < 4
    assert abs(sum(zs) / math.sqrt(len(zs))) < 4


def test_infinite_medium_flux_spectrum(htr10_2g):
    mat = htr10_2g["Fuel kernel"]
    cfg = CycleConfig(particles_per_cycle=4000, inactive_cycles=5, total_cycles=45, seed=2)
    t = run_eigenvalue(Geometry.infinite(), [mat], cfg).tallies
    expect = infinite_medium_flux(mat)
    sigma = t.flux_rel_err[0] * t.flux[0]
    assert np.all(np.abs(t.flux[0] - expect) < 3 * sigma)
    assert abs(t.keff_mean - analytic_kinf_oracle(mat)) < 3 * t.keff_std
    assert t.fission_power.tolist() == [1.0]


def test_order_invariance_small(pebble_2g):
    geom, mats = pebble_2g
    cfg = CycleConfig(particles_per_cycle=600, inactive_cycles=2, total_cycles=6, seed=4)
    ref = run_eigenvalue(geom, mats, cfg).tallies
    for strategy in ALL_MODES:
        for workers in (1, 3):
            t = run_eigenvalue(geom, mats, cfg, strategy, workers).tallies
            assert t.keff_cycle == ref.keff_cycle
            assert t.flux.tobytes() == ref.flux.tobytes()
            assert t.fission_power.tobytes() == ref.fission_power.tobytes()


def test_split_xs_lookup_changes_nothing(pebble_2g):
    geom, mats = pebble_2g
    base = dict(particles_per_cycle=500, inactive_cycles=1, total_cycles=4, seed=6)
    a = run_eigenvalue(geom, mats, CycleConfig(**base)).tallies
    b = run_eigenvalue(geom, mats, CycleConfig(**base, split_xs_lookup=True)).tallies
    assert a.keff_cycle == b.keff_cycle and a.flux.tobytes() == b.flux.tobytes()


def test_tally_set_fields(pebble_2g):
    geom, mats = pebble_2g
    cfg = CycleConfig(particles_per_cycle=1000, inactive_cycles=2, total_cycles=8, seed=1)
    res = run_eigenvalue(geom, mats, cfg)
    t = res.tallies
    assert len(t.keff_cycle) == 8 and t.keff_std > 0
    assert t.keff_mean == pytest.approx(np.mean(t.keff_cycle[2:]))
    assert t.flux.shape == (2, 2) and np.all(t.flux > 0) and np.all(t.flux_rel_err >= 0)
    assert t.fission_power.sum() == pytest.approx(1.0) and t.fission_power[1] == 0.0
    assert res.lost_particles == 0 and res.histories == 8000
    assert res.max_weight_error < 1e-9
    assert "(" in t.keff_text()


def test_trace_rows(pebble_2g):
    geom, mats = pebble_2g
    cfg = CycleConfig(particles_per_cycle=500, inactive_cycles=1, total_cycles=3, seed=1)
    each = run_eigenvalue(geom, mats, cfg, SortStrategy(mode="AdaptiveEachGeneration"))
    assert [r.event_pass for r in each.trace] == [0, 0, 0]
    every = run_eigenvalue(geom, mats, cfg, SortStrategy(mode="AdaptiveEveryKEvents",
                                                          k_events=1))
    assert len(every.trace) == every.event_passes
    assert any(r.inversion_fraction > 0 for r in every.trace if r.event_pass > 0)
    off = run_eigenvalue(geom, mats, cfg, trace=False)
    assert off.trace == []
    rows = presortedness_trace(every)
    assert len(rows) == len(every.trace) and set(rows[0]) >= {
        "cycle", "event_pass", "inversion_fraction", "sorted_runs"}


def test_degenerate_keys_trace_is_zero():
    mat = MaterialMG.from_arrays(1.0, [[0.6]], 0.5)
    cfg = CycleConfig(particles_per_cycle=300, inactive_cycles=1, total_cycles=3, seed=1)
    res = run_eigenvalue(Geometry.infinite(), [mat], cfg,
                         SortStrategy(mode="BitonicEveryKEvents", k_events=2))
    assert res.trace and all(r.inversion_fraction == 0.0 for r in res.trace)


def test_extinction_is_reported():
    # Fissions are so rare that no site survives the first cycle.
    weak = MaterialMG.from_arrays(1.0, [[0.0]], 1e-12)
    cfg = CycleConfig(particles_per_cycle=5, inactive_cycles=0, total_cycles=2, seed=1)
    with pytest.raises(ExtinctionError):
        run_eigenvalue(Geometry.infinite(), [weak], cfg)


def test_lost_particle_abort(monkeypatch, pebble_2g):
    geom, mats = pebble_2g
    monkeypatch.setattr(ev, "LOST_FRACTION_LIMIT", -1.0)
    cfg = CycleConfig(particles_per_cycle=50, inactive_cycles=0, total_cycles=1, seed=1)
    with pytest.raises(LostParticleError, match="lost particles"):
        run_eigenvalue(geom, mats, cfg)


def test_writers(tmp_path, pebble_2g):
    geom, mats = pebble_2g
    cfg = CycleConfig(particles_per_cycle=300, inactive_cycles=2, total_cycles=5, seed=1)
    res = run_eigenvalue(geom, mats, cfg, SortStrategy(mode="AdaptiveEachGeneration"))
    keff = write_keff_csv(res.tallies, tmp_path / "keff.csv").read_text().splitlines()
    assert keff[0] == "cycle,k_cycle,running_mean,running_std"
    assert keff[1].endswith(",,") and keff[3].count(",") == 3
    assert keff[3].split(",")[3] == ""  # one active cycle: no std yet
    assert float(keff[5].split(",")[2]) == pytest.approx(res.tallies.keff_mean)
    flux = write_flux_csv(res.tallies, tmp_path / "flux.csv").read_text().splitlines()
    assert flux[0] == "cell,group,value,rel_err" and len(flux) == 5
    trace = write_trace_csv(res.trace, tmp_path / "t.csv").read_text().splitlines()
    assert trace[0].startswith("cycle,event_pass,inversion_fraction,sorted_runs")
    assert len(trace) == 1 + len(res.trace)
