import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from nestedentropy.grid import GridSpace
from nestedentropy.landscape import (GaussianComponent, MixtureLandscape,
                                     brute_force_map, random_landscape)
from nestedentropy.search import (ExperimentSample, NesConfig, SearchState,
                                  adapt_step, entropy_of, explore, reflect,
                                  run_nes, select_threshold)


class Counting:
    """Objective wrapper that counts raw evaluations per cell."""

    def __init__(self, fn):
        self.fn = fn
        self.calls = {}

    def __call__(self, cell):
        self.calls[cell] = self.calls.get(cell, 0) + 1
        return self.fn(cell)


def state_with(entropies, grid=None):
    grid = grid or GridSpace.square(5)
    state = SearchState(grid, NesConfig())
    cells = list(grid.cells())
    state.samples = [ExperimentSample(cells[i], h)
                     for i, h in enumerate(entropies)]
    return state


# -- look-up table -------------------------------------------------------------

def test_entropy_of_miss_then_hit():
    grid = GridSpace.square(5)
    state = SearchState(grid)
    f = Counting(lambda c: float(sum(c)))
    assert entropy_of(state, (1, 2), f) == 3.0
    assert state.evaluations == 1
    assert entropy_of(state, (1, 2), f) == 3.0
    assert state.evaluations == 1
    assert f.calls == {(1, 2): 1}


def test_every_cell_once_counts_n():
    grid = GridSpace.square(61)
    state = SearchState(grid)
    for cell in grid.cells():
        entropy_of(state, cell, lambda c: 0.0)
    for cell in [(0, 0), (60, 60), (30, 1)]:
        entropy_of(state, cell, lambda c: 0.0)
    assert state.evaluations == 3721


def test_objective_errors_propagate():
    state = SearchState(GridSpace.square(5))

    def boom(cell):
        raise RuntimeError("sensor offline")

    with pytest.raises(RuntimeError, match="sensor offline"):
        entropy_of(state, (0, 0), boom)
    assert state.evaluations == 0


# -- threshold -----------------------------------------------------------------

def test_threshold_is_minimum():
    assert select_threshold(state_with([0.2, 0.9, 0.5])) == (0, 0.2)
    assert select_threshold(state_with([0.9, 0.5, 0.2])) == (2, 0.2)


def test_threshold_ties_go_to_first_position():
    assert select_threshold(state_with([0.7, 0.7])) == (0, 0.7)
    assert select_threshold(state_with([0.9, 0.3, 0.3])) == (1, 0.3)


def test_threshold_needs_samples():
    with pytest.raises(RuntimeError):
        select_threshold(state_with([]))


def test_single_live_sample_rejected():
    with pytest.raises(ValueError):
        NesConfig(num_samples=1)


@pytest.mark.parametrize("kwargs", [dict(initial_step=0),
                                    dict(initial_step=(1, 0)),
                                    dict(explore_steps=-1),
                                    dict(max_iterations=0),
                                    dict(convergence_tol=-1.0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        NesConfig(**kwargs)


def test_config_json_round_trip(tmp_path):
    cfg = NesConfig(num_samples=40, explore_steps=7, initial_step=[2, 3],
                    seed=5)
    again = NesConfig.from_dict(cfg.to_dict())
    assert again == cfg and again.initial_step == (2, 3)
    with pytest.raises(ValueError):
        NesConfig.from_dict({"num_samples": 3, "bogus": 1})


# -- step adaptation -----------------------------------------------------------

@pytest.mark.parametrize("acc,prop,step,expected", [
    (8, 10, 4, 8),
    (1, 10, 4, 2),
    (0, 10, 1, 1),
    (5, 10, 4, 4),
    (0, 10, 3, 2),
    (10, 10, 40, 60),
])
def test_adapt_step(acc, prop, step, expected):
    assert adapt_step(acc, prop, step, span=60) == expected


def test_adapt_step_per_dimension_and_float():
    new = adapt_step(9, 10, np.array([3, 50]), span=np.array([10, 60]))
    np.testing.assert_array_equal(new, [6, 60])
    assert adapt_step(0, 4, 0.3, floor=0.01) == pytest.approx(0.15)
    with pytest.raises(ValueError):
        adapt_step(0, 0, 2)


def test_reflect_mirrors_at_edge():
    np.testing.assert_array_equal(reflect(np.arange(-3, 9), [5]),
                                  [2, 1, 0, 0, 1, 2, 3, 4, 4, 3, 2, 1])


@given(st.integers(-100, 100), st.integers(2, 21))
def test_reflect_stays_on_grid(i, n):
    j = int(reflect(np.array([i]), [n])[0])
    assert 0 <= j < n
    if 0 <= i < n:
        assert j == i


# -- exploration ---------------------------------------------------------------

@pytest.fixture
def peak():
    grid = GridSpace.square(41)
    return MixtureLandscape([GaussianComponent(1.0, 0.4, -0.6, 1.0, 1.0)],
                            grid)


def test_explore_zero_steps_returns_seed(peak):
    state = SearchState(peak.grid, NesConfig(explore_steps=0))
    seed = ExperimentSample((3, 3), peak((3, 3)))
    out = explore(seed, 0.0, NesConfig(explore_steps=0), state, peak)
    assert out == seed and state.evaluations == 0


def test_explore_requires_seed_above_threshold(peak):
    state = SearchState(peak.grid)
    seed = ExperimentSample((3, 3), 0.1)
    with pytest.raises(ValueError):
        explore(seed, 0.1, NesConfig(), state, peak)


def test_explore_always_returns_above_threshold(peak):
    cfg = NesConfig(explore_steps=30)
    rng = np.random.default_rng(0)
    for k in range(200):
        state = SearchState(peak.grid, NesConfig(seed=k))
        cell = tuple(int(i) for i in rng.integers(0, 41, 2))
        h = peak(cell)
        out = explore(ExperimentSample(cell, h), h - 0.05, cfg, state, peak)
        assert out.entropy > h - 0.05
        assert out.entropy == peak(out.cell)


def test_explore_climbs_under_constraint(peak):
    """Monte Carlo: walks constrained at the seed's own level end no lower."""
    cfg = NesConfig(explore_steps=50)
    seed_cell = (8, 30)
    h0 = peak(seed_cell)
    gains = []
    for k in range(200):
        state = SearchState(peak.grid, NesConfig(seed=k))
        state.step = np.array([2, 2])
        out = explore(ExperimentSample(seed_cell, h0), h0 - 1e-3, cfg, state,
                      peak)
        gains.append(out.entropy - h0)
    gains = np.array(gains)
    assert np.mean(gains >= 0) >= 0.9
    assert gains.mean() > 0


def test_unconstrained_walk_is_uniform():
    """Chi-square: with no constraint the walk ends uniformly on a 5x5 grid."""
    grid = GridSpace.square(5)
    cfg = NesConfig(explore_steps=8, initial_step=4)
    counts = np.zeros(grid.shape)
    runs = 5000
    for k in range(runs):
        state = SearchState(grid, NesConfig(initial_step=4, seed=k))
        out = explore(ExperimentSample((2, 2), 0.0), -math.inf, cfg, state,
                      lambda c: 0.0)
        counts[out.cell] += 1
    res = stats.chisquare(counts.ravel())
    assert res.pvalue > 0.001


# -- full runs -------------------------------------------------------------------

def test_constant_objective_converges_immediately():
    grid = GridSpace.square(11)
    res = run_nes(lambda c: 0.3, grid, NesConfig(num_samples=10, seed=1))
    assert res.converged
    assert res.metrics.iterations == 0
    assert res.metrics.evaluations == 10
    assert set(s.cell for s in res.samples) <= set(res.optimal_cells)
    assert len(res.optimal_cells) == 10


def test_more_samples_than_cells_uses_replacement():
    grid = GridSpace(((0, 1), (0, 1)), (2, 2))
    res = run_nes(lambda c: float(c[0] + 2 * c[1]), grid,
                  NesConfig(num_samples=9, seed=0))
    assert res.converged
    assert res.optimal_cells == [(1, 1)]
    assert res.metrics.evaluations <= 4


def test_iteration_cap_reports_non_convergence(peak):
    res = run_nes(peak, peak.grid, NesConfig(num_samples=30, max_iterations=3))
    assert not res.converged
    assert res.metrics.iterations == 3
    assert len(res.samples) == 30


def test_unimodal_matches_brute_force(peak):
    bf = brute_force_map(peak, peak.grid)
    hits = 0
    for k in range(100):
        res = run_nes(peak, peak.grid, NesConfig(num_samples=50, seed=k))
        hits += res.converged and res.optimal_cells == bf.argmax_cells
    assert hits >= 99


def test_deterministic_given_seed():
    grid = GridSpace.square(31)
    L = random_landscape(7, grid, 3)
    a = run_nes(L, grid, NesConfig(seed=9))
    b = run_nes(L, grid, NesConfig(seed=9))
    assert a.to_dict() == b.to_dict()
    assert a.trace == b.trace


def test_seven_gaussian_trace_and_visits():
    grid = GridSpace.square(61)
    L = random_landscape(7, grid, 42)
    res = run_nes(L, grid, NesConfig(num_samples=50, seed=1))
    bf = brute_force_map(L, grid)
    assert res.converged
    assert res.h_max == pytest.approx(bf.max_value, abs=1e-9)
    assert len(res.trace) == res.metrics.iterations
    assert len(res.visited) == res.metrics.evaluations < grid.size
    assert res.trace[-1].evaluations == res.metrics.evaluations


def test_trace_csv(tmp_path, peak):
    res = run_nes(peak, peak.grid, NesConfig(seed=2))
    path = tmp_path / "trace.csv"
    res.write_trace(path)
    rows = path.read_text().splitlines()
    assert rows[0] == "iteration,H_star,replaced_cell,accepted_cell,m"
    assert len(rows) == res.metrics.iterations + 1
    h = [float(r.split(",")[1]) for r in rows[1:]]
    assert h == sorted(h)


def test_shared_cache_counts_cumulatively(peak):
    cache = {}
    a = run_nes(peak, peak.grid, NesConfig(seed=1), cache)
    b = run_nes(peak, peak.grid, NesConfig(seed=2), cache)
    assert b.metrics.evaluations == len(cache) >= a.metrics.evaluations


# -- properties ------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 40), st.integers(5, 25),
       st.integers(1, 7), st.integers(0, 30))
def test_run_invariants(seed, n_live, cells, comps, steps):
    grid = GridSpace.square(cells)
    L = random_landscape(comps, grid, seed)
    f = Counting(L)
    res = run_nes(f, grid, NesConfig(num_samples=n_live, explore_steps=steps,
                                     seed=seed, max_iterations=3000))
    hist = res.threshold_history
    assert all(b >= a for a, b in zip(hist, hist[1:]))
    assert len(res.samples) == n_live
    assert max(f.calls.values()) == 1
    assert res.metrics.evaluations == len(f.calls) <= grid.size
    assert res.metrics.compression_efficiency >= 1
    for cell in res.optimal_cells:
        assert abs(L(cell) - res.h_max) <= 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(4, 10), st.integers(1, 5))
def test_small_grids_agree_with_brute_force(seed, side, comps):
    grid = GridSpace.square(side)
    L = random_landscape(comps, grid, seed)
    res = run_nes(L, grid, NesConfig(num_samples=grid.size, seed=seed))
    bf = brute_force_map(L, grid)
    assert res.converged
    assert res.h_max == pytest.approx(bf.max_value, abs=1e-9)
    assert set(res.optimal_cells) <= set(bf.argmax_cells)


def test_small_grids_mostly_found_with_half_coverage():
    hits = 0
    for k in range(50):
        grid = GridSpace.square(10)
        L = random_landscape(3, grid, 1000 + k)
        res = run_nes(L, grid, NesConfig(num_samples=50, seed=k))
        hits += abs(res.h_max - brute_force_map(L, grid).max_value) <= 1e-9
    assert hits >= 45
