import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nestedentropy.circle import CircleModel, FieldSpec, Measurement
from nestedentropy.design import (DesignPolicy, LoopAborted, LoopRecord,
                                  PredictiveDistribution,
                                  entropy_objective, predictive_distribution,
                                  predictive_entropy, run_autonomous_loop,
                                  search_optimum, select_experiment)
from nestedentropy.grid import GridSpace
from nestedentropy.inference import NestedSamplingConfig, PriorSpec
from nestedentropy.search import NesConfig

H_04_06 = 0.6730116670092565


@pytest.fixture
def field():
    return FieldSpec()


def ring(k_inside, k_outside):
    """Atoms of which ``k_inside`` cover the origin and ``k_outside`` do not."""
    return ([CircleModel(0.0, 0.0, 1.0)] * k_inside
            + [CircleModel(2.0, 2.0, 0.5)] * k_outside)


@pytest.mark.parametrize("k_in,k_out,probs,h", [
    (10, 0, (1.0, 0.0), 0.0),
    (4, 6, (0.4, 0.6), H_04_06),
    (0, 10, (0.0, 1.0), 0.0),
    (5, 5, (0.5, 0.5), math.log(2)),
])
def test_predictive_examples(field, k_in, k_out, probs, h):
    dist = predictive_distribution(ring(k_in, k_out), (30, 30), field)
    np.testing.assert_allclose(dist.probabilities, probs, atol=1e-15)
    assert dist.bins == pytest.approx((0.775, 0.325), abs=1e-15)
    assert predictive_entropy(dist) == pytest.approx(h, abs=1e-12)


def test_entropy_zero_probability_terms():
    assert predictive_entropy([1.0, 0.0]) == 0.0
    assert predictive_entropy([0.4, 0.6]) == pytest.approx(H_04_06, abs=1e-15)
    assert predictive_entropy([0.25] * 4) == pytest.approx(math.log(4))


def test_distribution_validation():
    with pytest.raises(ValueError):
        PredictiveDistribution((1.0, 0.1), np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        predictive_distribution([], (0, 0), FieldSpec())
    with pytest.raises(ValueError):
        predictive_distribution(ring(1, 1), (0, 0), FieldSpec(), n_bins=1)


@given(st.lists(st.floats(0, 1), min_size=2, max_size=8))
def test_entropy_bounds(raw):
    p = np.array(raw)
    if p.sum() <= 0:
        return
    h = predictive_entropy(p / p.sum())
    assert -1e-12 <= h <= math.log(len(p)) + 1e-12


def test_objective_matches_distribution(field):
    rng = np.random.default_rng(1)
    atoms = [CircleModel(*rng.uniform([-2, -2, 0.3], [2, 2, 2]))
             for _ in range(25)]
    obj = entropy_objective(atoms, field)
    for cell in [(0, 0), (30, 30), (12, 40), (60, 7)]:
        assert obj(cell) == pytest.approx(
            predictive_entropy(predictive_distribution(atoms, cell, field)),
            abs=1e-15)
    with pytest.raises(IndexError):
        obj((61, 0))


def test_objective_excludes(field):
    obj = entropy_objective(ring(5, 5), field, exclude=[(30, 30)])
    assert obj((30, 30)) == -math.inf
    assert obj((30, 31)) == pytest.approx(math.log(2))


@given(st.integers(1, 12))
def test_even_split_is_maximal(k):
    field = FieldSpec(GridSpace.square(5))
    atoms = ring(k, k)
    obj = entropy_objective(atoms, field)
    assert obj((2, 2)) == pytest.approx(math.log(2))
    assert max(obj(c) for c in field.grid.cells()) <= math.log(2) + 1e-12


@given(st.integers(0, 10 ** 6))
def test_entropy_order_follows_split_evenness(seed):
    rng = np.random.default_rng(seed)
    field = FieldSpec(GridSpace.square(7))
    atoms = [CircleModel(*rng.uniform([-3, -3, 0.3], [3, 3, 3]))
             for _ in range(int(rng.integers(2, 30)))]
    obj = entropy_objective(atoms, field)
    cells = list(field.grid.cells())
    split = {c: predictive_distribution(atoms, c, field).probabilities[0]
             for c in cells}
    for a, b in zip(cells, cells[1:] + cells[:1]):
        assert (obj(a) >= obj(b)) == (abs(split[a] - 0.5)
                                      <= abs(split[b] - 0.5) + 1e-12)


def test_affine_intensity_change_keeps_map():
    rng = np.random.default_rng(2)
    atoms = [CircleModel(*rng.uniform([-2, -2, 0.3], [2, 2, 2]))
             for _ in range(20)]
    a = FieldSpec(GridSpace.square(15))
    b = FieldSpec(GridSpace.square(15), intensity_inside=7.0,
                  intensity_outside=-3.0)
    oa, ob = entropy_objective(atoms, a), entropy_objective(atoms, b)
    assert all(oa(c) == ob(c) for c in a.grid.cells())


def test_policy_validation():
    with pytest.raises(ValueError):
        DesignPolicy(searcher="greedy")
    with pytest.raises(ValueError):
        DesignPolicy(selector="farthest")


def test_select_random_is_seeded_and_uniform():
    cells = [(0, 0), (1, 1), (2, 2)]
    policy = DesignPolicy(seed=3)
    a = select_experiment(cells, policy, np.random.default_rng(4))
    b = select_experiment(cells, policy, np.random.default_rng(4))
    assert a == b
    rng = np.random.default_rng(0)
    picks = [select_experiment(cells, policy, rng) for _ in range(3000)]
    counts = np.array([picks.count(c) for c in cells])
    assert np.all(np.abs(counts - 1000) < 100)


def test_select_cost_and_ties():
    cells = [(5, 5), (1, 9), (9, 1)]
    near = lambda c: abs(c[0] - 1) + abs(c[1] - 8)
    assert select_experiment(cells, DesignPolicy(selector=near)) == (1, 9)
    flat = lambda c: 0.0
    assert select_experiment(cells, DesignPolicy(selector=flat)) == (1, 9)
    with pytest.raises(ValueError):
        select_experiment([], DesignPolicy())
    with pytest.raises(ValueError):
        select_experiment(cells, DesignPolicy(selector="nearest"))


def test_search_optimum_both_agree(field):
    rng = np.random.default_rng(5)
    atoms = [CircleModel(*rng.uniform([-1, -1, 0.8], [1, 1, 1.6]))
             for _ in range(25)]
    obj = entropy_objective(atoms, field)
    out = search_optimum(obj, field, DesignPolicy("both", NesConfig()))
    assert out.brute_metrics.evaluations == 3721
    assert out.entropy_map.shape == (61, 61)
    assert out.h_max == pytest.approx(out.brute_max, abs=1e-9)
    assert out.metrics.compression_efficiency > 1


def test_restart_escapes_zero_plateau(field):
    # one informative cell; everything else has zero entropy
    peak = (40, 17)
    obj = lambda c: 0.5 if tuple(c) == peak else 0.0
    out = search_optimum(obj, field, DesignPolicy(
        "nes", NesConfig(num_samples=25), restarts=0))
    assert out.h_max == 0.0
    out = search_optimum(obj, field, DesignPolicy(
        "nes", NesConfig(num_samples=25), restarts=10))
    assert out.metrics.evaluations <= 11 * 25
    assert out.metrics.iterations == 0


def test_brute_loop_evaluates_every_cell(field):
    recs = run_autonomous_loop(CircleModel(0.4, -0.3, 1.2), field,
                               policy=DesignPolicy("brute"), cycles=2, seed=1)
    for r in recs:
        assert r.metrics.evaluations == 3721
        assert r.metrics.compression_efficiency == 1.0
    assert recs[0].chosen_cell != recs[1].chosen_cell


def test_loop_deterministic_and_serializable(field):
    kw = dict(policy=DesignPolicy("both", selector="nearest"), cycles=3,
              seed=2)
    a = run_autonomous_loop(CircleModel(0.4, -0.3, 1.2), field, **kw)
    b = run_autonomous_loop(CircleModel(0.4, -0.3, 1.2), field, **kw)
    assert [r.to_json() for r in a] == [r.to_json() for r in b]
    assert all(isinstance(r, LoopRecord) and r.agrees is not None for r in a)
    assert [r.cycle for r in a] == [1, 2, 3]


def test_loop_excludes_measured_cells(field):
    recs = run_autonomous_loop(CircleModel(0, 0, 1.5), field,
                               policy=DesignPolicy("brute"), cycles=6,
                               seed=3)
    cells = [r.chosen_cell for r in recs]
    assert len(set(cells)) == len(cells)


def test_loop_contracts_posterior(field):
    recs = run_autonomous_loop(CircleModel(0.4, -0.3, 1.2), field,
                               policy=DesignPolicy("nes"), cycles=12, seed=4)
    first = np.prod(recs[0].posterior_std)
    last = np.prod(recs[-1].posterior_std)
    assert last < first / 10


def test_loop_reports_inference_failure(field):
    seen = []
    with pytest.raises(LoopAborted) as info:
        run_autonomous_loop(
            CircleModel(0, 0, 1.5), field, policy=DesignPolicy("brute"),
            cycles=5, seed=0, callback=seen.append,
            initial_log=[Measurement((30, 30), 1.0)] * 30,
            inference=NestedSamplingConfig(max_iterations=5))
    assert info.value.records == seen == []


def test_loop_validation(field):
    with pytest.raises(ValueError):
        run_autonomous_loop(CircleModel(0, 0, 1), field, cycles=0)


def test_loop_nes_mostly_matches_brute_force():
    field = FieldSpec(GridSpace.square(41))
    agree = total = 0
    for seed in range(3):
        recs = run_autonomous_loop(CircleModel(0.4, -0.3, 1.2), field,
                                   policy=DesignPolicy("both"), cycles=10,
                                   seed=seed)
        for r in recs:
            total += 1
            agree += bool(r.agrees)
    # strict thresholds can stall on a lower ring level; see README
    assert agree / total >= 0.8
