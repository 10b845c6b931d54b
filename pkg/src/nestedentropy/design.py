"""Choosing where to measure next, and the closed inference/inquiry loop.

Every posterior circle predicts a reading at a candidate cell; the entropy
of those predictions scores the cell.  The best cell is found by brute
force or by nested entropy sampling, one cell is picked from the optimal
set, the simulated sensor reads it, and the posterior is recomputed.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field as dc_field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .circle import CircleModel, FieldSpec, Measurement, measure
from .grid import Cell
from .inference import (InferenceError, NestedSamplingConfig,
                        PosteriorEnsemble, PriorSpec,
                        nested_sampling_posterior)
from .landscape import brute_force_map
from .metrics import RunMetrics
from .search import NesConfig, run_nes

__all__ = [
    "PredictiveDistribution",
    "DesignPolicy",
    "LoopRecord",
    "LoopAborted",
    "predictive_distribution",
    "predictive_entropy",
    "entropy_objective",
    "select_experiment",
    "search_optimum",
    "run_autonomous_loop",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictiveDistribution:
    """Probability of each outcome bin; bins run from brightest to darkest."""

    bins: tuple[float, ...]
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if len(p) != len(self.bins):
            raise ValueError("one probability per bin")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "probabilities", p)


def _bin_centres(field: FieldSpec, n_bins: int) -> tuple[float, ...]:
    hi, lo = field.intensity_inside, field.intensity_outside
    w = (hi - lo) / n_bins
    return tuple(hi - (k + 0.5) * w for k in range(n_bins))


def _atom_arrays(ensemble) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    samples = getattr(ensemble, "samples", ensemble)
    if len(samples) == 0:
        raise ValueError("posterior ensemble is empty")
    arr = np.array([[c.cx, c.cy, c.r] for c in samples])
    return arr[:, 0], arr[:, 1], arr[:, 2] ** 2


def _bin_counts(inside: np.ndarray, n_bins: int) -> np.ndarray:
    # noiseless predictions sit exactly on the two extreme levels
    counts = np.zeros(n_bins)
    k = int(inside.sum())
    counts[0] += k
    counts[-1] += inside.size - k
    return counts


def predictive_distribution(ensemble, candidate: Sequence[int],
                            field: FieldSpec,
                            n_bins: int = 2) -> PredictiveDistribution:
    """Fraction of posterior atoms predicting each outcome bin at ``candidate``.

    Bins split ``[intensity_outside, intensity_inside]`` into equal widths;
    with the default two bins the split is at the midpoint.
    """
    if n_bins < 2:
        raise ValueError("need at least two outcome bins")
    cx, cy, r2 = _atom_arrays(ensemble)
    x, y = field.grid.center(candidate)
    inside = (x - cx) ** 2 + (y - cy) ** 2 <= r2
    counts = _bin_counts(inside, n_bins)
    return PredictiveDistribution(_bin_centres(field, n_bins),
                                  counts / counts.sum())


def predictive_entropy(dist) -> float:
    """Shannon entropy in nats, with ``0 log 0 = 0``.

    Accepts a :class:`PredictiveDistribution` or a bare probability vector.
    """
    p = np.asarray(getattr(dist, "probabilities", dist), dtype=float)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum()) + 0.0


def entropy_objective(ensemble, field: FieldSpec, n_bins: int = 2,
                      exclude: Iterable[Cell] = ()) -> Callable[[Cell], float]:
    """Cell -> predictive entropy for ``ensemble``.

    Cells in ``exclude`` score ``-inf`` so no search ever selects them.
    """
    cx, cy, r2 = _atom_arrays(ensemble)
    xs, ys = field.grid.axes()
    shape = field.grid.shape
    excluded = frozenset(tuple(c) for c in exclude)

    def objective(cell) -> float:
        i, j = cell
        if not (0 <= i < shape[0] and 0 <= j < shape[1]):
            raise IndexError(f"cell {tuple(cell)} outside grid {shape}")
        if excluded and tuple(cell) in excluded:
            return -math.inf
        inside = (xs[i] - cx) ** 2 + (ys[j] - cy) ** 2 <= r2
        counts = _bin_counts(inside, n_bins)
        return predictive_entropy(counts / counts.sum())

    return objective


@dataclass
class DesignPolicy:
    """How to search the entropy map and pick one experiment.

    ``searcher`` is ``"brute"``, ``"nes"`` or ``"both"`` (NES drives the
    loop; brute force runs alongside for comparison).  ``selector`` is
    ``"random"`` (seeded uniform draw among optima), ``"nearest"``
    (closest to the previous measurement), or a callable cost
    ``cell -> float`` to minimize.

    ``restarts`` bounds how often NES is rerun from fresh random cells when
    a run ends no higher than its best starting value.  That happens when
    every starting cell lands on a flat region (typically zero entropy
    away from a well-localized circle).  Reruns share one look-up table,
    so the reported evaluation count covers all of them.
    """

    searcher: str = "nes"
    nes: NesConfig = dc_field(default_factory=NesConfig)
    selector: str | Callable[[Cell], float] = "random"
    restarts: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.searcher not in ("brute", "nes", "both"):
            raise ValueError(f"unknown searcher {self.searcher!r}")
        if not callable(self.selector) and self.selector not in ("random",
                                                                 "nearest"):
            raise ValueError(f"unknown selector {self.selector!r}")


def select_experiment(optimal_cells: Iterable[Cell], policy: DesignPolicy,
                      rng: np.random.Generator | None = None,
                      cost: Callable[[Cell], float] | None = None) -> Cell:
    """Pick one cell from the optimal set.

    Cost-based choices break ties on the lowest cell index.  ``cost``
    overrides a callable ``policy.selector``; the loop uses it to supply
    the distance from the arm's current position for ``"nearest"``.
    """
    cells = sorted(tuple(c) for c in set(map(tuple, optimal_cells)))
    if not cells:
        raise ValueError("no optimal cells to choose from")
    if len(cells) == 1:
        return cells[0]
    if cost is None and callable(policy.selector):
        cost = policy.selector
    if cost is not None:
        return min(cells, key=lambda c: (cost(c), c))
    if policy.selector == "nearest":
        raise ValueError("nearest selector needs a cost function")
    rng = rng if rng is not None else np.random.default_rng(policy.seed)
    return cells[int(rng.integers(len(cells)))]


@dataclass
class SearchOutcome:
    optimal_cells: list[Cell]
    h_max: float
    metrics: RunMetrics
    brute_max: float | None = None
    brute_metrics: RunMetrics | None = None
    entropy_map: np.ndarray | None = None


def search_optimum(objective, field: FieldSpec, policy: DesignPolicy,
                   nes_seed: int | None = None) -> SearchOutcome:
    """Run the policy's searcher(s) on one entropy objective."""
    grid = field.grid
    bf = None
    if policy.searcher in ("brute", "both"):
        bf = brute_force_map(objective, grid)
        bf_metrics = RunMetrics(grid.size, bf.evaluations, 1, True)
        if policy.searcher == "brute":
            return SearchOutcome(bf.argmax_cells, bf.max_value, bf_metrics,
                                 bf.max_value, bf_metrics, bf.values)
    cfg = policy.nes
    if nes_seed is not None:
        cfg = replace(cfg, seed=nes_seed)
    seeds = np.random.default_rng(cfg.seed).integers(
        0, 2 ** 31, size=policy.restarts)
    cache: dict = {}
    res = run_nes(objective, grid, cfg, cache)
    best, iterations = res, res.metrics.iterations
    for extra in seeds:
        if best.h_max > res.initial_max + cfg.convergence_tol:
            break
        res = run_nes(objective, grid, replace(cfg, seed=int(extra)), cache)
        iterations += res.metrics.iterations
        if res.h_max > best.h_max:
            best = res
    metrics = RunMetrics(grid.size, len(cache), iterations, best.converged)
    res = replace(best, metrics=metrics)
    out = SearchOutcome(res.optimal_cells, res.h_max, res.metrics)
    if bf is not None:
        out.brute_max = bf.max_value
        out.brute_metrics = bf_metrics
        out.entropy_map = bf.values
    return out


@dataclass
class LoopRecord:
    cycle: int
    chosen_cell: Cell
    intensity: float
    h_max: float
    n_optimal: int
    metrics: RunMetrics
    posterior_mean: list[float]
    posterior_std: list[float]
    log_evidence: float
    brute_max: float | None = None
    brute_metrics: RunMetrics | None = None
    entropy_map: np.ndarray | None = dc_field(default=None, repr=False)

    @property
    def agrees(self) -> bool | None:
        """Whether NES reached the brute-force maximum (``None`` if not compared)."""
        if self.brute_max is None:
            return None
        return abs(self.h_max - self.brute_max) <= 1e-9

    def to_dict(self) -> dict:
        d = {"cycle": self.cycle,
             "chosen_cell": list(self.chosen_cell),
             "intensity": self.intensity,
             "h_max": self.h_max,
             "n_optimal": self.n_optimal,
             "metrics": self.metrics.to_dict(),
             "posterior_mean": self.posterior_mean,
             "posterior_std": self.posterior_std,
             "log_evidence": self.log_evidence}
        if self.brute_max is not None:
            d["brute_max"] = self.brute_max
            d["brute_metrics"] = self.brute_metrics.to_dict()
            d["agrees"] = self.agrees
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class LoopAborted(RuntimeError):
    """Inference failed mid-loop; ``records`` holds the completed cycles."""

    def __init__(self, message, records, log):
        super().__init__(message)
        self.records = records
        self.log = log


def run_autonomous_loop(truth: CircleModel, field: FieldSpec,
                        prior: PriorSpec | None = None,
                        policy: DesignPolicy | None = None,
                        cycles: int = 15, seed: int = 0,
                        inference: NestedSamplingConfig | None = None,
                        exclude_measured: bool = True,
                        initial_log: Sequence[Measurement] = (),
                        keep_maps: bool = False,
                        callback: Callable[[LoopRecord], None] | None = None
                        ) -> list[LoopRecord]:
    """Alternate inference and inquiry for ``cycles`` rounds.

    Each cycle infers the posterior from the log so far, searches the
    entropy map, measures the chosen cell against ``truth``, and appends
    the reading.  The entropy cache is rebuilt every cycle because the
    objective changes with the posterior.
    """
    if cycles < 1:
        raise ValueError("cycles must be at least 1")
    prior = prior or PriorSpec.for_field(field)
    policy = policy or DesignPolicy()
    inference = inference or NestedSamplingConfig()
    seeds = np.random.SeedSequence(seed)
    noise_rng, select_rng = (np.random.default_rng(s)
                             for s in seeds.spawn(2))
    cycle_seeds = np.random.default_rng(seeds.spawn(1)[0]).integers(
        0, 2 ** 31, size=(cycles, 2))

    log = list(initial_log)
    records: list[LoopRecord] = []
    for k in range(cycles):
        ns_seed, nes_seed = (int(s) for s in cycle_seeds[k])
        cfg = replace(inference, seed=ns_seed)
        try:
            ensemble = nested_sampling_posterior(log, prior, field, cfg)
        except InferenceError as exc:
            raise LoopAborted(f"inference failed in cycle {k + 1}: {exc}",
                              records, log) from exc
        exclude = [m.location for m in log] if exclude_measured else ()
        objective = entropy_objective(ensemble, field, exclude=exclude)
        found = search_optimum(objective, field, policy, nes_seed)

        cost = None
        if policy.selector == "nearest":
            here = (np.asarray(log[-1].location) if log
                    else (np.asarray(field.grid.shape) - 1) / 2)
            cost = lambda c: float(np.hypot(*(np.asarray(c) - here)))
        cell = select_experiment(found.optimal_cells, policy, select_rng,
                                 cost)
        reading = measure(truth, cell, field, noise_rng)
        log.append(reading)
        rec = LoopRecord(k + 1, cell, reading.intensity, found.h_max,
                         len(found.optimal_cells), found.metrics,
                         ensemble.mean().tolist(), ensemble.std().tolist(),
                         ensemble.log_evidence, found.brute_max,
                         found.brute_metrics,
                         found.entropy_map if keep_maps else None)
        records.append(rec)
        logger.info("cycle %d: cell %s, H=%.4f, CE=%.2f", rec.cycle, cell,
                    rec.h_max, rec.metrics.compression_efficiency)
        if callback is not None:
            callback(rec)
    return records

