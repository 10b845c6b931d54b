"""Nested entropy sampling: threshold-contracting search for the best experiment.

A set of ``N`` live experiments is kept.  Each outer iteration takes the
live sample with the least entropy as the threshold ``H*``, copies a
surviving sample, explores from the copy with a random walk restricted to
cells whose entropy exceeds ``H*``, and puts the explored sample in place
of the discarded one.  The threshold therefore only rises, and the search
ends once every live sample has the same entropy.

Entropies are memoized per run, so the number of distinct evaluations
``m`` never exceeds the number of cells ``n``.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .grid import Cell, GridSpace
from .metrics import RunMetrics

__all__ = [
    "NesConfig",
    "ExperimentSample",
    "SearchState",
    "TraceRow",
    "NesResult",
    "entropy_of",
    "select_threshold",
    "adapt_step",
    "reflect",
    "constrained_walk",
    "explore",
    "run_nes",
]

logger = logging.getLogger(__name__)

Objective = Callable[[Cell], float]


@dataclass(frozen=True)
class NesConfig:
    """Settings for one search run.

    ``initial_step`` is the half-width (in cells) of the proposal box; an
    int applies to every dimension and ``None`` picks an eighth of each
    grid span.  After every exploration the step doubles when more than
    ``target_acceptance`` of the proposals were accepted and halves when
    fewer were.
    """

    num_samples: int = 25
    explore_steps: int = 20
    initial_step: int | tuple[int, ...] | None = None
    target_acceptance: float = 0.5
    convergence_tol: float = 1e-9
    max_iterations: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.num_samples < 2:
            raise ValueError("num_samples must be at least 2")
        if self.explore_steps < 0:
            raise ValueError("explore_steps must be nonnegative")
        if self.initial_step is not None:
            steps = np.atleast_1d(self.initial_step)
            if np.any(steps < 1):
                raise ValueError("initial_step must be at least one cell")
            if isinstance(self.initial_step, list):
                object.__setattr__(self, "initial_step",
                                   tuple(int(s) for s in steps))
        if not 0.0 < self.target_acceptance < 1.0:
            raise ValueError("target_acceptance must lie in (0, 1)")
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol must be nonnegative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")

    def steps_for(self, grid: GridSpace) -> np.ndarray:
        spans = grid.spans
        if self.initial_step is None:
            step = np.maximum(spans // 8, 1)
        else:
            step = np.broadcast_to(np.asarray(self.initial_step, dtype=int),
                                   spans.shape).copy()
        return np.minimum(step, spans)

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(self.initial_step, tuple):
            d["initial_step"] = list(self.initial_step)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NesConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown NES config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "NesConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ExperimentSample:
    cell: Cell
    entropy: float


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    h_star: float
    replaced_cell: Cell
    accepted_cell: Cell
    evaluations: int


class SearchState:
    """Mutable bookkeeping for a single run.

    ``cache`` is the look-up table of every entropy computed so far; its
    size is the evaluation count ``m``.
    """

    def __init__(self, grid: GridSpace, config: NesConfig | None = None,
                 cache: dict[Cell, float] | None = None):
        config = config or NesConfig()
        self.grid = grid
        self.rng = np.random.default_rng(config.seed)
        self.step = config.steps_for(grid)
        self.samples: list[ExperimentSample] = []
        self.threshold = -np.inf
        self.cache: dict[Cell, float] = {} if cache is None else cache
        self.threshold_history: list[float] = []
        self.trace: list[TraceRow] = []
        self.iteration = 0

    @property
    def evaluations(self) -> int:
        return len(self.cache)


def entropy_of(state: SearchState, cell: Cell, objective: Objective) -> float:
    """Cached objective value; the objective runs at most once per cell."""
    try:
        return state.cache[cell]
    except KeyError:
        pass
    value = float(objective(cell))
    state.cache[cell] = value
    return value


def select_threshold(state: SearchState) -> tuple[int, float]:
    """Position and entropy of the worst live sample.

    Ties go to the earliest position in ``state.samples``.
    """
    if not state.samples:
        raise RuntimeError("no live samples to select a threshold from")
    worst = min(range(len(state.samples)),
                key=lambda i: state.samples[i].entropy)
    return worst, state.samples[worst].entropy


def adapt_step(accepts: int, proposals: int, step, span=None,
               target: float = 0.5, floor=1):
    """Double the step when acceptance beats ``target``, halve it when below.

    Doubling is capped at ``span``; halving floors at ``floor``.  Integer
    steps (grid cells) round the half up.  Works elementwise on
    per-dimension arrays.
    """
    if proposals <= 0:
        raise ValueError("proposals must be positive")
    rate = accepts / proposals
    step = np.asarray(step)
    integer = np.issubdtype(step.dtype, np.integer)
    if rate > target:
        new = 2 * step
        if span is not None:
            new = np.minimum(new, span)
    elif rate < target:
        new = np.maximum(-(-step // 2) if integer else step / 2, floor)
    else:
        new = step.copy()
    if new.ndim == 0:
        return int(new) if integer else float(new)
    return new


def reflect(index: np.ndarray, n: Sequence[int]) -> np.ndarray:
    """Fold indices back into ``[0, n - 1]`` by mirroring at the grid edge.

    The mirror sits on the outer boundary of the end cells (``-1 -> 0``,
    ``n -> n - 1``), which keeps the proposal kernel symmetric for any
    offset, so an unconstrained walk is uniform over the grid.
    """
    n = np.asarray(n)
    m = np.mod(index, 2 * n)
    return np.where(m < n, m, 2 * n - 1 - m)


def constrained_walk(start, start_key, threshold, propose, score, n_steps):
    """Random walk that only moves to points scoring strictly above ``threshold``.

    ``propose(current, k)`` returns a candidate (or ``None`` to reject
    outright) and ``score(candidate)`` returns a value comparable with
    ``threshold``.  Returns ``(position, key, accepted_count)``.
    """
    current, key, accepts = start, start_key, 0
    for k in range(n_steps):
        cand = propose(current, k)
        if cand is None:
            continue
        cand_key = score(cand)
        if cand_key > threshold:
            current, key = cand, cand_key
            accepts += 1
    return current, key, accepts


def explore(seed_sample: ExperimentSample, h_star: float, config: NesConfig,
            state: SearchState, objective: Objective) -> ExperimentSample:
    """Walk from ``seed_sample`` inside the region where entropy exceeds ``h_star``.

    Each proposal adds a uniform integer offset in ``[-step, step]`` per
    dimension, mirrored at the grid edges.  The walk's acceptance rate then
    updates ``state.step``.
    """
    if not seed_sample.entropy > h_star:
        raise ValueError("seed sample must lie strictly above the threshold")
    n_steps = config.explore_steps
    if n_steps == 0:
        return seed_sample

    shape = np.asarray(state.grid.shape)
    offsets = state.rng.integers(-state.step, state.step + 1,
                                 size=(n_steps, len(shape)))
    moves = offsets.tolist()

    def propose(current, k):
        idx = np.asarray(current) + moves[k]
        return tuple(reflect(idx, shape).tolist())

    def score(cell):
        return entropy_of(state, cell, objective)

    cell, value, accepts = constrained_walk(
        seed_sample.cell, seed_sample.entropy, h_star, propose, score, n_steps)
    state.step = np.asarray(adapt_step(accepts, n_steps, state.step,
                                       state.grid.spans,
                                       config.target_acceptance))
    return ExperimentSample(cell, value)


@dataclass
class NesResult:
    """Outcome of one search.

    ``optimal_cells`` are the distinct live cells within the convergence
    tolerance of ``h_max``, sorted lexicographically.
    """

    optimal_cells: list[Cell]
    h_max: float
    metrics: RunMetrics
    converged: bool
    initial_max: float = float("nan")
    threshold_history: list[float] = field(default_factory=list)
    trace: list[TraceRow] = field(default_factory=list)
    samples: list[ExperimentSample] = field(default_factory=list)
    visited: list[Cell] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "optimal_cells": [list(c) for c in self.optimal_cells],
            "h_max": self.h_max,
            "converged": self.converged,
            "initial_max": self.initial_max,
            "metrics": self.metrics.to_dict(),
            "threshold_history": self.threshold_history,
            "samples": [{"cell": list(s.cell), "entropy": s.entropy}
                        for s in self.samples],
            "visited": [list(c) for c in self.visited],
        }

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "H_star", "replaced_cell",
                        "accepted_cell", "m"])
            for row in self.trace:
                w.writerow([row.iteration, repr(row.h_star),
                            _cell_str(row.replaced_cell),
                            _cell_str(row.accepted_cell), row.evaluations])


def _cell_str(cell: Cell) -> str:
    return ":".join(str(i) for i in cell)


def _spread(samples: list[ExperimentSample]) -> tuple[float, float]:
    values = [s.entropy for s in samples]
    return min(values), max(values)


def _agree(lo: float, hi: float, tol: float) -> bool:
    return lo == hi or hi - lo <= tol


def run_nes(objective: Objective, grid: GridSpace,
            config: NesConfig | None = None,
            cache: dict[Cell, float] | None = None) -> NesResult:
    """Search ``grid`` for the cell maximizing ``objective``.

    Runs until all live samples agree within ``config.convergence_tol`` or
    ``config.max_iterations`` outer iterations have elapsed; the latter is
    reported through ``converged=False`` rather than an exception.

    Passing a ``cache`` dict shares the look-up table with earlier runs on
    the same objective; the reported evaluation count is then cumulative.
    """
    config = config or NesConfig()
    state = SearchState(grid, config, cache)
    rng = state.rng
    n_cells, n_live = grid.size, config.num_samples

    flat = rng.choice(n_cells, size=n_live, replace=n_live > n_cells)
    for i in flat:
        cell = grid.unflatten(int(i))
        state.samples.append(
            ExperimentSample(cell, entropy_of(state, cell, objective)))

    lo, hi = _spread(state.samples)
    initial_max = hi
    while not _agree(lo, hi, config.convergence_tol):
        if state.iteration >= config.max_iterations:
            break
        worst, h_star = select_threshold(state)
        state.threshold = h_star
        state.threshold_history.append(h_star)
        survivors = [i for i, s in enumerate(state.samples)
                     if s.entropy > h_star]
        source = state.samples[survivors[rng.integers(len(survivors))]]
        trial = explore(source, h_star, config, state, objective)
        state.trace.append(TraceRow(state.iteration, h_star,
                                    state.samples[worst].cell, trial.cell,
                                    state.evaluations))
        state.samples[worst] = trial
        state.iteration += 1
        lo, hi = _spread(state.samples)

    converged = _agree(lo, hi, config.convergence_tol)
    if not converged:
        logger.warning("NES stopped after %d iterations without converging",
                       state.iteration)
    optimal = sorted({s.cell for s in state.samples
                      if _agree(s.entropy, hi, config.convergence_tol)})
    metrics = RunMetrics(n_cells, state.evaluations, state.iteration,
                         converged)
    return NesResult(optimal, hi, metrics, converged, initial_max,
                     state.threshold_history, state.trace,
                     list(state.samples), list(state.cache))
