"""Replicated NES runs on random landscapes: success rate and mean CE per N.

Every replicate gets its own landscape (shared across the N values, so the
comparison between sample sizes is paired).  A replicate succeeds when the
run converged and its best entropy equals the brute-force maximum of that
landscape within ``tol``; NES never judges itself.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .grid import GridSpace
from .landscape import TIE_TOL, brute_force_map, random_landscape
from .metrics import trend_test
from .search import NesConfig, run_nes

__all__ = ["GaussianFamily", "SweepRecord", "SweepSummary", "benchmark_sweep"]


@dataclass(frozen=True)
class GaussianFamily:
    """Picklable landscape generator: ``family(seed)`` -> random mixture."""

    num_components: int = 7
    grid: GridSpace = GridSpace.square()

    def __call__(self, seed: int):
        return random_landscape(self.num_components, self.grid, seed)


@dataclass(frozen=True)
class SweepRecord:
    N: int
    mean_CE: float
    success_probability: float
    replicates: int

    def __post_init__(self):
        if not 0.0 <= self.success_probability <= 1.0:
            raise ValueError("success_probability must lie in [0, 1]")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")


@dataclass
class SweepSummary:
    records: list[SweepRecord]

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.records]

    def trends(self, alpha: float = 0.05) -> dict:
        """One-sided Spearman tests: success rises and CE falls with N."""
        n = self.column("N")
        ok_s, rho_s, p_s = trend_test(n, self.column("success_probability"),
                                      increasing=True, alpha=alpha)
        ok_c, rho_c, p_c = trend_test(n, self.column("mean_CE"),
                                      increasing=False, alpha=alpha)
        return {"success_increasing": ok_s, "success_rho": rho_s,
                "success_p": p_s, "ce_decreasing": ok_c, "ce_rho": rho_c,
                "ce_p": p_c}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["N", "mean_CE", "success_probability", "replicates"])
            for r in self.records:
                w.writerow([r.N, repr(r.mean_CE), repr(r.success_probability),
                            r.replicates])

    def to_json(self) -> str:
        return json.dumps([asdict(r) for r in self.records], indent=2)

    @classmethod
    def read_csv(cls, path) -> "SweepSummary":
        with open(path, newline="") as fh:
            return cls([SweepRecord(int(r["N"]), float(r["mean_CE"]),
                                    float(r["success_probability"]),
                                    int(r["replicates"]))
                        for r in csv.DictReader(fh)])


def _replicate(family, seed: int, n_values, config: NesConfig, tol: float):
    landscape = family(seed)
    grid = landscape.grid
    best = brute_force_map(landscape, grid).max_value
    out = []
    for n in n_values:
        nes_seed = int(np.random.SeedSequence([seed, n]).generate_state(1)[0])
        res = run_nes(landscape, grid,
                      replace(config, num_samples=n, seed=nes_seed))
        ok = res.converged and abs(res.h_max - best) <= tol
        out.append((ok, res.metrics.compression_efficiency))
    return out


def benchmark_sweep(landscape_family: Callable[[int], object],
                    n_values: Sequence[int], replicates: int,
                    config: NesConfig | None = None, seed: int = 0,
                    tol: float = TIE_TOL, jobs: int = 1) -> SweepSummary:
    """Success probability and mean compression efficiency for each N.

    ``landscape_family(seed)`` must return an object callable on cells with
    a ``grid`` attribute.  Replicate ``k`` uses landscape seed ``seed + k``.
    """
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    n_values = [int(n) for n in n_values]
    if any(n < 2 for n in n_values):
        raise ValueError("every N must be at least 2")
    config = config or NesConfig()
    seeds = [seed + k for k in range(replicates)]
    args = [(landscape_family, s, n_values, config, tol) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_replicate, *zip(*args)))
    else:
        results = [_replicate(*a) for a in args]

    records = []
    for j, n in enumerate(n_values):
        oks = [r[j][0] for r in results]
        ces = [r[j][1] for r in results]
        records.append(SweepRecord(n, float(np.mean(ces)),
                                   float(np.mean(oks)), replicates))
    return SweepSummary(records)
