"""Synthetic entropy landscapes built from mixtures of 2-D Gaussians.

Each landscape assigns a nonnegative value to every cell of a 2-D grid::

    H(x, y) = sum_i K_i exp(-0.5 * (A_i dx^2 + B_i dy^2 + 2 C_i dx dy))

with ``dx = x - x_i`` and ``dy = y - y_i``.  They stand in for the entropy
field over candidate experiments when benchmarking the search.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .grid import Cell, GridSpace

__all__ = [
    "GaussianComponent",
    "MixtureLandscape",
    "BruteForceMap",
    "random_landscape",
    "brute_force_map",
    "TIE_TOL",
]

TIE_TOL = 1e-9


@dataclass(frozen=True)
class GaussianComponent:
    """One peak: amplitude, centre, and inverse-covariance entries."""

    amplitude: float
    x: float
    y: float
    a: float
    b: float
    c: float = 0.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")
        if not (self.a > 0 and self.b > 0 and self.a * self.b - self.c ** 2 > 0):
            raise ValueError("quadratic form must be positive definite")

    def __call__(self, x, y):
        dx = np.asarray(x) - self.x
        dy = np.asarray(y) - self.y
        q = self.a * dx * dx + self.b * dy * dy + 2.0 * self.c * dx * dy
        return self.amplitude * np.exp(-0.5 * q)

    def to_dict(self) -> dict:
        return {"K": self.amplitude, "x": self.x, "y": self.y,
                "A": self.a, "B": self.b, "C": self.c}

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianComponent":
        return cls(float(d["K"]), float(d["x"]), float(d["y"]),
                   float(d["A"]), float(d["B"]), float(d["C"]))


class MixtureLandscape:
    """Sum of Gaussian components sampled on a 2-D grid.

    Instances are callable on a cell index, so they can be passed directly
    as the objective of :func:`nestedentropy.search.run_nes`.
    """

    def __init__(self, components, grid: GridSpace):
        components = tuple(components)
        if not components:
            raise ValueError("a landscape needs at least one component")
        if grid.dims != 2:
            raise ValueError("mixture landscapes are two-dimensional")
        (x0, x1), (y0, y1) = grid.extents
        for comp in components:
            if not (x0 <= comp.x <= x1 and y0 <= comp.y <= y1):
                raise ValueError(f"component centre ({comp.x}, {comp.y}) "
                                 "outside grid extents")
        self.components = components
        self.grid = grid
        self._k = np.array([g.amplitude for g in components])
        self._xy = np.array([[g.x, g.y] for g in components])
        self._abc = np.array([[g.a, g.b, g.c] for g in components])

    def __eq__(self, other):
        if not isinstance(other, MixtureLandscape):
            return NotImplemented
        return self.components == other.components and self.grid == other.grid

    def __repr__(self):
        return (f"MixtureLandscape({len(self.components)} components, "
                f"grid={self.grid.shape})")

    def at(self, x: float, y: float) -> float:
        """Value at arbitrary real coordinates."""
        dx = x - self._xy[:, 0]
        dy = y - self._xy[:, 1]
        a, b, c = self._abc.T
        q = a * dx * dx + b * dy * dy + 2.0 * c * dx * dy
        return float(np.dot(self._k, np.exp(-0.5 * q)))

    def evaluate(self, cell) -> float:
        x, y = self.grid.center(cell)
        return self.at(x, y)

    __call__ = evaluate

    def values(self) -> np.ndarray:
        """Dense array of cell values (for plotting, not for counting)."""
        xs, ys = self.grid.axes()
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return sum(g(X, Y) for g in self.components)

    @property
    def upper_bound(self) -> float:
        return float(self._k.sum())

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(),
                "components": [g.to_dict() for g in self.components]}

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureLandscape":
        grid = GridSpace.from_dict(d["grid"])
        return cls([GaussianComponent.from_dict(c) for c in d["components"]],
                   grid)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "MixtureLandscape":
        return cls.from_dict(json.loads(Path(path).read_text()))


def random_landscape(num_components: int, grid: GridSpace | None = None,
                     rng_seed: int = 0) -> MixtureLandscape:
    """Draw a reproducible random mixture.

    Amplitudes are Uniform(0.5, 2); centres are uniform over the central
    90% of each extent; the quadratic form is ``A = a^2, B = b^2,
    C = rho*a*b`` with ``a, b ~ Uniform(0.5, 3)`` and
    ``rho ~ Uniform(-0.9, 0.9)``, which is positive definite by construction.
    """
    if num_components < 1:
        raise ValueError("num_components must be at least 1")
    if grid is None:
        grid = GridSpace.square()
    rng = np.random.default_rng(rng_seed)
    (x0, x1), (y0, y1) = grid.extents
    mx, my = 0.05 * (x1 - x0), 0.05 * (y1 - y0)
    comps = []
    for _ in range(num_components):
        k = rng.uniform(0.5, 2.0)
        x = rng.uniform(x0 + mx, x1 - mx)
        y = rng.uniform(y0 + my, y1 - my)
        a, b = rng.uniform(0.5, 3.0, size=2)
        rho = rng.uniform(-0.9, 0.9)
        comps.append(GaussianComponent(float(k), float(x), float(y),
                                       float(a * a), float(b * b),
                                       float(rho * a * b)))
    return MixtureLandscape(comps, grid)


@dataclass
class BruteForceMap:
    """Exhaustive evaluation of an objective over a grid."""

    values: np.ndarray
    argmax_cells: list[Cell]
    max_value: float
    evaluations: int


def brute_force_map(objective: Callable[[Cell], float], grid: GridSpace,
                    tie_tol: float = TIE_TOL) -> BruteForceMap:
    """Evaluate ``objective`` once on every cell of ``grid``.

    The argmax set holds every cell within ``tie_tol`` (absolute) of the
    maximum, in lexicographic order.
    """
    values = np.empty(grid.shape)
    count = 0
    for cell in grid.cells():
        values[cell] = objective(cell)
        count += 1
    best = float(values.max())
    if math.isinf(best):
        hit = values == best
    else:
        hit = values >= best - tie_tol
    argmax = [tuple(int(i) for i in idx) for idx in np.argwhere(hit)]
    return BruteForceMap(values, argmax, best, count)
