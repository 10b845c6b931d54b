"""Discretized experiment spaces.

A :class:`GridSpace` divides a box in ``dims`` real dimensions into cells.
Cells are addressed by tuples of integers and evaluated at their centres.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

Cell = tuple[int, ...]

__all__ = ["Cell", "GridSpace"]


@dataclass(frozen=True)
class GridSpace:
    """Regular grid over a closed box.

    Parameters
    ----------
    extents : sequence of (lo, hi)
        Closed interval for each dimension.
    cells_per_dim : sequence of int
        Number of cells along each dimension (at least 2).
    """

    extents: tuple[tuple[float, float], ...]
    cells_per_dim: tuple[int, ...]

    def __post_init__(self):
        extents = tuple((float(lo), float(hi)) for lo, hi in self.extents)
        cells = tuple(int(c) for c in self.cells_per_dim)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "cells_per_dim", cells)
        if not cells:
            raise ValueError("grid needs at least one dimension")
        if len(extents) != len(cells):
            raise ValueError("extents and cells_per_dim differ in length")
        for (lo, hi), c in zip(extents, cells):
            if not hi > lo:
                raise ValueError(f"empty extent [{lo}, {hi}]")
            if c < 2:
                raise ValueError("every dimension needs at least 2 cells")

    @classmethod
    def square(cls, cells: int = 61, lo: float = -3.0, hi: float = 3.0,
               dims: int = 2) -> "GridSpace":
        """Same interval and resolution along every axis."""
        return cls(((lo, hi),) * dims, (cells,) * dims)

    @property
    def dims(self) -> int:
        return len(self.cells_per_dim)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells_per_dim

    @property
    def size(self) -> int:
        """Total number of candidate cells."""
        return int(np.prod(self.cells_per_dim))

    @property
    def spans(self) -> np.ndarray:
        """Largest useful index offset per dimension."""
        return np.asarray(self.cells_per_dim, dtype=int) - 1

    def widths(self) -> np.ndarray:
        return np.array([(hi - lo) / c for (lo, hi), c
                         in zip(self.extents, self.cells_per_dim)])

    def contains(self, cell: Sequence[int]) -> bool:
        if len(cell) != self.dims:
            return False
        return all(0 <= int(i) < c for i, c in zip(cell, self.cells_per_dim))

    def check(self, cell: Sequence[int]) -> Cell:
        """Return ``cell`` as a tuple, raising IndexError when invalid."""
        if not self.contains(cell):
            raise IndexError(f"cell {tuple(cell)} outside grid {self.shape}")
        return tuple(int(i) for i in cell)

    def center(self, cell: Sequence[int]) -> np.ndarray:
        """Real coordinates of the centre of ``cell``."""
        cell = self.check(cell)
        return np.array([lo + (i + 0.5) * (hi - lo) / c for i, (lo, hi), c
                         in zip(cell, self.extents, self.cells_per_dim)])

    def locate(self, coords: Sequence[float]) -> Cell:
        """Cell containing ``coords``; the upper boundary belongs to the last cell."""
        if len(coords) != self.dims:
            raise ValueError("coordinate dimension mismatch")
        out = []
        for x, (lo, hi), c in zip(coords, self.extents, self.cells_per_dim):
            if not lo <= x <= hi:
                raise IndexError(f"coordinate {x} outside [{lo}, {hi}]")
            out.append(min(int(np.floor((x - lo) / (hi - lo) * c)), c - 1))
        return tuple(out)

    def axes(self) -> list[np.ndarray]:
        """Cell-centre coordinates along each axis."""
        return [lo + (np.arange(c) + 0.5) * (hi - lo) / c
                for (lo, hi), c in zip(self.extents, self.cells_per_dim)]

    def cells(self) -> Iterator[Cell]:
        """All cells in lexicographic (row-major) order."""
        return itertools.product(*(range(c) for c in self.cells_per_dim))

    def flat_index(self, cell: Sequence[int]) -> int:
        return int(np.ravel_multi_index(self.check(cell), self.shape))

    def unflatten(self, index: int) -> Cell:
        if not 0 <= index < self.size:
            raise IndexError(f"flat index {index} outside grid of {self.size}")
        return tuple(int(i) for i in np.unravel_index(index, self.shape))

    def to_dict(self) -> dict:
        return {"extents": [list(e) for e in self.extents],
                "cells_per_dim": list(self.cells_per_dim)}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpace":
        return cls(tuple(tuple(e) for e in d["extents"]),
                   tuple(d["cells_per_dim"]))
