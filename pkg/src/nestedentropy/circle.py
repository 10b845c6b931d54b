"""Simulated measurement world: a bright circle hidden in a dark field.

A point sensor reads a high intensity inside the circle and a low one
outside, optionally with Gaussian noise.  Candidate measurement locations
are the cells of a 2-D grid.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid import Cell, GridSpace

__all__ = [
    "CircleModel",
    "FieldSpec",
    "Measurement",
    "forward",
    "measure",
    "write_measurements",
    "read_measurements",
    "save_world",
    "load_world",
]


@dataclass(frozen=True)
class CircleModel:
    cx: float
    cy: float
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("radius must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.r])

    def to_dict(self) -> dict:
        return {"cx": self.cx, "cy": self.cy, "r": self.r}


@dataclass(frozen=True)
class FieldSpec:
    """Field geometry, candidate grid, and sensor response.

    Defaults: 61 x 61 cells over [-3, 3]^2, inside 1.0, outside 0.1,
    noise 0.05 (the two levels sit ~18 sigma apart).
    """

    grid: GridSpace = dc_field(default_factory=GridSpace.square)
    intensity_inside: float = 1.0
    intensity_outside: float = 0.1
    noise_sigma: float = 0.05

    def __post_init__(self):
        if self.grid.dims != 2:
            raise ValueError("the field is two-dimensional")
        if not self.intensity_inside > self.intensity_outside:
            raise ValueError("intensity_inside must exceed intensity_outside")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")

    @property
    def extents(self):
        return self.grid.extents

    def check_model(self, model: CircleModel) -> None:
        (x0, x1), (y0, y1) = self.extents
        if not (x0 <= model.cx <= x1 and y0 <= model.cy <= y1):
            raise ValueError("circle centre outside the field")

    def to_dict(self) -> dict:
        return {"extents": [list(e) for e in self.grid.extents],
                "cells_per_dim": list(self.grid.cells_per_dim),
                "intensity_inside": self.intensity_inside,
                "intensity_outside": self.intensity_outside,
                "noise_sigma": self.noise_sigma}

    @classmethod
    def from_dict(cls, d: dict) -> "FieldSpec":
        grid = GridSpace(tuple(tuple(e) for e in d["extents"]),
                         tuple(d["cells_per_dim"]))
        return cls(grid, float(d.get("intensity_inside", 1.0)),
                   float(d.get("intensity_outside", 0.1)),
                   float(d.get("noise_sigma", 0.05)))


@dataclass(frozen=True)
class Measurement:
    location: Cell
    intensity: float


def forward(model: CircleModel, location: Sequence[int],
            field: FieldSpec) -> float:
    """Noiseless reading at the centre of ``location``.

    The disk is closed: a point exactly on the rim reads as inside.
    """
    x, y = field.grid.center(location)
    inside = (x - model.cx) ** 2 + (y - model.cy) ** 2 <= model.r ** 2
    return field.intensity_inside if inside else field.intensity_outside


def measure(truth: CircleModel, location: Sequence[int], field: FieldSpec,
            rng: np.random.Generator) -> Measurement:
    """Simulated sensor reading with Gaussian noise of ``field.noise_sigma``."""
    value = forward(truth, location, field)
    if field.noise_sigma > 0:
        value += field.noise_sigma * rng.standard_normal()
    return Measurement(field.grid.check(location), float(value))


def write_measurements(path, log: Sequence[Measurement], append: bool = False,
                       start: int = 0) -> None:
    """CSV rows ``step, cell_x, cell_y, intensity``."""
    path = Path(path)
    fresh = not append or not path.exists()
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if fresh:
            w.writerow(["step", "cell_x", "cell_y", "intensity"])
        for k, m in enumerate(log, start=start):
            w.writerow([k, m.location[0], m.location[1], repr(m.intensity)])


def read_measurements(path) -> list[Measurement]:
    with open(path, newline="") as fh:
        return [Measurement((int(row["cell_x"]), int(row["cell_y"])),
                            float(row["intensity"]))
                for row in csv.DictReader(fh)]


def save_world(path, truth: CircleModel, field: FieldSpec) -> None:
    doc = {**truth.to_dict(), **field.to_dict()}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_world(path) -> tuple[CircleModel, FieldSpec]:
    doc = json.loads(Path(path).read_text())
    field = FieldSpec.from_dict(doc)
    truth = CircleModel(float(doc["cx"]), float(doc["cy"]), float(doc["r"]))
    field.check_model(truth)
    return truth, field

