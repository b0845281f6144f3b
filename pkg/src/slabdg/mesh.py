"""Uniform 1-D meshes with nested dyadic refinement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Mesh1D", "build_mesh", "refine", "mesh_at_level"]


@dataclass(frozen=True)
class Mesh1D:
    a: float
    b: float
    base_cells: int
    level: int = 0

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"domain must satisfy a < b, got [{self.a}, {self.b}]")
        if int(self.base_cells) != self.base_cells or self.base_cells < 1:
            raise ValueError(f"base_cells must be a positive integer, got {self.base_cells}")
        if int(self.level) != self.level or self.level < 0:
            raise ValueError(f"level must be a nonnegative integer, got {self.level}")
        object.__setattr__(self, "base_cells", int(self.base_cells))
        object.__setattr__(self, "level", int(self.level))
        edges = np.linspace(self.a, self.b, self.ncells + 1)
        edges.flags.writeable = False
        object.__setattr__(self, "_edges", edges)

    @property
    def ncells(self) -> int:
        return self.base_cells * 2**self.level

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.ncells

    @property
    def cell_edges(self) -> np.ndarray:
        return self._edges

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self._edges[:-1] + self._edges[1:])

    @property
    def length(self) -> float:
        return self.b - self.a

    def map_points(self, xi: np.ndarray) -> np.ndarray:
        """Physical coordinates of reference points ``xi`` in every cell, shape (ncells, len(xi))."""
        return self.centers[:, None] + 0.5 * self.h * np.asarray(xi)[None, :]

    def is_refinement_of(self, coarse: "Mesh1D") -> bool:
        return (
            self.a == coarse.a
            and self.b == coarse.b
            and self.base_cells == coarse.base_cells
            and self.level >= coarse.level
        )


def build_mesh(a: float, b: float, base_cells: int) -> Mesh1D:
    """Level-0 uniform mesh of ``base_cells`` cells on [a, b]."""
    return Mesh1D(float(a), float(b), base_cells, 0)


def refine(mesh: Mesh1D) -> Mesh1D:
    """Split every cell into two equal halves."""
    return Mesh1D(mesh.a, mesh.b, mesh.base_cells, mesh.level + 1)


def mesh_at_level(mesh: Mesh1D, level: int) -> Mesh1D:
    return Mesh1D(mesh.a, mesh.b, mesh.base_cells, int(level))
