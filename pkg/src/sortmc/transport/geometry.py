"""Concentric spherical shells, or a single infinite homogeneous cell."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Boundary(str, enum.Enum):
    REFLECTIVE = "reflective"
    VACUUM = "vacuum"


@dataclass(frozen=True)
class Geometry:
    """Cell ``c`` is the shell between ``radii[c-1]`` and ``radii[c]`` (cm).

    An empty ``radii`` tuple means one cell of infinite extent.
    ``cell_material[c]`` indexes the material list passed to the solver.
    """

    radii: tuple[float, ...]
    cell_material: tuple[int, ...]
    boundary: Boundary = Boundary.REFLECTIVE

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "cell_material", tuple(int(m) for m in self.cell_material))
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if any(r <= 0 for r in radii):
            raise ValueError("radii must be positive")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("radii must be strictly increasing")
        if len(self.cell_material) != self.n_cells:
            raise ValueError(f"need {self.n_cells} cell materials, got {len(self.cell_material)}")

    @classmethod
    def infinite(cls, material: int = 0) -> "Geometry":
        return cls((), (material,), Boundary.REFLECTIVE)

    @classmethod
    def pebble(cls, fuel_radius: float = 2.5, pebble_radius: float = 3.0,
               fuel: int = 0, matrix: int = 1,
               boundary: Boundary = Boundary.REFLECTIVE) -> "Geometry":
        """Homogenized fuel zone inside a graphite shell."""
        return cls((fuel_radius, pebble_radius), (fuel, matrix), boundary)

    @property
    def is_infinite(self) -> bool:
        return not self.radii

    @property
    def n_cells(self) -> int:
        return max(1, len(self.radii))

    @property
    def outer_radius(self) -> float:
        return self.radii[-1] if self.radii else np.inf

    def locate(self, pos) -> np.ndarray:
        """Cell index per position; -1 outside the outermost sphere."""
        pos = np.atleast_2d(np.asarray(pos, dtype=float))
        if self.is_infinite:
            return np.zeros(pos.shape[0], dtype=np.int64)
        r = np.sqrt(np.einsum("ij,ij->i", pos, pos))
        cell = np.searchsorted(np.asarray(self.radii), r, side="left").astype(np.int64)
        cell[cell >= len(self.radii)] = -1
        return cell

    def consistent(self, pos, cell, rtol: float = 1e-9) -> np.ndarray:
        """Whether each position lies in its cell, surfaces included within ``rtol``.

        A particle parked on a surface after a crossing belongs to the cell it
        is entering, which ``locate`` alone cannot tell.
        """
        pos = np.atleast_2d(np.asarray(pos, dtype=float))
        cell = np.asarray(cell, dtype=np.int64)
        if self.is_infinite:
            return cell == 0
        radii = np.asarray(self.radii)
        r = np.sqrt(np.einsum("ij,ij->i", pos, pos))
        ok = (cell >= 0) & (cell < radii.shape[0])
        c = np.clip(cell, 0, radii.shape[0] - 1)
        outer = radii[c]
        inner = np.where(c > 0, radii[np.maximum(c - 1, 0)], 0.0)
        return ok & (r <= outer * (1 + rtol)) & (r >= inner * (1 - rtol))

    def radii_array(self) -> np.ndarray:
        return np.asarray(self.radii if self.radii else (np.inf,), dtype=np.float64)
