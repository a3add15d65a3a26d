"""Plane-group symmetries acting on a periodic sampling grid.

Every group here is symmorphic, so its action on a periodic ``m x m`` grid
is the action of its point group about the cell origin, taken modulo the
lattice. Point operations are stored as integer matrices in lattice-index
coordinates, which keeps orbit computations exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

SQRT3 = np.sqrt(3.0)

SQUARE_CELL = np.eye(2)
# columns are the lattice vectors a1 = (1, 0) and a2 = (1/2, sqrt(3)/2)
RHOMBIC_CELL = np.array([[1.0, 0.5], [0.0, SQRT3 / 2.0]])


def _square_ops(kind: str) -> list[np.ndarray]:
    rot = np.array([[0, -1], [1, 0]])
    mir = np.array([[1, 0], [0, -1]])
    rots = [np.linalg.matrix_power(rot, k) for k in range(4)]
    if kind == "p1":
        return [np.eye(2, dtype=int)]
    if kind == "p4":
        return rots
    if kind == "p4mm":
        return rots + [r @ mir for r in rots]
    if kind == "p2mm":
        return [np.eye(2, dtype=int), -np.eye(2, dtype=int), mir, -mir]
    raise KeyError(kind)


def _p31m_ops() -> list[np.ndarray]:
    # rotation by 120 deg: a1 -> a2 - a1, a2 -> -a1 ; mirror along a1: a2 -> a1 - a2
    rot = np.array([[-1, -1], [1, 0]])
    mir = np.array([[1, 1], [0, -1]])
    rots = [np.linalg.matrix_power(rot, k) for k in range(3)]
    return rots + [mir @ r for r in rots]


# Fundamental patch membership in fractional cell coordinates (s, t) in [0, 1).
_PATCHES: dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "p1": lambda s, t: np.ones_like(s, dtype=bool),
    "p2mm": lambda s, t: (s <= 0.5) & (t <= 0.5),
    "p4": lambda s, t: (s <= 0.5) & (t <= 0.5),
    "p4mm": lambda s, t: (s <= 0.5) & (t <= s),
    # kite O, a1/2, (a1 + a2)/3, a2/2 bounded by the 0 and 60 degree mirrors
    "p31m": lambda s, t: (2 * s + t <= 1) & (s + 2 * t <= 1),
}

ELASTIC_CLASS = {
    "p31m": "isotropic",
    "p4mm": "tetragonal",
    "p4": "tetragonal",
    "p2mm": "orthotropic",
    "p1": "anisotropic",
}


@dataclass(frozen=True)
class SymmetryGroup:
    tag: str
    cell: np.ndarray
    orbit_maps: tuple[np.ndarray, ...]

    @property
    def order(self) -> int:
        return len(self.orbit_maps)

    @property
    def cell_area(self) -> float:
        return float(abs(np.linalg.det(self.cell)))

    @property
    def rhombic(self) -> bool:
        return self.tag == "p31m"

    def in_patch(self, s, t):
        return _PATCHES[self.tag](np.asarray(s), np.asarray(t))

    def orbit(self, i: int, j: int, m: int) -> set[tuple[int, int]]:
        """Grid indices (mod m) equivalent to ``(i, j)`` under the group."""
        v = np.array([i, j])
        return {tuple(int(x) for x in (op @ v) % m) for op in self.orbit_maps}

    def representatives(self, m: int) -> np.ndarray:
        """For each index of the periodic ``m x m`` grid, the index of its
        orbit representative inside the fundamental patch.

        Returns an ``(m, m, 2)`` integer array. When several orbit members
        sit on the patch boundary the lexicographically largest index wins,
        so every member of an orbit gets the same representative.
        """
        ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        idx = np.stack([ii, jj], axis=-1)
        images = np.stack([(idx @ op.T) % m for op in self.orbit_maps], axis=0)
        inside = self.in_patch(images[..., 0] / m, images[..., 1] / m)
        # rank: inside first, then lexicographic index
        score = inside * (m * m) + images[..., 0] * m + images[..., 1]
        best = np.argmax(score, axis=0)
        rep = np.take_along_axis(images, best[None, ..., None], axis=0)[0]
        return rep


def get_group(tag: str) -> SymmetryGroup:
    tag = tag.lower()
    if tag == "p31m":
        return SymmetryGroup(tag, RHOMBIC_CELL, tuple(_p31m_ops()))
    if tag in ("p1", "p2mm", "p4", "p4mm"):
        return SymmetryGroup(tag, SQUARE_CELL, tuple(_square_ops(tag)))
    raise KeyError(f"unknown plane group {tag!r}; expected one of {sorted(_PATCHES)}")


GROUP_TAGS = tuple(sorted(_PATCHES))
