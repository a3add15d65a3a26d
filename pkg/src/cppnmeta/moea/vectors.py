"""Reference vectors: simplex-lattice initialization, neighbour angles, adaptation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

SCALE_EPS = 1e-12


def simplex_lattice(m: int, h: int) -> np.ndarray:
    """All points of ``{k / h : k in N^m, sum k = h}``, first component descending."""
    if m < 2 or h < 1:
        raise ValueError("need m >= 2 and h >= 1")
    pts = []
    # stars and bars: choose m - 1 bar positions among h + m - 1 slots
    for bars in itertools.combinations(range(h + m - 1), m - 1):
        edges = (-1,) + bars + (h + m - 1,)
        pts.append([edges[k + 1] - edges[k] - 1 for k in range(m)])
    pts = np.array(pts, float) / h
    order = np.lexsort(tuple(-pts[:, k] for k in reversed(range(m))))
    return pts[order]


def _normalize_rows(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def neighbour_angles(v: np.ndarray) -> np.ndarray:
    """Smallest angle from each vector to any other one."""
    if len(v) < 2:
        return np.full(len(v), np.pi / 2)
    cos = np.clip(v @ v.T, -1.0, 1.0)
    np.fill_diagonal(cos, -np.inf)
    return np.arccos(np.clip(cos.max(axis=1), -1.0, 1.0))


@dataclass(frozen=True)
class ReferenceVectorSet:
    initial: np.ndarray
    current: np.ndarray
    gamma: np.ndarray

    @property
    def count(self) -> int:
        return len(self.current)

    @classmethod
    def from_initial(cls, initial: np.ndarray) -> "ReferenceVectorSet":
        initial = np.asarray(initial, float)
        return cls(initial, initial.copy(), neighbour_angles(initial))


def init_reference_vectors(m: int, h: int) -> ReferenceVectorSet:
    return ReferenceVectorSet.from_initial(_normalize_rows(simplex_lattice(m, h)))


def divisions_for(m: int, n_vectors: int) -> int:
    """Largest lattice division ``h`` with at most ``n_vectors`` vectors (at least 1)."""
    h = 1
    while comb(h + m, m - 1) <= n_vectors:
        h += 1
    return h


def adapt_reference_vectors(vectors: ReferenceVectorSet, fitness: np.ndarray) -> ReferenceVectorSet:
    """Rescale the initial vectors by the objective ranges of ``fitness``."""
    fitness = np.asarray(fitness, float)
    if len(fitness) == 0:
        return vectors
    scale = fitness.max(axis=0) - fitness.min(axis=0)
    if np.any(scale <= SCALE_EPS):
        return vectors
    current = _normalize_rows(vectors.initial * scale)
    return ReferenceVectorSet(vectors.initial, current, neighbour_angles(current))


def adaptation_due(generation: int, max_generations: int, fraction: float) -> bool:
    interval = max(1, int(np.ceil(fraction * max_generations)))
    return generation % interval == 0
