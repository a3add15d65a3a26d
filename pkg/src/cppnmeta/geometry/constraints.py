"""Connectivity constraints on a labelled grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .field import PointCloud, SampledField


@dataclass(frozen=True)
class ConstraintReport:
    interior_components: int
    x_connected: bool
    y_connected: bool
    cv: float

    @property
    def feasible(self) -> bool:
        return self.cv == 0

    def breakdown(self) -> dict:
        return {
            "interior_components": self.interior_components,
            "x_connected": self.x_connected,
            "y_connected": self.y_connected,
            "cv": self.cv,
        }


def _components(mask: np.ndarray, offsets, periodic: bool) -> np.ndarray:
    """Component label per grid node (-1 for void) using neighbour ``offsets``."""
    shape = mask.shape
    ids = np.arange(mask.size).reshape(shape)
    rows, cols = [], []
    for di, dj in offsets:
        if periodic:
            shifted_mask = np.roll(mask, (-di, -dj), axis=(0, 1))
            shifted_ids = np.roll(ids, (-di, -dj), axis=(0, 1))
            ok = mask & shifted_mask
            rows.append(ids[ok])
            cols.append(shifted_ids[ok])
        else:
            a, b = shape
            i0, i1 = max(0, -di), min(a, a - di)
            j0, j1 = max(0, -dj), min(b, b - dj)
            src = (slice(i0, i1), slice(j0, j1))
            dst = (slice(i0 + di, i1 + di), slice(j0 + dj, j1 + dj))
            ok = mask[src] & mask[dst]
            rows.append(ids[src][ok])
            cols.append(ids[dst][ok])
    r, c = np.concatenate(rows), np.concatenate(cols)
    graph = coo_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(mask.size, mask.size))
    _, comp = connected_components(graph, directed=False)
    comp = comp.reshape(shape)
    return np.where(mask, comp, -1)


def check_constraints(sampled: SampledField, cloud: PointCloud) -> ConstraintReport:
    """Count interior components and test periodic spanning.

    Interior components are counted on the closed grid of one cell.
    Spanning is tested on a doubled (2 x 2) periodic tiling: a component
    links a cell to its x-translate iff node ``(i, j)`` and
    ``(i + m, j)`` share a component there.
    """
    labels = sampled.labels
    mat = labels == 1
    if not np.any(mat):
        return ConstraintReport(0, False, False, float(labels.size))
    offsets = cloud.neighbors

    comp = _components(mat, offsets, periodic=False)
    interior = len(np.unique(comp[mat]))

    m = cloud.m
    torus = np.tile(mat[:-1, :-1], (2, 2))
    tcomp = _components(torus, offsets, periodic=True)
    base = tcomp[:m, :m]
    here = mat[:-1, :-1]
    x_conn = bool(np.any(here & (base == tcomp[m:, :m])))
    y_conn = bool(np.any(here & (base == tcomp[:m, m:])))
    cv = max(0, interior - 1) + (not x_conn) + (not y_conn)
    return ConstraintReport(interior, x_conn, y_conn, float(cv))
