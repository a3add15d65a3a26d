"""Dominance filtering and the two-objective hypervolume."""

from __future__ import annotations

import numpy as np


def dominates(a, b) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    return bool(np.all(a <= b) and np.any(a < b))


def non_dominated_mask(points) -> np.ndarray:
    """True for every row not dominated by another row (minimization)."""
    p = np.asarray(points, float)
    n = len(p)
    if n == 0:
        return np.zeros(0, dtype=bool)
    keep = np.ones(n, dtype=bool)
    # sweep in lexicographic order; a point can only be dominated by earlier ones
    order = np.lexsort(tuple(p[:, k] for k in reversed(range(p.shape[1]))))
    front: list[int] = []
    for i in order:
        row = p[i]
        dominated = False
        for j in front:
            q = p[j]
            if np.all(q <= row) and np.any(q < row):
                dominated = True
                break
        if dominated:
            keep[i] = False
        else:
            front.append(i)
    return keep


def hypervolume_2d(points, ref) -> float:
    """Area dominated by ``points`` and bounded by ``ref`` (minimization)."""
    p = np.asarray(points, float).reshape(-1, 2)
    ref = np.asarray(ref, float)
    p = p[np.all(p < ref, axis=1)]
    if len(p) == 0:
        return 0.0
    p = p[np.lexsort((p[:, 1], p[:, 0]))]
    area, best_y = 0.0, ref[1]
    for (x, y), nxt in zip(p, np.append(p[1:, 0], ref[0])):
        best_y = min(best_y, y)
        area += (nxt - x) * (ref[1] - best_y)
    return float(area)
