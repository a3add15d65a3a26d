"""Angle-penalized distance and reference-vector guided survivor selection."""

from __future__ import annotations

import numpy as np

from .vectors import ReferenceVectorSet


def translate_objectives(fitness) -> tuple[np.ndarray, np.ndarray]:
    """Shift by the ideal point so every objective's minimum is 0."""
    f = np.asarray(fitness, float)
    if f.ndim != 2 or len(f) == 0:
        raise ValueError("need a non-empty (n, M) fitness array")
    z = f.min(axis=0)
    return f - z, z


def apd(f, v, gamma: float, t: float, t_max: float, alpha: float, m: int) -> float:
    f = np.asarray(f, float)
    v = np.asarray(v, float)
    norm = float(np.linalg.norm(f))
    if norm == 0.0:
        return 0.0
    phi = float(np.arccos(np.clip(f @ v / norm, -1.0, 1.0)))
    ratio = t / t_max if t_max > 0 else 1.0
    return norm * (1.0 + m * ratio**alpha * phi / gamma)


def assign(translated: np.ndarray, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vector index with the largest cosine for each row (lowest index on ties) and that cosine."""
    norms = np.linalg.norm(translated, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    cos = (translated @ vectors.T) / safe[:, None]
    cos[norms == 0] = 0.0
    idx = np.argmax(cos, axis=1)
    return idx, cos[np.arange(len(cos)), idx]


def select(t: int, t_max: int, fitness, cv, vectors: ReferenceVectorSet,
           alpha: float = 2.0) -> np.ndarray:
    """Indices of the survivors, one per non-empty reference vector, in vector order.

    Within a sub-population, any feasible member beats every infeasible one;
    feasible members compete on APD, all-infeasible groups on the violation.
    """
    fitness = np.asarray(fitness, float)
    cv = np.asarray(cv, float)
    if len(fitness) == 0:
        raise ValueError("cannot select from an empty population")
    translated, _ = translate_objectives(fitness)
    idx, cos = assign(translated, vectors.current)
    norms = np.linalg.norm(translated, axis=1)
    phi = np.where(norms > 0, np.arccos(np.clip(cos, -1.0, 1.0)), 0.0)
    m = fitness.shape[1]
    ratio = t / t_max if t_max > 0 else 1.0
    d = norms * (1.0 + m * ratio**alpha * phi / vectors.gamma[idx])

    chosen = []
    for k in range(vectors.count):
        members = np.nonzero(idx == k)[0]
        if len(members) == 0:
            continue
        feasible = members[cv[members] == 0]
        if len(feasible):
            chosen.append(int(feasible[np.argmin(d[feasible])]))
        else:
            chosen.append(int(members[np.argmin(cv[members])]))
    return np.array(chosen, dtype=int)
