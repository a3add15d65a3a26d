"""Two-phase reproduction: global exploration and niche-local exploitation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .selection import assign, translate_objectives
from .vectors import ReferenceVectorSet


def local_count(n: int, t: int, t_max: int) -> int:
    """Offspring bred inside niches; the rest are bred from the whole parent set."""
    if t_max <= 0:
        return n
    return min(n, (n * t) // t_max)


@dataclass(frozen=True)
class Niche:
    members: tuple[int, ...]  # parent indices
    vectors: tuple[int, ...]  # reference vector indices


def form_niches(fitness, vectors: ReferenceVectorSet, min_size: int = 2) -> list[Niche]:
    """Merge angularly adjacent reference vectors until each pool has ``min_size`` parents.

    Vectors are walked in lattice order, which is angular order for two
    objectives. A short trailing pool is folded into the previous niche.
    """
    fitness = np.asarray(fitness, float)
    translated, _ = translate_objectives(fitness)
    idx, _ = assign(translated, vectors.current)
    niches: list[Niche] = []
    pool: list[int] = []
    vecs: list[int] = []
    for k in range(vectors.count):
        members = np.nonzero(idx == k)[0].tolist()
        if not members:
            continue
        pool += members
        vecs.append(k)
        if len(pool) >= min_size:
            niches.append(Niche(tuple(pool), tuple(vecs)))
            pool, vecs = [], []
    if pool:
        if niches:
            last = niches.pop()
            niches.append(Niche(last.members + tuple(pool), last.vectors + tuple(vecs)))
        else:
            niches.append(Niche(tuple(pool), tuple(vecs)))
    return niches


def allocate(total: int, sizes) -> list[int]:
    """Split ``total`` proportionally to ``sizes``; remainders go to the largest pools."""
    sizes = np.asarray(sizes, int)
    if total <= 0 or len(sizes) == 0:
        return [0] * len(sizes)
    quota = (total * sizes) // sizes.sum()
    left = total - int(quota.sum())
    order = sorted(range(len(sizes)), key=lambda i: (-sizes[i], i))
    for i in order[:left]:
        quota[i] += 1
    return quota.tolist()


def plan_matings(t: int, t_max: int, parents_fitness, vectors: ReferenceVectorSet,
                 n_offspring: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    """Parent index tuples for every offspring: pairs, or a single index to clone."""
    n_parents = len(parents_fitness)
    if n_parents == 0:
        raise ValueError("no parents to reproduce from")
    n_local = local_count(n_offspring, t, t_max)
    plans: list[tuple[int, ...]] = []
    if n_local:
        niches = form_niches(parents_fitness, vectors)
        for niche, quota in zip(niches, allocate(n_local, [len(n.members) for n in niches])):
            pool = np.array(niche.members)
            for _ in range(quota):
                if len(pool) == 1:
                    plans.append((int(pool[0]),))
                else:
                    a, b = rng.choice(pool, size=2, replace=False)
                    plans.append((int(a), int(b)))
    for _ in range(n_offspring - n_local):
        if n_parents == 1:
            plans.append((0,))
        else:
            a, b = rng.choice(n_parents, size=2, replace=False)
            plans.append((int(a), int(b)))
    return plans


def reproduce(t: int, t_max: int, parents: list, parents_fitness, vectors: ReferenceVectorSet,
              n_offspring: int, rng: np.random.Generator,
              breed: Callable[[tuple, int], object]) -> list:
    """Create ``n_offspring`` children; ``breed(parent_tuple, child_index)`` makes one."""
    plans = plan_matings(t, t_max, parents_fitness, vectors, n_offspring, rng)
    return [breed(tuple(parents[i] for i in plan), k) for k, plan in enumerate(plans)]
