"""The generational loop: reproduce, evaluate, select, adapt."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from ..cppn import InnovationRegistry
from ..errors import ConfigError
from .indicators import non_dominated_mask
from .problems import Evaluation, Problem
from .reproduction import reproduce
from .selection import select
from .vectors import (
    ReferenceVectorSet,
    adapt_reference_vectors,
    adaptation_due,
    divisions_for,
    init_reference_vectors,
)

log = logging.getLogger(__name__)

# offspring streams are keyed (seed, generation, 1 + index); the mating plan uses index 0
_PLAN_STREAM = 0


@dataclass(frozen=True)
class RveaConfig:
    population_size: int = 500
    max_generations: int = 800
    alpha: float = 2.0
    adaptation_interval: float = 0.1
    n_reference_vectors: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ConfigError("population_size must be at least 2")
        if self.max_generations < 0:
            raise ConfigError("max_generations must be non-negative")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if not 0 < self.adaptation_interval <= 1:
            raise ConfigError("adaptation_interval must lie in (0, 1]")
        if self.n_reference_vectors is not None and self.n_reference_vectors < 2:
            raise ConfigError("n_reference_vectors must be at least 2")

    @property
    def vector_target(self) -> int:
        return self.n_reference_vectors or self.population_size


@dataclass
class Individual:
    id: int
    genome: object
    generation: int
    evaluation: Evaluation | None = None
    parents: tuple[int, ...] = ()

    @property
    def fitness(self):
        return None if self.evaluation is None else self.evaluation.fitness

    @property
    def cv(self) -> float:
        return self.evaluation.cv

    @property
    def feasible(self) -> bool:
        return self.evaluation is not None and self.evaluation.fitness is not None and self.cv == 0


@dataclass
class GenerationSummary:
    generation: int
    population: int
    evaluated: int
    feasible: int
    front_size: int
    best: list[float]
    mean_cv: float
    seconds: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RunResult:
    population: list[Individual]
    vectors: ReferenceVectorSet
    history: list[GenerationSummary] = field(default_factory=list)
    evaluations: int = 0


# ---------------------------------------------------------------- evaluation

_WORKER_PROBLEM: Problem | None = None


def _init_worker(problem: Problem):
    global _WORKER_PROBLEM
    _WORKER_PROBLEM = problem


def _evaluate_in_worker(genome) -> Evaluation:
    return _WORKER_PROBLEM.evaluate(genome)


class Evaluator:
    """Evaluates genomes in order, optionally across worker processes."""

    def __init__(self, problem: Problem, threads: int = 1):
        self.problem = problem
        self.threads = max(1, int(threads))
        self._pool = None
        if self.threads > 1:
            self._pool = ProcessPoolExecutor(self.threads, initializer=_init_worker, initargs=(problem,))

    def __call__(self, genomes: list) -> list[Evaluation]:
        if self._pool is None:
            return [self.problem.evaluate(g) for g in genomes]
        chunk = max(1, len(genomes) // (4 * self.threads))
        return list(self._pool.map(_evaluate_in_worker, genomes, chunksize=chunk))

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ---------------------------------------------------------------- loop


def _objective_matrix(pop: Iterable[Individual], m: int) -> np.ndarray:
    rows = [ind.evaluation.objective_row(m) for ind in pop]
    return np.array(rows, float).reshape(-1, m)


def _summary(t: int, pop: list[Individual], evaluated: int, m: int, start: float) -> GenerationSummary:
    feas = [ind for ind in pop if ind.feasible]
    if feas:
        f = _objective_matrix(feas, m)
        front = int(non_dominated_mask(f).sum())
        best = f.min(axis=0).tolist()
    else:
        front, best = 0, [float("nan")] * m
    return GenerationSummary(
        t, len(pop), evaluated, len(feas), front, best,
        float(np.mean([ind.cv for ind in pop])), time.perf_counter() - start,
    )


def run(config: RveaConfig, problem: Problem,
        on_evaluated: Callable[[Individual], None] | None = None,
        threads: int = 1, evaluator: Evaluator | None = None,
        on_generation: Callable[[GenerationSummary], None] | None = None) -> RunResult:
    """Evolve a population; every evaluated individual is passed to ``on_evaluated`` once.

    Results depend only on ``config`` (including its seed) and the problem,
    never on ``threads``.
    """
    m = problem.n_objectives
    if m < 2:
        raise ConfigError("at least two objectives are required")
    seed = int(config.seed)
    n = config.population_size
    t_max = config.max_generations
    vectors = init_reference_vectors(m, divisions_for(m, config.vector_target))
    registry = InnovationRegistry()
    own_evaluator = evaluator is None
    evaluator = evaluator or Evaluator(problem, threads)
    next_id = 0
    total = 0
    history: list[GenerationSummary] = []

    def evaluate_all(batch: list[Individual]):
        nonlocal total
        for ind, ev in zip(batch, evaluator([ind.genome for ind in batch])):
            ind.evaluation = ev
            if on_evaluated is not None:
                on_evaluated(ind)
        total += len(batch)

    try:
        start = time.perf_counter()
        pop = []
        for k in range(n):
            rng = np.random.default_rng([seed, 0, 1 + k])
            pop.append(Individual(next_id, problem.random_genome(rng, registry, next_id), 0))
            next_id += 1
        evaluate_all(pop)
        history.append(_summary(0, pop, len(pop), m, start))
        _log(history[-1], on_generation)

        for t in range(t_max):
            start = time.perf_counter()
            gen = t + 1
            registry.new_generation()
            parents_f = _objective_matrix(pop, m)
            plan_rng = np.random.default_rng([seed, gen, _PLAN_STREAM])
            base_id = next_id

            def breed(parents, k, gen=gen, base_id=base_id):
                rng = np.random.default_rng([seed, gen, 1 + k])
                child = problem.breed(tuple(p.genome for p in parents), rng, registry, base_id + k)
                return Individual(base_id + k, child, gen, parents=tuple(p.id for p in parents))

            offspring = reproduce(t, t_max, pop, parents_f, vectors, n, plan_rng, breed)
            next_id += len(offspring)
            evaluate_all(offspring)

            union = pop + offspring
            f = _objective_matrix(union, m)
            cv = np.array([ind.cv for ind in union])
            keep = select(gen, t_max, f, cv, vectors, config.alpha)
            pop = [union[i] for i in keep]

            if adaptation_due(gen, t_max, config.adaptation_interval):
                feas = [ind for ind in pop if ind.feasible]
                if feas:
                    vectors = adapt_reference_vectors(vectors, _objective_matrix(feas, m))
            history.append(_summary(gen, pop, len(offspring), m, start))
            _log(history[-1], on_generation)
    finally:
        if own_evaluator:
            evaluator.close()
    return RunResult(pop, vectors, history, total)


def _log(s: GenerationSummary, callback=None):
    best = ", ".join(f"{b:.4g}" for b in s.best)
    log.info("gen %d: pop %d, feasible %d, front %d, best [%s], mean cv %.3g, %.2fs",
             s.generation, s.population, s.feasible, s.front_size, best, s.mean_cv, s.seconds)
    if callback is not None:
        callback(s)
