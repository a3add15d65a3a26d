"""Problems the evolutionary loop can optimize.

A problem knows how to create, breed, evaluate and (de)serialize its
genomes. Evaluation must be a pure function of the genome so it can run in
worker processes in any order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import cppn
from ..errors import DegenerateTensorError, InfeasibleDesign, SolverFailure
from ..geometry import build_mesh, check_constraints, develop, get_group, make_cloud
from ..homogenization import BaseMaterial, fitness_vector, homogenize, validate_objectives

SENTINEL = 1e9


@dataclass(frozen=True)
class Evaluation:
    """Outcome of evaluating one genome.

    ``fitness`` is ``None`` when evaluation failed or the design is
    infeasible; ``cv`` is then positive.
    """

    fitness: tuple[float, ...] | None
    cv: float
    properties: dict | None = None
    error: str | None = None
    details: dict = field(default_factory=dict)

    def objective_row(self, m: int) -> np.ndarray:
        if self.fitness is None:
            return np.full(m, SENTINEL)
        return np.asarray(self.fitness, float)


class Problem:
    n_objectives: int = 2
    kind: str = "abstract"

    def random_genome(self, rng: np.random.Generator, registry, key: int):
        raise NotImplementedError

    def breed(self, parents: tuple, rng: np.random.Generator, registry, key: int):
        raise NotImplementedError

    def evaluate(self, genome) -> Evaluation:
        raise NotImplementedError

    def encode(self, genome) -> dict:
        raise NotImplementedError

    def decode(self, data: dict):
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind}


class MetamaterialProblem(Problem):
    """CPPN genome -> symmetric unit cell -> homogenized properties."""

    kind = "metamaterial"

    def __init__(self, symmetry: str = "p4mm", objectives: Sequence[tuple[str, str]] = (("E", "maximize"), ("nu", "minimize")),
                 resolution: int = 35, material: BaseMaterial = BaseMaterial(),
                 rates: cppn.MutationRates | None = None, threshold: float = 0.5,
                 mesher: str = "structured", connectivity: int = 8, disable_prob: float = 0.75):
        self.objectives = tuple((str(n), str(d)) for n, d in objectives)
        validate_objectives(self.objectives)
        self.n_objectives = len(self.objectives)
        self.symmetry = symmetry
        self.group = get_group(symmetry)
        self.resolution = int(resolution)
        self.cloud = make_cloud(self.group, self.resolution, connectivity)
        self.connectivity = connectivity
        self.material = material
        self.rates = rates or cppn.MutationRates()
        self.threshold = threshold
        self.mesher = mesher
        self.disable_prob = disable_prob

    def random_genome(self, rng, registry, key):
        g = cppn.random_genome(rng, registry, self.rates.activations, key)
        return cppn.mutate(g, registry, self.rates, rng, key)

    def breed(self, parents, rng, registry, key):
        if len(parents) == 1:
            child = parents[0].with_key(key)
        else:
            child = cppn.crossover(parents[0], parents[1], rng, key, self.disable_prob)
        return cppn.mutate(child, registry, self.rates, rng, key)

    def max_cv(self) -> float:
        return float(self.resolution**2)

    def evaluate(self, genome) -> Evaluation:
        try:
            sampled = develop(genome, self.group, self.cloud, self.threshold)
        except InfeasibleDesign as exc:
            return Evaluation(None, self.max_cv(), error=type(exc).__name__)
        report = check_constraints(sampled, self.cloud)
        details = report.breakdown() | {"volume_fraction": sampled.volume_fraction_estimate()}
        if not report.feasible:
            return Evaluation(None, report.cv, error="ConstraintViolation", details=details)
        try:
            mesh = build_mesh(sampled, self.cloud, self.mesher, self.group.rhombic)
            tensor = homogenize(mesh, self.material)
            fitness = fitness_vector(tensor, self.objectives)
        except (SolverFailure, DegenerateTensorError) as exc:
            return Evaluation(None, report.cv + 1.0, error=type(exc).__name__, details=details)
        except InfeasibleDesign as exc:
            return Evaluation(None, self.max_cv(), error=type(exc).__name__, details=details)
        details["mesh_volume_fraction"] = mesh.volume_fraction()
        return Evaluation(tuple(fitness), 0.0, tensor.components(), details=details)

    def encode(self, genome) -> dict:
        return cppn.to_dict(genome)

    def decode(self, data: dict):
        return cppn.from_dict(data)

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "symmetry": self.symmetry,
            "objectives": [list(o) for o in self.objectives],
            "resolution": self.resolution,
            "threshold": self.threshold,
            "mesher": self.mesher,
            "connectivity": self.connectivity,
            "material": {"youngs_modulus": self.material.youngs_modulus,
                         "poisson_ratio": self.material.poisson_ratio},
        }


class SyntheticFrontProblem(Problem):
    """Minimize ``(x, 1 - sqrt(x))`` for ``x`` in [0, 1]; a real vector stands in for the genome.

    Only the first coordinate enters the objectives; the rest (if any) are
    inert. The whole segment is Pareto optimal.
    """

    kind = "synthetic"
    n_objectives = 2

    def __init__(self, dimension: int = 1, sigma: float = 0.1, blend: float = 0.5):
        self.dimension = dimension
        self.sigma = sigma
        self.blend = blend

    def random_genome(self, rng, registry, key):
        return rng.random(self.dimension)

    def breed(self, parents, rng, registry, key):
        if len(parents) == 1:
            child = parents[0].copy()
        else:
            a, b = parents
            lo, hi = np.minimum(a, b), np.maximum(a, b)
            span = hi - lo
            child = rng.uniform(lo - self.blend * span, hi + self.blend * span)
        child = child + rng.normal(0.0, self.sigma, self.dimension)
        return np.clip(child, 0.0, 1.0)

    def evaluate(self, genome) -> Evaluation:
        x = float(genome[0])
        return Evaluation((x, 1.0 - np.sqrt(x)), 0.0)

    def encode(self, genome) -> dict:
        return {"format": "real-vector", "x": [float(v) for v in genome]}

    def decode(self, data: dict):
        return np.array(data["x"], float)

    def describe(self) -> dict:
        return {"kind": self.kind, "dimension": self.dimension, "sigma": self.sigma}
