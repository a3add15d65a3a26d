"""Run configuration: TOML (or JSON) files with validated sections.

Every field has a default, so an empty file describes the full-size setup
(population 500, 800 generations, 35 x 35 grid).
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .cppn import ACTIVATIONS, DEFAULT_ACTIVATIONS, MutationRates
from .errors import ConfigError
from .geometry.symmetry import GROUP_TAGS
from .homogenization import BaseMaterial, validate_objectives
from .moea.loop import RveaConfig

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

ENV_OUTPUT_DIR = "CPPNMETA_OUTPUT_DIR"
ENV_THREADS = "CPPNMETA_THREADS"


@dataclass
class ProblemSection:
    symmetry: str = "p4mm"
    resolution: int = 35
    threshold: float = 0.5
    mesher: str = "structured"
    connectivity: int = 8
    objectives: list = field(default_factory=lambda: [["E", "maximize"], ["nu", "minimize"]])


@dataclass
class MaterialSection:
    youngs_modulus: float = 1.0
    poisson_ratio: float = 0.3


@dataclass
class RveaSection:
    population_size: int = 500
    max_generations: int = 800
    alpha: float = 2.0
    adaptation_interval: float = 0.1
    n_reference_vectors: int | None = None


@dataclass
class MutationSection:
    weight: float = 0.2
    weight_perturb: float = 0.9
    weight_sigma: float = 0.5
    weight_reset_range: float = 3.0
    bias: float = 0.2
    activation: float = 0.5
    add_connection: float = 0.1
    add_node: float = 0.05
    remove_connection: float = 0.05
    remove_node: float = 0.02
    disable_inherited: float = 0.75
    activations: list = field(default_factory=lambda: list(DEFAULT_ACTIVATIONS))


@dataclass
class SimilaritySection:
    coeffs: list = field(default_factory=lambda: [0.5, 0.5, 1.0])
    threshold: float = 1.35
    include_bias: bool = True


@dataclass
class RunSection:
    seed: int = 0
    run_id: str = ""
    output_dir: str = "runs/default"
    threads: int = 0  # 0 = all available cores


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    problem: ProblemSection = field(default_factory=ProblemSection)
    material: MaterialSection = field(default_factory=MaterialSection)
    rvea: RveaSection = field(default_factory=RveaSection)
    mutation: MutationSection = field(default_factory=MutationSection)
    similarity: SimilaritySection = field(default_factory=SimilaritySection)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def run_id(self) -> str:
        return self.run.run_id or f"run-seed{self.run.seed}"

    def objectives(self) -> tuple[tuple[str, str], ...]:
        return tuple((str(n), str(d)) for n, d in self.problem.objectives)

    def rvea_config(self) -> RveaConfig:
        r = self.rvea
        return RveaConfig(r.population_size, r.max_generations, r.alpha, r.adaptation_interval,
                          r.n_reference_vectors, self.run.seed)

    def mutation_rates(self) -> MutationRates:
        m = asdict(self.mutation)
        m.pop("disable_inherited")
        m["activations"] = tuple(m["activations"])
        return MutationRates(**m)

    def base_material(self) -> BaseMaterial:
        return BaseMaterial(self.material.youngs_modulus, self.material.poisson_ratio)

    def build_problem(self):
        from .moea.problems import MetamaterialProblem

        p = self.problem
        return MetamaterialProblem(
            p.symmetry, self.objectives(), p.resolution, self.base_material(),
            self.mutation_rates(), p.threshold, p.mesher, p.connectivity,
            self.mutation.disable_inherited,
        )

    def threads(self) -> int:
        return self.run.threads or os.cpu_count() or 1


_SECTIONS = {f.name: f.default_factory for f in fields(RunConfig)}


def _coerce(section: str, name: str, value, default, problems: list[str]):
    where = f"{section}.{name}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            problems.append(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{where}: expected a number, got {value!r}")
            return value
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            problems.append(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            problems.append(f"{where}: expected a list, got {value!r}")
        return value
    return value


def _validate(cfg: RunConfig, problems: list[str]):
    p = cfg.problem
    if p.symmetry not in GROUP_TAGS:
        problems.append(f"problem.symmetry: {p.symmetry!r} is not one of {list(GROUP_TAGS)}")
    if isinstance(p.resolution, int) and p.resolution < 3:
        problems.append("problem.resolution: must be at least 3")
    if isinstance(p.threshold, float) and not 0 < p.threshold < 1:
        problems.append("problem.threshold: must lie in (0, 1)")
    if p.mesher not in ("structured", "delaunay"):
        problems.append("problem.mesher: must be 'structured' or 'delaunay'")
    if p.connectivity not in (4, 8):
        problems.append("problem.connectivity: must be 4 or 8")
    try:
        objs = cfg.objectives()
        if any(len(o) != 2 for o in p.objectives):
            raise ConfigError("each objective is [property, direction]")
        validate_objectives(objs)
        if len(objs) < 2:
            raise ConfigError("at least two objectives are required")
    except (ConfigError, TypeError, ValueError) as exc:
        problems.append(f"problem.objectives: {exc}")

    m = cfg.material
    try:
        BaseMaterial(m.youngs_modulus, m.poisson_ratio)
    except (ConfigError, TypeError) as exc:
        problems.append(f"material: {exc}")

    r = cfg.rvea
    try:
        cfg.rvea_config()
    except (ConfigError, TypeError) as exc:
        problems.append(f"rvea: {exc}")
    if r.n_reference_vectors is not None and not isinstance(r.n_reference_vectors, int):
        problems.append("rvea.n_reference_vectors: expected an integer")

    mu = cfg.mutation
    for name, v in asdict(mu).items():
        if name == "activations":
            bad = [a for a in v if a not in ACTIVATIONS]
            if bad or not v:
                problems.append(f"mutation.activations: unknown or empty {bad or v}")
        elif name in ("weight_sigma", "weight_reset_range"):
            if isinstance(v, float) and v < 0:
                problems.append(f"mutation.{name}: must be non-negative")
        elif isinstance(v, float) and not 0 <= v <= 1:
            problems.append(f"mutation.{name}: probability must lie in [0, 1]")

    s = cfg.similarity
    if len(s.coeffs) != 3 or any(not isinstance(c, (int, float)) or c < 0 for c in s.coeffs):
        problems.append("similarity.coeffs: need three non-negative numbers")
    if isinstance(s.threshold, float) and s.threshold <= 0:
        problems.append("similarity.threshold: must be positive")
    if isinstance(cfg.run.threads, int) and cfg.run.threads < 0:
        problems.append("run.threads: must be non-negative")


def from_dict(data: dict, env: dict | None = None) -> RunConfig:
    """Build and validate a config; all problems are reported together."""
    problems: list[str] = []
    cfg = RunConfig()
    for section, value in data.items():
        if section not in _SECTIONS:
            problems.append(f"{section}: unknown section (expected one of {sorted(_SECTIONS)})")
            continue
        if not isinstance(value, dict):
            problems.append(f"{section}: expected a table")
            continue
        target = getattr(cfg, section)
        defaults = {f.name: getattr(target, f.name) for f in fields(target)}
        for name, v in value.items():
            if name not in defaults:
                problems.append(f"{section}.{name}: unknown field")
                continue
            default = defaults[name]
            if default is None:
                if v is not None and (isinstance(v, bool) or not isinstance(v, int)):
                    problems.append(f"{section}.{name}: expected an integer, got {v!r}")
            else:
                v = _coerce(section, name, v, default, problems)
            setattr(target, name, v)
    env = os.environ if env is None else env
    if env.get(ENV_OUTPUT_DIR):
        cfg.run.output_dir = env[ENV_OUTPUT_DIR]
    if env.get(ENV_THREADS):
        try:
            cfg.run.threads = int(env[ENV_THREADS])
        except ValueError:
            problems.append(f"{ENV_THREADS}: expected an integer")
    try:
        _validate(cfg, problems)
    except (TypeError, ValueError, AttributeError):
        pass  # type problems already reported field by field
    if problems:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))
    return cfg


def parse_text(text: str, suffix: str = ".toml") -> dict:
    if suffix.lower() == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        try:
            return json.loads(text)
        except json.JSONDecodeError:
            raise ConfigError(f"invalid TOML: {exc}") from exc


def load_config(path, env: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return from_dict(parse_text(text, path.suffix), env)


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package (e.g. ``p4_small``)."""
    base = Path(__file__).parent / "data" / "configs"
    path = base / (name if name.endswith((".toml", ".json")) else name + ".toml")
    if not path.exists():
        raise ConfigError(f"no bundled config {name!r}; have {sorted(p.stem for p in base.iterdir())}")
    return path
