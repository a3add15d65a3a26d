"""CPPN genomes: representation, evaluation and NEAT-style variation.

A genome is a small directed acyclic graph of nodes carrying an activation
function and a bias. Each gene (node or connection) carries a global
historical marker so that genomes of different topology can be aligned
for crossover and compared for similarity.

Markers 0 and 1 are the ``x`` and ``y`` input nodes and marker 2 is the
single output node; every other marker is issued by an
:class:`InnovationRegistry`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import StructuralIntegrityError

INPUT_X = 0
INPUT_Y = 1
OUTPUT = 2
FIRST_FREE_MARKER = 3

FORMAT_NAME = "cppn-genome"
FORMAT_VERSION = 1

INPUT, HIDDEN, OUT = "input", "hidden", "output"
NODE_KINDS = (INPUT, HIDDEN, OUT)


def _sigmoid(z):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


ACTIVATIONS = {
    "square": lambda z: z * z,
    "sigmoid": _sigmoid,
    "gaussian": lambda z: np.exp(-z * z),
    "sine": np.sin,
    "relu": lambda z: np.maximum(z, 0.0),
    "tanh": np.tanh,
    "cosine": np.cos,
    "linear": lambda z: z,
}

# activations drawn by mutation and initialisation
DEFAULT_ACTIVATIONS = ("square", "sigmoid", "gaussian", "sine", "relu", "tanh")


@dataclass(frozen=True)
class NodeGene:
    marker: int
    kind: str
    activation: str = "linear"
    bias: float = 0.0


@dataclass(frozen=True)
class ConnectionGene:
    marker: int
    source: int
    target: int
    weight: float
    enabled: bool = True


@dataclass(frozen=True)
class Genome:
    """Immutable CPPN genome. Construction validates every invariant."""

    nodes: tuple[NodeGene, ...]
    connections: tuple[ConnectionGene, ...]
    key: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.marker)))
        object.__setattr__(
            self, "connections", tuple(sorted(self.connections, key=lambda c: c.marker))
        )
        self._validate()

    def _validate(self):
        markers = [n.marker for n in self.nodes]
        if len(set(markers)) != len(markers):
            raise StructuralIntegrityError("duplicate node marker")
        kinds = {n.marker: n for n in self.nodes}
        for m in (INPUT_X, INPUT_Y):
            node = kinds.get(m)
            if node is None or node.kind != INPUT:
                raise StructuralIntegrityError(f"missing input node {m}")
            if node.activation != "linear" or node.bias != 0.0:
                raise StructuralIntegrityError("input nodes must be identity with zero bias")
        outputs = [n for n in self.nodes if n.kind == OUT]
        if len(outputs) != 1 or outputs[0].marker != OUTPUT:
            raise StructuralIntegrityError("exactly one output node (marker 2) is required")
        for n in self.nodes:
            if n.kind not in NODE_KINDS:
                raise StructuralIntegrityError(f"unknown node kind {n.kind!r}")
            if n.activation not in ACTIVATIONS:
                raise StructuralIntegrityError(f"unknown activation {n.activation!r}")
            if n.kind == INPUT and n.marker not in (INPUT_X, INPUT_Y):
                raise StructuralIntegrityError("only markers 0 and 1 may be inputs")
        all_markers = set(markers)
        pairs = set()
        for c in self.connections:
            if c.marker in all_markers:
                raise StructuralIntegrityError(f"marker {c.marker} used twice")
            all_markers.add(c.marker)
            if c.source not in kinds or c.target not in kinds:
                raise StructuralIntegrityError(f"connection {c.marker} references a missing node")
            if c.source == c.target:
                raise StructuralIntegrityError("self-loop")
            if kinds[c.target].kind == INPUT:
                raise StructuralIntegrityError("inputs cannot have incoming connections")
            if (c.source, c.target) in pairs:
                raise StructuralIntegrityError(f"duplicate connection {c.source}->{c.target}")
            pairs.add((c.source, c.target))
        # raises on cycles
        self.order  # noqa: B018

    @cached_property
    def order(self) -> tuple[int, ...]:
        """Node markers in a topological order of the enabled subgraph."""
        order = topological_order(
            [n.marker for n in self.nodes],
            [(c.source, c.target) for c in self.connections if c.enabled],
        )
        if order is None:
            raise StructuralIntegrityError("enabled connections contain a cycle")
        return tuple(order)

    @cached_property
    def _plan(self):
        incoming: dict[int, list[tuple[int, float]]] = {n.marker: [] for n in self.nodes}
        for c in self.connections:
            if c.enabled:
                incoming[c.target].append((c.source, c.weight))
        by_marker = {n.marker: n for n in self.nodes}
        return [
            (m, by_marker[m].activation, by_marker[m].bias, incoming[m])
            for m in self.order
            if by_marker[m].kind != INPUT
        ]

    @property
    def node_map(self) -> dict[int, NodeGene]:
        return {n.marker: n for n in self.nodes}

    @property
    def hidden(self) -> list[NodeGene]:
        return [n for n in self.nodes if n.kind == HIDDEN]

    @property
    def max_marker(self) -> int:
        return max([n.marker for n in self.nodes] + [c.marker for c in self.connections])

    def __len__(self):
        return len(self.nodes) + len(self.connections)

    def with_key(self, key: int) -> "Genome":
        return Genome(self.nodes, self.connections, key)


def topological_order(nodes: Iterable[int], edges: Iterable[tuple[int, int]]):
    """Kahn's algorithm; returns ``None`` if the graph has a cycle.

    Ties are broken by marker so the order is deterministic.
    """
    nodes = sorted(nodes)
    succ: dict[int, list[int]] = {n: [] for n in nodes}
    indeg = {n: 0 for n in nodes}
    for s, t in edges:
        succ[s].append(t)
        indeg[t] += 1
    import heapq

    ready = [n for n in nodes if indeg[n] == 0]
    heapq.heapify(ready)
    out = []
    while ready:
        n = heapq.heappop(ready)
        out.append(n)
        for t in succ[n]:
            indeg[t] -= 1
            if indeg[t] == 0:
                heapq.heappush(ready, t)
    return out if len(out) == len(nodes) else None


def evaluate(genome: Genome, point: Sequence[float]) -> float:
    """Intensity at a single point ``(x, y)``."""
    return float(evaluate_batch(genome, [point])[0])


def evaluate_batch(genome: Genome, points) -> np.ndarray:
    """Evaluate the network on an ``(n, 2)`` array of points.

    Each node computes ``act(sum(w * h_src) + bias)`` over its enabled
    inputs; a node without inputs outputs ``act(bias)``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    values = {INPUT_X: pts[:, 0], INPUT_Y: pts[:, 1]}
    with np.errstate(over="ignore", invalid="ignore"):
        for marker, act, bias, inputs in genome._plan:
            z = np.full(n, bias, dtype=float)
            for src, w in inputs:
                z = z + w * values[src]
            values[marker] = ACTIVATIONS[act](z)
    return np.array(values[OUTPUT], dtype=float, copy=True).reshape(n)


# ---------------------------------------------------------------- registry


class InnovationRegistry:
    """Issues historical markers.

    Connection markers are keyed by ``(source, target)`` for the lifetime of
    the registry, so a given node pair always maps to one marker anywhere in
    the population. Node-split markers are cached per generation: two
    genomes splitting connection ``m`` in the same generation get the same
    hidden node.
    """

    def __init__(self, next_marker: int = FIRST_FREE_MARKER):
        self.next_marker = next_marker
        self.connection_index: dict[tuple[int, int], int] = {}
        self.split_index: dict[int, int] = {}

    def _issue(self) -> int:
        m = self.next_marker
        self.next_marker += 1
        return m

    def connection(self, source: int, target: int) -> int:
        key = (source, target)
        if key not in self.connection_index:
            self.connection_index[key] = self._issue()
        return self.connection_index[key]

    def split(self, connection_marker: int, taken: Iterable[int] = ()) -> int:
        m = self.split_index.get(connection_marker)
        if m is None or m in set(taken):
            m = self._issue()
            self.split_index[connection_marker] = m
        return m

    def new_generation(self):
        self.split_index.clear()

    def observe(self, genome: Genome):
        """Make sure future markers do not collide with ``genome``'s."""
        self.next_marker = max(self.next_marker, genome.max_marker + 1)
        for c in genome.connections:
            self.connection_index.setdefault((c.source, c.target), c.marker)

    def state(self) -> dict:
        return {
            "next_marker": self.next_marker,
            "connections": [[s, t, m] for (s, t), m in sorted(self.connection_index.items())],
        }


# ---------------------------------------------------------------- creation


def random_genome(
    rng: np.random.Generator,
    registry: InnovationRegistry,
    activations: Sequence[str] = DEFAULT_ACTIVATIONS,
    key: int = 0,
) -> Genome:
    """Inputs fully connected to the output, weights uniform in [-1, 1]."""
    nodes = (
        NodeGene(INPUT_X, INPUT),
        NodeGene(INPUT_Y, INPUT),
        NodeGene(OUTPUT, OUT, activations[int(rng.integers(len(activations)))], 0.0),
    )
    conns = tuple(
        ConnectionGene(registry.connection(src, OUTPUT), src, OUTPUT, float(rng.uniform(-1, 1)))
        for src in (INPUT_X, INPUT_Y)
    )
    return Genome(nodes, conns, key)


def build_genome(connections, output_activation="linear", output_bias=0.0, hidden=(), key=0):
    """Convenience constructor used by tests and bundled example genomes.

    ``hidden`` is a sequence of ``(marker, activation, bias)``;
    ``connections`` a sequence of ``(marker, source, target, weight[, enabled])``.
    """
    nodes = [
        NodeGene(INPUT_X, INPUT),
        NodeGene(INPUT_Y, INPUT),
        NodeGene(OUTPUT, OUT, output_activation, output_bias),
    ]
    nodes += [NodeGene(m, HIDDEN, a, b) for m, a, b in hidden]
    conns = [ConnectionGene(*c) for c in connections]
    return Genome(tuple(nodes), tuple(conns), key)


# ---------------------------------------------------------------- crossover


def crossover(parent_a: Genome, parent_b: Genome, rng: np.random.Generator, key: int = 0,
              disable_prob: float = 0.75) -> Genome:
    """Union of both parents' genes, aligned by marker.

    Matching genes take their attributes from either parent with equal
    probability. A matching connection disabled in exactly one parent stays
    disabled with probability ``disable_prob``; one disabled in both stays
    disabled, so ``crossover(g, g)`` reproduces ``g``. Cycles created by the union
    are repaired by :func:`repair_cycles`.
    """
    na, nb = parent_a.node_map, parent_b.node_map
    nodes = []
    for m in sorted(set(na) | set(nb)):
        if m in na and m in nb:
            nodes.append(na[m] if rng.random() < 0.5 else nb[m])
        else:
            nodes.append(na.get(m) or nb[m])

    ca = {c.marker: c for c in parent_a.connections}
    cb = {c.marker: c for c in parent_b.connections}
    conns = []
    for m in sorted(set(ca) | set(cb)):
        if m in ca and m in cb:
            pick = ca[m] if rng.random() < 0.5 else cb[m]
            enabled = ca[m].enabled and cb[m].enabled
            if ca[m].enabled != cb[m].enabled:
                enabled = not (rng.random() < disable_prob)
            conns.append(replace(pick, enabled=enabled))
        else:
            conns.append(ca.get(m) or cb[m])
    return Genome(tuple(nodes), repair_cycles(conns), key)


def _find_cycle(conns: Sequence[ConnectionGene]):
    succ: dict[int, list[ConnectionGene]] = {}
    for c in conns:
        if c.enabled:
            succ.setdefault(c.source, []).append(c)
    color: dict[int, int] = {}
    stack_edges: list[ConnectionGene] = []

    def dfs(u):
        color[u] = 1
        for c in succ.get(u, ()):
            v = c.target
            stack_edges.append(c)
            if color.get(v, 0) == 1:
                i = next(k for k, e in enumerate(stack_edges) if e.source == v)
                return stack_edges[i:]
            if color.get(v, 0) == 0:
                found = dfs(v)
                if found:
                    return found
            stack_edges.pop()
        color[u] = 2
        return None

    for start in sorted(succ):
        if color.get(start, 0) == 0:
            found = dfs(start)
            if found:
                return found
    return None


def repair_cycles(conns: Iterable[ConnectionGene]) -> tuple[ConnectionGene, ...]:
    """Disable cycle connections with the largest source marker until acyclic."""
    conns = sorted(conns, key=lambda c: c.marker)
    while True:
        cycle = _find_cycle(conns)
        if cycle is None:
            return tuple(conns)
        worst = max(cycle, key=lambda c: (c.source, c.marker))
        conns = [replace(c, enabled=False) if c.marker == worst.marker else c for c in conns]


# ---------------------------------------------------------------- mutation


@dataclass
class MutationRates:
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
    activations: tuple[str, ...] = field(default=DEFAULT_ACTIVATIONS)

    def __post_init__(self):
        self.activations = tuple(self.activations)
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")

    @classmethod
    def zero(cls) -> "MutationRates":
        return cls(weight=0, bias=0, activation=0, add_connection=0, add_node=0,
                   remove_connection=0, remove_node=0)


def _creates_cycle(conns, source, target) -> bool:
    """True if an enabled path already leads from ``target`` to ``source``."""
    succ: dict[int, list[int]] = {}
    for c in conns:
        if c.enabled:
            succ.setdefault(c.source, []).append(c.target)
    seen, todo = set(), [target]
    while todo:
        u = todo.pop()
        if u == source:
            return True
        if u in seen:
            continue
        seen.add(u)
        todo.extend(succ.get(u, ()))
    return False


def _perturb(value, rng, rates: MutationRates):
    if rng.random() < rates.weight_perturb:
        return float(value + rng.normal(0.0, rates.weight_sigma))
    return float(rng.uniform(-rates.weight_reset_range, rates.weight_reset_range))


def mutate(genome: Genome, registry: InnovationRegistry, rates: MutationRates,
           rng: np.random.Generator, key: int | None = None) -> Genome:
    """Return a mutated copy; structural mutations that cannot apply are skipped."""
    nodes = {n.marker: n for n in genome.nodes}
    conns = list(genome.connections)
    acts = rates.activations

    if rates.add_node and rng.random() < rates.add_node:
        enabled = [c for c in conns if c.enabled]
        if enabled:
            old = enabled[int(rng.integers(len(enabled)))]
            m = registry.split(old.marker, taken=list(nodes) + [c.marker for c in conns])
            nodes[m] = NodeGene(m, HIDDEN, acts[int(rng.integers(len(acts)))], 0.0)
            conns = [replace(c, enabled=False) if c.marker == old.marker else c for c in conns]
            conns.append(ConnectionGene(registry.connection(old.source, m), old.source, m, 1.0))
            conns.append(ConnectionGene(registry.connection(m, old.target), m, old.target, old.weight))

    if rates.add_connection and rng.random() < rates.add_connection:
        existing = {(c.source, c.target) for c in conns}
        sources = sorted(m for m, n in nodes.items() if n.kind != OUT)
        targets = sorted(m for m, n in nodes.items() if n.kind != INPUT)
        candidates = [
            (s, t) for s in sources for t in targets
            if s != t and (s, t) not in existing and not _creates_cycle(conns, s, t)
        ]
        if candidates:
            s, t = candidates[int(rng.integers(len(candidates)))]
            conns.append(ConnectionGene(registry.connection(s, t), s, t, float(rng.uniform(-1, 1))))

    if rates.remove_node and rng.random() < rates.remove_node:
        hidden = sorted(m for m, n in nodes.items() if n.kind == HIDDEN)
        if hidden:
            victim = hidden[int(rng.integers(len(hidden)))]
            del nodes[victim]
            conns = [c for c in conns if victim not in (c.source, c.target)]

    if rates.remove_connection and rng.random() < rates.remove_connection and conns:
        victim = conns[int(rng.integers(len(conns)))].marker
        conns = [c for c in conns if c.marker != victim]

    if rates.weight:
        conns = [
            replace(c, weight=_perturb(c.weight, rng, rates)) if rng.random() < rates.weight else c
            for c in conns
        ]
    for m in sorted(nodes):
        n = nodes[m]
        if n.kind == INPUT:
            continue
        if rates.bias and rng.random() < rates.bias:
            n = replace(n, bias=_perturb(n.bias, rng, rates))
        if rates.activation and rng.random() < rates.activation:
            n = replace(n, activation=acts[int(rng.integers(len(acts)))])
        nodes[m] = n

    return Genome(tuple(nodes.values()), tuple(conns), genome.key if key is None else key)


# ---------------------------------------------------------------- similarity


def similarity(a: Genome, b: Genome, coeffs=(0.5, 0.5, 1.0), include_bias: bool = True) -> float:
    """Genetic distance between two genomes (0 for identical genomes).

    ``c1 * excess / N + c2 * disjoint / N + c3 * W``, where genes are nodes and
    connections aligned by marker, ``N`` is the gene count of the larger
    genome, and ``W`` is the mean absolute weight difference over matching
    connections plus (optionally) the mean absolute bias difference over
    matching nodes. Disabled genes take part like any other gene.
    """
    c1, c2, c3 = coeffs
    ga = {n.marker: n.bias for n in a.nodes} | {c.marker: c.weight for c in a.connections}
    gb = {n.marker: n.bias for n in b.nodes} | {c.marker: c.weight for c in b.connections}
    max_a, max_b = max(ga), max(gb)
    excess = disjoint = 0
    for m in set(ga) ^ set(gb):
        if m > (max_b if m in ga else max_a):
            excess += 1
        else:
            disjoint += 1
    n_gene = max(len(ga), len(gb))

    conn_a = {c.marker: c.weight for c in a.connections}
    conn_b = {c.marker: c.weight for c in b.connections}
    shared = sorted(set(conn_a) & set(conn_b))
    w_bar = float(np.mean([abs(conn_a[m] - conn_b[m]) for m in shared])) if shared else 0.0
    if include_bias:
        na, nb = a.node_map, b.node_map
        shared_nodes = sorted(set(na) & set(nb))
        if shared_nodes:
            w_bar += float(np.mean([abs(na[m].bias - nb[m].bias) for m in shared_nodes]))
    return c1 * excess / n_gene + c2 * disjoint / n_gene + c3 * w_bar


# ---------------------------------------------------------------- serialization


def to_dict(genome: Genome) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "key": genome.key,
        "nodes": [[n.marker, n.kind, n.activation, n.bias] for n in genome.nodes],
        "connections": [
            [c.marker, c.source, c.target, c.weight, c.enabled] for c in genome.connections
        ],
    }


def from_dict(data: dict) -> Genome:
    if data.get("format") != FORMAT_NAME:
        raise StructuralIntegrityError("not a serialized genome")
    if data.get("version") != FORMAT_VERSION:
        raise StructuralIntegrityError(f"unsupported genome format version {data.get('version')}")
    nodes = tuple(NodeGene(int(m), k, a, float(b)) for m, k, a, b in data["nodes"])
    conns = tuple(
        ConnectionGene(int(m), int(s), int(t), float(w), bool(e))
        for m, s, t, w, e in data["connections"]
    )
    return Genome(nodes, conns, int(data.get("key", 0)))


def dumps(genome: Genome) -> str:
    return json.dumps(to_dict(genome), separators=(",", ":"))


def loads(text: str) -> Genome:
    return from_dict(json.loads(text))
