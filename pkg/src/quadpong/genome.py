"""NEAT genome encoding and feed-forward evaluation.

Every genome has two input nodes (ids 0 and 1) and one output node (id 2).
Hidden nodes get ids from the run's innovation registry.  Genomes are frozen
value objects: operators in :mod:`quadpong.evolution` build new ones.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

INPUT_IDS = (0, 1)
OUTPUT_ID = 2
FIRST_HIDDEN_ID = 3

WEIGHT_LIMIT = 8.0

# tanh(x) rounds to 1.0 in double precision well before this; the exact
# formula would overflow exp() long after.
_SATURATION = 20.0
_BELOW_ONE = math.nextafter(1.0, 0.0)


class CyclicGenome(ValueError):
    """The enabled connections of a genome do not form a DAG."""


class InvalidGenome(ValueError):
    pass


class NodeKind(str, enum.Enum):
    INPUT = "input"
    HIDDEN = "hidden"
    OUTPUT = "output"


@dataclass(frozen=True)
class NodeGene:
    id: int
    kind: NodeKind
    bias: float = 0.0


@dataclass(frozen=True)
class ConnectionGene:
    innovation: int
    src: int
    dst: int
    weight: float
    enabled: bool = True


@dataclass(frozen=True)
class Genome:
    """Node genes sorted by id, connection genes sorted by innovation."""

    nodes: tuple[NodeGene, ...]
    connections: tuple[ConnectionGene, ...]
    fitness: float = 0.0
    _network: "CompiledNetwork | None" = field(
        default=None, init=False, repr=False, compare=False, hash=False
    )

    @classmethod
    def build(
        cls,
        nodes: Iterable[NodeGene],
        connections: Iterable[ConnectionGene],
        fitness: float = 0.0,
    ) -> "Genome":
        return cls(
            nodes=tuple(sorted(nodes, key=lambda n: n.id)),
            connections=tuple(sorted(connections, key=lambda c: c.innovation)),
            fitness=float(fitness),
        )

    def with_fitness(self, fitness: float) -> "Genome":
        return replace(self, fitness=float(fitness))

    def node_ids(self) -> set[int]:
        return {n.id for n in self.nodes}

    def hidden_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.kind is NodeKind.HIDDEN]

    def structure(self) -> tuple:
        """Hashable view of nodes and connections, ignoring fitness."""
        return (self.nodes, self.connections)

    def network(self) -> "CompiledNetwork":
        # cached because evaluation runs once per paddle per simulation step
        if self._network is None:
            object.__setattr__(self, "_network", compile_network(self))
        return self._network  # type: ignore[return-value]


def same_structure(a: Genome, b: Genome) -> bool:
    return a.structure() == b.structure()


def tanh_activate(x: float) -> float:
    """Hyperbolic tangent, (e^x - e^-x) / (e^x + e^-x).

    Evaluated as expm1(2|x|) / (expm1(2|x|) + 2) with the sign restored, which
    keeps full precision near zero and makes the function exactly odd.  Values
    that would round to +-1 return the nearest double inside the open interval.
    """
    ax = math.fabs(x)
    if ax >= _SATURATION:
        return math.copysign(_BELOW_ONE, x)
    t = math.expm1(2.0 * ax)
    r = t / (t + 2.0)
    if r >= 1.0:
        r = _BELOW_ONE
    return math.copysign(r, x)


def _enabled_edges(genome: Genome) -> list[ConnectionGene]:
    return [c for c in genome.connections if c.enabled]


def topological_order(genome: Genome) -> list[int]:
    """Kahn's algorithm over enabled edges, smallest ready node id first."""
    import heapq

    ids = genome.node_ids()
    indegree = {i: 0 for i in ids}
    succ: dict[int, list[int]] = {i: [] for i in ids}
    for c in _enabled_edges(genome):
        if c.src not in ids or c.dst not in ids:
            raise InvalidGenome(f"connection {c.innovation} references a missing node")
        succ[c.src].append(c.dst)
        indegree[c.dst] += 1
    ready = [i for i, d in indegree.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        n = heapq.heappop(ready)
        order.append(n)
        for m in succ[n]:
            indegree[m] -= 1
            if indegree[m] == 0:
                heapq.heappush(ready, m)
    if len(order) != len(ids):
        raise CyclicGenome("enabled connections contain a cycle")
    return order


def creates_cycle(edges: Iterable[tuple[int, int]], src: int, dst: int) -> bool:
    """True if adding src->dst to the edge set closes a directed cycle."""
    if src == dst:
        return True
    succ: dict[int, list[int]] = {}
    for a, b in edges:
        succ.setdefault(a, []).append(b)
    stack, seen = [dst], {dst}
    while stack:
        n = stack.pop()
        if n == src:
            return True
        for m in succ.get(n, ()):
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return False


@dataclass(frozen=True)
class CompiledNetwork:
    """Flat evaluation plan.

    Local slot 0 and 1 hold the inputs.  ``steps`` lists, in topological
    order, every non-input node as (slot, bias, first_edge, end_edge); edges
    inside a node's range are its enabled incoming connections in ascending
    innovation order.  The compiled kernel consumes exactly these arrays, so
    both backends accumulate in the same order.
    """

    n_slots: int
    output_slot: int
    step_slot: tuple[int, ...]
    step_bias: tuple[float, ...]
    step_edge_start: tuple[int, ...]
    step_edge_end: tuple[int, ...]
    edge_src: tuple[int, ...]
    edge_weight: tuple[float, ...]

    def activate(self, x0: float, x1: float) -> float:
        values = [0.0] * self.n_slots
        values[0] = x0
        values[1] = x1
        edge_src, edge_weight = self.edge_src, self.edge_weight
        for slot, bias, lo, hi in zip(
            self.step_slot, self.step_bias, self.step_edge_start, self.step_edge_end
        ):
            acc = bias
            for e in range(lo, hi):
                acc += edge_weight[e] * values[edge_src[e]]
            values[slot] = tanh_activate(acc)
        return values[self.output_slot]


def compile_network(genome: Genome) -> CompiledNetwork:
    order = topological_order(genome)
    slot = {INPUT_IDS[0]: 0, INPUT_IDS[1]: 1}
    for nid in order:
        if nid not in slot:
            slot[nid] = len(slot)
    if OUTPUT_ID not in slot:
        raise InvalidGenome("genome has no output node")
    incoming: dict[int, list[ConnectionGene]] = {}
    for c in _enabled_edges(genome):
        incoming.setdefault(c.dst, []).append(c)
    bias = {n.id: n.bias for n in genome.nodes}
    kinds = {n.id: n.kind for n in genome.nodes}

    step_slot, step_bias, starts, ends = [], [], [], []
    edge_src, edge_weight = [], []
    for nid in order:
        if kinds[nid] is NodeKind.INPUT:
            continue
        step_slot.append(slot[nid])
        step_bias.append(bias[nid])
        starts.append(len(edge_src))
        for c in sorted(incoming.get(nid, ()), key=lambda c: c.innovation):
            edge_src.append(slot[c.src])
            edge_weight.append(c.weight)
        ends.append(len(edge_src))
    return CompiledNetwork(
        n_slots=len(slot),
        output_slot=slot[OUTPUT_ID],
        step_slot=tuple(step_slot),
        step_bias=tuple(step_bias),
        step_edge_start=tuple(starts),
        step_edge_end=tuple(ends),
        edge_src=tuple(edge_src),
        edge_weight=tuple(edge_weight),
    )


def evaluate(genome: Genome, inputs: Sequence[float]) -> float:
    """Output node value for the two inputs; raises CyclicGenome on a cycle."""
    x0, x1 = inputs
    return genome.network().activate(float(x0), float(x1))


def validate(genome: Genome) -> None:
    """Raise InvalidGenome/CyclicGenome if any structural invariant fails."""
    ids = [n.id for n in genome.nodes]
    if len(set(ids)) != len(ids):
        raise InvalidGenome("duplicate node id")
    kinds = {n.id: n.kind for n in genome.nodes}
    inputs = sorted(i for i, k in kinds.items() if k is NodeKind.INPUT)
    outputs = [i for i, k in kinds.items() if k is NodeKind.OUTPUT]
    if inputs != list(INPUT_IDS) or outputs != [OUTPUT_ID]:
        raise InvalidGenome("expected inputs 0, 1 and output 2")
    innovations = [c.innovation for c in genome.connections]
    if len(set(innovations)) != len(innovations):
        raise InvalidGenome("duplicate innovation number")
    pairs = [(c.src, c.dst) for c in genome.connections if c.enabled]
    if len(set(pairs)) != len(pairs):
        raise InvalidGenome("duplicate enabled (src, dst) pair")
    for c in genome.connections:
        if c.src not in kinds or c.dst not in kinds:
            raise InvalidGenome(f"connection {c.innovation} references a missing node")
        if kinds[c.dst] is NodeKind.INPUT or kinds[c.src] is NodeKind.OUTPUT:
            raise InvalidGenome(f"connection {c.innovation} breaks feed-forward layering")
    topological_order(genome)


def minimal_genome(rng, registry, fully_connected: bool = False) -> Genome:
    """Two inputs, one output, no hidden nodes.

    Each input->output link is present with probability 0.5 (redrawn until at
    least one exists) unless ``fully_connected``.  Weights and the output bias
    are uniform in [-1, 1].
    """
    while True:
        present = [True, True] if fully_connected else [rng.random() < 0.5 for _ in INPUT_IDS]
        if any(present):
            break
    connections = []
    for src, keep in zip(INPUT_IDS, present):
        if keep:
            innovation = registry.connection_innovation(src, OUTPUT_ID)
            connections.append(ConnectionGene(innovation, src, OUTPUT_ID, rng.uniform(-1.0, 1.0)))
    nodes = [
        NodeGene(INPUT_IDS[0], NodeKind.INPUT),
        NodeGene(INPUT_IDS[1], NodeKind.INPUT),
        NodeGene(OUTPUT_ID, NodeKind.OUTPUT, rng.uniform(-1.0, 1.0)),
    ]
    return Genome.build(nodes, connections)


def to_dict(genome: Genome) -> dict:
    return {
        "nodes": [{"id": n.id, "kind": n.kind.value, "bias": n.bias} for n in genome.nodes],
        "connections": [
            {
                "innovation": c.innovation,
                "from": c.src,
                "to": c.dst,
                "weight": c.weight,
                "enabled": c.enabled,
            }
            for c in genome.connections
        ],
        "fitness": genome.fitness,
    }


def from_dict(data: dict) -> Genome:
    try:
        nodes = [NodeGene(int(n["id"]), NodeKind(n["kind"]), float(n["bias"])) for n in data["nodes"]]
        connections = [
            ConnectionGene(
                int(c["innovation"]),
                int(c["from"]),
                int(c["to"]),
                float(c["weight"]),
                bool(c["enabled"]),
            )
            for c in data["connections"]
        ]
        genome = Genome.build(nodes, connections, float(data.get("fitness", 0.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidGenome(f"malformed genome document: {exc}") from exc
    validate(genome)
    return genome


def dumps(genome: Genome) -> str:
    return json.dumps(to_dict(genome), indent=2)


def loads(text: str) -> Genome:
    return from_dict(json.loads(text))
