"""Truncation selection, innovation-aligned crossover and mutation.

One population holds the controllers for every paddle class; the side a
genome plays on is decided later by the trainer, so nothing here knows about
sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .genome import (
    FIRST_HIDDEN_ID,
    WEIGHT_LIMIT,
    ConnectionGene,
    Genome,
    NodeGene,
    NodeKind,
    creates_cycle,
)


class EmptyPopulation(ValueError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EvolutionConfig:
    population_size: int = 20
    survivor_fraction: float = 0.2
    p_conn_add: float = 0.5
    p_conn_delete: float = 0.5
    p_node_add: float = 0.2
    p_node_delete: float = 0.2
    p_weight_mutate: float = 0.8
    p_weight_replace: float = 0.1
    weight_perturb_sigma: float = 0.5
    fully_connected_start: bool = False

    def __post_init__(self):
        for name in ("p_conn_add", "p_conn_delete", "p_node_add", "p_node_delete",
                     "p_weight_mutate", "p_weight_replace"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {p}")
        if not 0.0 < self.survivor_fraction <= 1.0:
            raise ConfigError("survivor_fraction must lie in (0, 1]")
        if self.population_size < 1:
            raise ConfigError("population_size must be positive")
        if self.weight_perturb_sigma < 0:
            raise ConfigError("weight_perturb_sigma must be non-negative")

    @classmethod
    def from_dict(cls, data: dict) -> "EvolutionConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown evolution settings: {sorted(unknown)}")
        return cls(**data)

    @property
    def n_parents(self) -> int:
        # the small epsilon keeps 0.2 * 20 at 4 rather than ceil(4.000000000000001)
        return max(1, math.ceil(self.survivor_fraction * self.population_size - 1e-9))


class InnovationRegistry:
    """Run-wide historical markings.

    A given (src, dst) edge always maps to the same innovation number, and the
    k-th split of a given connection always yields the same hidden node and
    pair of innovations, no matter which genome performs it.
    """

    def __init__(self, next_innovation: int = 0, next_node_id: int = FIRST_HIDDEN_ID):
        self.next_innovation = next_innovation
        self.next_node_id = next_node_id
        self.connection_table: dict[tuple[int, int], int] = {}
        self.node_split_table: dict[tuple[int, int], tuple[int, int, int]] = {}

    def connection_innovation(self, src: int, dst: int) -> int:
        key = (src, dst)
        if key not in self.connection_table:
            self.connection_table[key] = self.next_innovation
            self.next_innovation += 1
        return self.connection_table[key]

    def split(self, innovation: int, existing_nodes: set[int]) -> tuple[int, int, int]:
        """(node_id, in_innovation, out_innovation) for splitting a connection.

        A genome that already carries the node of an earlier split of the same
        connection gets the next recorded split instead of a duplicate.
        """
        k = 0
        while True:
            key = (innovation, k)
            if key not in self.node_split_table:
                break
            if self.node_split_table[key][0] not in existing_nodes:
                return self.node_split_table[key]
            k += 1
        node_id = self.next_node_id
        self.next_node_id += 1
        record = (node_id, self.next_innovation, self.next_innovation + 1)
        self.next_innovation += 2
        self.node_split_table[key] = record
        return record

    def register_split_edges(self, src: int, node_id: int, dst: int, record) -> None:
        self.connection_table.setdefault((src, node_id), record[1])
        self.connection_table.setdefault((node_id, dst), record[2])


@dataclass
class Population:
    members: list[Genome]
    generation_index: int = 0


def select(population: Population, config: EvolutionConfig) -> list[Genome]:
    """Top ``ceil(survivor_fraction * N)`` genomes by fitness; ties go to the lower index."""
    members = population.members
    if not members:
        raise EmptyPopulation("cannot select from an empty population")
    k = max(1, math.ceil(config.survivor_fraction * len(members) - 1e-9))
    ranked = sorted(range(len(members)), key=lambda i: (-members[i].fitness, i))
    return [members[i] for i in ranked[:k]]


def crossover(parent_a: Genome, parent_b: Genome, rng) -> Genome:
    """Line up connection genes by innovation number and recombine.

    Matching genes come from either parent with equal probability.  Disjoint
    and excess genes come from the strictly fitter parent, or from each parent
    with probability 0.5 when fitness ties.  A gene whose enabled inclusion
    would close a cycle is skipped (disjoint/excess) or kept disabled
    (matching).
    """
    genes_a = {c.innovation: c for c in parent_a.connections}
    genes_b = {c.innovation: c for c in parent_b.connections}
    fa, fb = parent_a.fitness, parent_b.fitness

    chosen: list[ConnectionGene] = []
    source: dict[int, Genome] = {}
    enabled_edges: list[tuple[int, int]] = []
    for innovation in sorted(genes_a.keys() | genes_b.keys()):
        ga, gb = genes_a.get(innovation), genes_b.get(innovation)
        matching = ga is not None and gb is not None
        if matching:
            if rng.random() < 0.5:
                gene, parent = ga, parent_a
            else:
                gene, parent = gb, parent_b
        else:
            gene = ga if ga is not None else gb
            parent = parent_a if ga is not None else parent_b
            if fa == fb:
                if rng.random() >= 0.5:
                    continue
            elif (fa > fb) != (parent is parent_a):
                continue
        if gene.enabled:
            if creates_cycle(enabled_edges, gene.src, gene.dst) or (gene.src, gene.dst) in enabled_edges:
                if not matching:
                    continue
                gene = ConnectionGene(gene.innovation, gene.src, gene.dst, gene.weight, False)
            else:
                enabled_edges.append((gene.src, gene.dst))
        chosen.append(gene)
        source[gene.innovation] = parent

    nodes_a = {n.id: n for n in parent_a.nodes}
    nodes_b = {n.id: n for n in parent_b.nodes}
    child_nodes: dict[int, NodeGene] = {}
    for nid in sorted(nodes_a.keys() | nodes_b.keys()):
        na, nb = nodes_a.get(nid), nodes_b.get(nid)
        if na is not None and nb is not None:
            child_nodes[nid] = na if rng.random() < 0.5 else nb
        elif na is not None or nb is not None:
            node = na if na is not None else nb
            owner_is_a = na is not None
            if fa == fb:
                if rng.random() < 0.5:
                    child_nodes[nid] = node
            elif (fa > fb) == owner_is_a:
                child_nodes[nid] = node
    # every endpoint of an inherited connection must exist in the child
    for gene in chosen:
        for nid in (gene.src, gene.dst):
            if nid not in child_nodes:
                parent_nodes = nodes_a if source[gene.innovation] is parent_a else nodes_b
                child_nodes[nid] = parent_nodes[nid]
    return Genome.build(child_nodes.values(), chosen)


def _perturb(value: float, config: EvolutionConfig, rng) -> float:
    if rng.random() < config.p_weight_replace:
        value = rng.uniform(-1.0, 1.0)
    else:
        value = value + rng.gauss(0.0, config.weight_perturb_sigma)
    return min(WEIGHT_LIMIT, max(-WEIGHT_LIMIT, value))


def _candidate_links(nodes: dict[int, NodeGene], connections: list[ConnectionGene]):
    existing = {(c.src, c.dst) for c in connections}
    enabled = [(c.src, c.dst) for c in connections if c.enabled]
    sources = sorted(i for i, n in nodes.items() if n.kind is not NodeKind.OUTPUT)
    targets = sorted(i for i, n in nodes.items() if n.kind is not NodeKind.INPUT)
    out = []
    for s in sources:
        for t in targets:
            if s != t and (s, t) not in existing and not creates_cycle(enabled, s, t):
                out.append((s, t))
    return out


def mutate(genome: Genome, config: EvolutionConfig, registry: InnovationRegistry, rng,
           log: list | None = None) -> Genome:
    """Return a mutated copy of ``genome``.

    Five independent draws, in this order: weight/bias mutation, add
    connection, delete connection, split a connection with a new hidden node,
    delete a hidden node.  Structural mutations without a valid target do
    nothing.  ``log`` collects the names of the mutations that changed
    something.
    """
    nodes = {n.id: n for n in genome.nodes}
    conns = list(genome.connections)

    def fired(name):
        if log is not None:
            log.append(name)

    if rng.random() < config.p_weight_mutate:
        conns = [
            ConnectionGene(c.innovation, c.src, c.dst, _perturb(c.weight, config, rng), c.enabled)
            for c in conns
        ]
        for nid in sorted(nodes):
            node = nodes[nid]
            if node.kind is not NodeKind.INPUT:
                nodes[nid] = NodeGene(nid, node.kind, _perturb(node.bias, config, rng))
        fired("weight")

    if rng.random() < config.p_conn_add:
        candidates = _candidate_links(nodes, conns)
        if candidates:
            s, t = candidates[rng.randrange(len(candidates))]
            innovation = registry.connection_innovation(s, t)
            conns.append(ConnectionGene(innovation, s, t, rng.uniform(-1.0, 1.0)))
            fired("conn_add")

    if rng.random() < config.p_conn_delete:
        if conns:
            del conns[rng.randrange(len(conns))]
            fired("conn_delete")

    if rng.random() < config.p_node_add:
        enabled = [i for i, c in enumerate(conns) if c.enabled]
        if enabled:
            idx = enabled[rng.randrange(len(enabled))]
            old = conns[idx]
            node_id, in_innov, out_innov = registry.split(old.innovation, set(nodes))
            registry.register_split_edges(old.src, node_id, old.dst, (node_id, in_innov, out_innov))
            conns[idx] = ConnectionGene(old.innovation, old.src, old.dst, old.weight, False)
            nodes[node_id] = NodeGene(node_id, NodeKind.HIDDEN, 0.0)
            conns.append(ConnectionGene(in_innov, old.src, node_id, 1.0))
            conns.append(ConnectionGene(out_innov, node_id, old.dst, old.weight))
            fired("node_add")

    if rng.random() < config.p_node_delete:
        hidden = sorted(i for i, n in nodes.items() if n.kind is NodeKind.HIDDEN)
        if hidden:
            victim = hidden[rng.randrange(len(hidden))]
            del nodes[victim]
            conns = [c for c in conns if victim not in (c.src, c.dst)]
            fired("node_delete")

    return Genome.build(nodes.values(), conns)


def clone(genome: Genome) -> Genome:
    return Genome.build(genome.nodes, genome.connections)


def next_generation(population: Population, config: EvolutionConfig,
                    registry: InnovationRegistry, rng) -> Population:
    """Elites (fitness reset to 0) followed by mutated offspring of random parent pairs."""
    parents = select(population, config)
    size = len(population.members)
    members = [clone(p) for p in parents]
    while len(members) < size:
        if len(parents) == 1:
            child = clone(parents[0])
        else:
            i = rng.randrange(len(parents))
            j = rng.randrange(len(parents) - 1)
            if j >= i:
                j += 1
            child = crossover(parents[i], parents[j], rng)
        members.append(mutate(child, config, registry, rng))
    return Population(members, population.generation_index + 1)


def initial_population(config: EvolutionConfig, registry: InnovationRegistry, rng) -> Population:
    from .genome import minimal_genome

    members = [
        minimal_genome(rng, registry, fully_connected=config.fully_connected_start)
        for _ in range(config.population_size)
    ]
    return Population(members, 0)

