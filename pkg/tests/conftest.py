import random

import pytest

from quadpong.evolution import EvolutionConfig, InnovationRegistry, crossover, mutate
from quadpong.genome import ConnectionGene, Genome, NodeGene, NodeKind, minimal_genome


def make_genome(w0=None, w1=None, bias=0.0, fitness=0.0):
    """Inputs 0/1 wired straight to the output; ``None`` leaves a link out."""
    nodes = [
        NodeGene(0, NodeKind.INPUT),
        NodeGene(1, NodeKind.INPUT),
        NodeGene(2, NodeKind.OUTPUT, bias),
    ]
    conns = []
    if w0 is not None:
        conns.append(ConnectionGene(0, 0, 2, w0))
    if w1 is not None:
        conns.append(ConnectionGene(1, 1, 2, w1))
    return Genome.build(nodes, conns, fitness)


def evolved_pool(seed, size=12, rounds=30, config=None):
    """A pool of genomes grown by repeated crossover and mutation with one registry."""
    rng = random.Random(seed)
    config = config or EvolutionConfig()
    registry = InnovationRegistry()
    pool = [minimal_genome(rng, registry) for _ in range(size)]
    for _ in range(rounds):
        i, j = rng.randrange(size), rng.randrange(size)
        child = crossover(pool[i], pool[j], rng) if i != j else pool[i]
        pool[rng.randrange(size)] = mutate(child, config, registry, rng)
    return pool, registry, rng


@pytest.fixture
def rng():
    return random.Random(1234)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def report():
    """Record the pass/fail line of an acceptance criterion (printed in the summary)."""

    def record(criterion: int, passed: bool, detail: str) -> bool:
        ACCEPTANCE_LINES[criterion] = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} | {detail}"
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES.items()):
            terminalreporter.write_line(line)
