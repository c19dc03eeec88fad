import json
import math
import random

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import evolved_pool, make_genome
from quadpong.evolution import InnovationRegistry
from quadpong.genome import (
    ConnectionGene,
    CyclicGenome,
    Genome,
    InvalidGenome,
    NodeGene,
    NodeKind,
    dumps,
    evaluate,
    from_dict,
    loads,
    minimal_genome,
    tanh_activate,
    to_dict,
    topological_order,
    validate,
)

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


def reference_tanh(x):
    with mpmath.workdps(50):
        ex = mpmath.e ** mpmath.mpf(x)
        emx = mpmath.e ** (-mpmath.mpf(x))
        return float((ex - emx) / (ex + emx))


def test_tanh_matches_high_precision_reference():
    rng = random.Random(6)
    for _ in range(1000):
        x = rng.uniform(-10.0, 10.0)
        assert abs(tanh_activate(x) - reference_tanh(x)) <= 1e-12


@given(finite)
def test_tanh_open_interval_and_odd(x):
    y = tanh_activate(x)
    assert -1.0 < y < 1.0
    assert tanh_activate(-x) == -y


def test_tanh_small_and_saturated():
    assert tanh_activate(0.0) == 0.0
    assert tanh_activate(1e-300) == pytest.approx(1e-300, rel=1e-15)
    assert tanh_activate(50.0) == math.nextafter(1.0, 0.0)
    assert tanh_activate(-1e308) == -math.nextafter(1.0, 0.0)


def test_evaluate_examples():
    assert evaluate(make_genome(w0=0.0), (0.7, 0.3)) == 0.0
    assert evaluate(make_genome(w0=1.0), (1.0, 0.0)) == tanh_activate(1.0)


def test_evaluate_with_hidden_node_by_hand():
    nodes = [NodeGene(0, NodeKind.INPUT), NodeGene(1, NodeKind.INPUT),
             NodeGene(2, NodeKind.OUTPUT, 0.1), NodeGene(3, NodeKind.HIDDEN, -0.2)]
    conns = [ConnectionGene(0, 0, 2, 0.5, enabled=False), ConnectionGene(2, 0, 3, 1.0),
             ConnectionGene(3, 3, 2, 0.5), ConnectionGene(1, 1, 2, -0.3)]
    g = Genome.build(nodes, conns)
    h = tanh_activate(-0.2 + 1.0 * 0.4)
    # output accumulates bias, then edges by ascending innovation: 1 (input 1), then 3 (hidden)
    expected = tanh_activate(0.1 + -0.3 * 0.9 + 0.5 * h)
    assert evaluate(g, (0.4, 0.9)) == expected
    assert topological_order(g) == [0, 1, 3, 2]


@given(st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=50)
def test_evaluate_pure_and_bounded(a, b):
    pool, _, _ = evolved_pool(3, rounds=20)
    for g in pool:
        y = evaluate(g, (a, b))
        assert -1.0 < y < 1.0
        assert evaluate(g, (a, b)) == y


def test_topological_order_minimal_and_chain():
    g = make_genome(w0=1.0, w1=1.0)
    order = topological_order(g)
    assert order.index(0) < order.index(2) and order.index(1) < order.index(2)
    nodes = [NodeGene(0, NodeKind.INPUT), NodeGene(1, NodeKind.INPUT),
             NodeGene(2, NodeKind.OUTPUT), NodeGene(3, NodeKind.HIDDEN)]
    conns = [ConnectionGene(0, 0, 2, 1.0, enabled=False), ConnectionGene(1, 0, 3, 1.0),
             ConnectionGene(2, 3, 2, 1.0)]
    order = topological_order(Genome.build(nodes, conns))
    assert order.index(0) < order.index(3) < order.index(2)


def test_cycle_detected():
    nodes = [NodeGene(0, NodeKind.INPUT), NodeGene(1, NodeKind.INPUT),
             NodeGene(2, NodeKind.OUTPUT), NodeGene(3, NodeKind.HIDDEN),
             NodeGene(4, NodeKind.HIDDEN)]
    conns = [ConnectionGene(0, 0, 3, 1.0), ConnectionGene(1, 3, 4, 1.0),
             ConnectionGene(2, 4, 3, 1.0), ConnectionGene(3, 4, 2, 1.0)]
    g = Genome.build(nodes, conns)
    with pytest.raises(CyclicGenome):
        topological_order(g)
    with pytest.raises(CyclicGenome):
        evaluate(g, (0.1, 0.2))
    # disabling one edge of the loop makes it feedforward again
    conns[2] = ConnectionGene(2, 4, 3, 1.0, enabled=False)
    evaluate(Genome.build(nodes, conns), (0.1, 0.2))


def test_validate_rejects_bad_layering():
    nodes = [NodeGene(0, NodeKind.INPUT), NodeGene(1, NodeKind.INPUT), NodeGene(2, NodeKind.OUTPUT)]
    with pytest.raises(InvalidGenome):
        validate(Genome.build(nodes, [ConnectionGene(0, 2, 0, 1.0)]))
    with pytest.raises(InvalidGenome):
        validate(Genome.build(nodes, [ConnectionGene(0, 0, 2, 1.0), ConnectionGene(0, 1, 2, 1.0)]))
    with pytest.raises(InvalidGenome):
        validate(Genome.build(nodes, [ConnectionGene(0, 0, 7, 1.0)]))


def test_minimal_genome_shape_and_link_rates():
    rng = random.Random(11)
    registry = InnovationRegistry()
    both = 0
    n = 20000
    for _ in range(n):
        g = minimal_genome(rng, registry)
        assert sorted(node.kind.value for node in g.nodes) == ["input", "input", "output"]
        assert not g.hidden_ids()
        assert 1 <= len(g.connections) <= 2
        for c in g.connections:
            assert -1.0 <= c.weight <= 1.0 and c.dst == 2
        both += len(g.connections) == 2
    # each link independently present with p = 0.5, conditioned on at least one
    assert abs(both / n - 1 / 3) <= 0.02
    # the same link always carries the same innovation number
    assert registry.connection_table == {(0, 2): 0, (1, 2): 1} or \
        registry.connection_table == {(1, 2): 0, (0, 2): 1}


def test_fully_connected_start():
    rng = random.Random(2)
    g = minimal_genome(rng, InnovationRegistry(), fully_connected=True)
    assert len(g.connections) == 2


def test_json_field_names_and_round_trip():
    pool, _, _ = evolved_pool(9)
    for g in pool:
        g = g.with_fitness(12.5)
        doc = json.loads(dumps(g))
        assert set(doc) == {"nodes", "connections", "fitness"}
        for node in doc["nodes"]:
            assert set(node) == {"id", "kind", "bias"}
        for conn in doc["connections"]:
            assert set(conn) == {"innovation", "from", "to", "weight", "enabled"}
        back = loads(dumps(g))
        assert back.structure() == g.structure() and back.fitness == 12.5
        assert from_dict(to_dict(g)) == g


def test_loads_rejects_corrupt_documents():
    with pytest.raises(InvalidGenome):
        from_dict({"nodes": [], "connections": []})
    with pytest.raises(InvalidGenome):
        from_dict({"nodes": [{"id": 0}], "connections": []})
