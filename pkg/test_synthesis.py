"""Test the unconstrained value vector, selector gain and routing split."""
import networkx as nx
import numpy as np
import pytest

from conftest import EXAMPLE1_NU, EXAMPLE1_P
from control.synthesis_manager import SynthesisManager
from network.graph_manager import build_graph, to_canonical
from network.models import CostWeights, ProblemInstance
from utils.exceptions import CycleDetected, NonpositiveS, UnreachableGoal


def make_instance(n, edges, s, r):
    """Instance from edges and r in file order."""
    graph = build_graph(n, edges)
    return ProblemInstance(graph, CostWeights(np.array(s, float), to_canonical(graph, r)))


def shortest_path_oracle(instance):
    """Cost-to-go with s charged at each visited vertex and r on each edge."""
    graph = instance.graph
    G = nx.DiGraph()
    for k in range(graph.m):
        tail, head = graph.tails[k], graph.heads[k]
        G.add_edge(head, tail, weight=instance.costs.s[tail - 1] + instance.costs.r[k])
    lengths = nx.single_source_dijkstra_path_length(G, graph.goal)
    return np.array([lengths[i] for i in range(1, graph.n + 1)])


def test_example1_value_vector(example1):
    value = SynthesisManager(example1).solve_value_vector()
    assert np.allclose(value.p, EXAMPLE1_P, atol=1e-9)
    assert value.max_residual <= 1e-9
    assert value.sweeps <= example1.n + 1


def test_example1_gain(example1):
    synthesis = SynthesisManager(example1)
    _, gain = synthesis.synthesize()
    assert gain.nu == EXAMPLE1_NU
    assert gain.selected_edge == (0, 3, 6, 7, 8)
    assert gain.routing_order() == [3, 2, 4, 5, 1]


def test_example1_routing_split(example1):
    synthesis = SynthesisManager(example1)
    _, gain = synthesis.synthesize()
    B_tilde = synthesis.split_positive_part(gain)
    routing = B_tilde @ gain.K
    assert not np.any(np.linalg.matrix_power(routing, 5))
    BK = synthesis.incidence.B @ gain.K
    assert np.array_equal(BK + np.eye(5), routing)
    assert list(routing.sum(axis=1)) == [0, 1, 3, 0, 0]


def test_single_vertex(single):
    synthesis = SynthesisManager(single)
    value, gain = synthesis.synthesize()
    assert np.allclose(value.p, [2.0])
    assert gain.nu == (2,)
    assert np.array_equal(gain.K, [[1.0]])
    B_tilde = synthesis.split_positive_part(gain)
    assert not np.any(B_tilde)
    assert np.array_equal(synthesis.incidence.B @ gain.K, [[-1.0]])


def test_chain_value_vector():
    instance = make_instance(2, [(1, 2), (2, None)], [1, 1], [0, 0])
    assert np.allclose(SynthesisManager(instance).solve_value_vector().p, [2, 1])


def test_tie_selects_first_edge():
    instance = make_instance(2, [(1, None), (1, 2), (2, None)], [1, 1], [1, 0, 0])
    synthesis = SynthesisManager(instance)
    value, gain = synthesis.synthesize()
    assert np.allclose(value.p, [2, 1])
    values = synthesis.edge_values(value.p, 1)
    assert values[0] == pytest.approx(values[1])
    assert gain.nu[0] == 2


def test_cyclic_successors_rejected():
    instance = make_instance(2, [(1, 2), (1, None), (2, 1), (2, None)], [1, 1], [0, 0, 0, 0])
    synthesis = SynthesisManager(instance)
    gain = synthesis.gain_from_successors([2, 1])
    with pytest.raises(CycleDetected, match="1->2, 2->1"):
        synthesis.split_positive_part(gain)
    assert gain.routing_order() == []


def test_successors_with_goal():
    instance = make_instance(2, [(1, 2), (1, None), (2, None)], [1, 1], [0, 0, 0])
    gain = SynthesisManager(instance).gain_from_successors([None, 3])
    assert gain.nu == (3, 3)


def test_unreachable_goal_names_vertices():
    instance = make_instance(3, [(1, 2), (3, None)], [1, 1, 1], [0, 0])
    with pytest.raises(UnreachableGoal) as info:
        SynthesisManager(instance).solve_value_vector()
    assert info.value.vertices == [1, 2]
    assert "1, 2" in str(info.value)


def test_nonpositive_s_rejected():
    instance = make_instance(1, [(1, None)], [0.0], [1.0])
    with pytest.raises(NonpositiveS):
        SynthesisManager(instance).solve_value_vector()


def test_zero_edge_costs_direct_routes():
    instance = make_instance(3, [(1, None), (2, None), (3, None), (1, 2)], [1, 2, 3], [0, 0, 0, 0])
    value, gain = SynthesisManager(instance).synthesize()
    assert np.allclose(value.p, [1, 2, 3])
    assert gain.nu == (4, 4, 4)


def test_value_vector_matches_shortest_paths(random_instance, rng):
    for _ in range(100):
        instance = random_instance(int(rng.integers(1, 13)), bounded=False)
        synthesis = SynthesisManager(instance)
        value, gain = synthesis.synthesize()
        assert np.allclose(value.p, shortest_path_oracle(instance), atol=1e-9, rtol=0)
        assert value.max_residual <= 1e-9 * max(1.0, float(np.max(value.p)))
        # the selected edge attains the minimum of r_i + B_i' p
        for vertex in range(1, instance.n + 1):
            values = synthesis.edge_values(value.p, vertex)
            chosen = gain.selected_edge[vertex - 1] - instance.graph.block(vertex).start
            assert values[chosen] == pytest.approx(values.min(), abs=1e-9)


def test_value_vector_scales_with_costs(example1):
    doubled = ProblemInstance(example1.graph, example1.costs.scaled(2.0))
    value = SynthesisManager(doubled).solve_value_vector()
    assert np.allclose(value.p, 2 * np.array(EXAMPLE1_P))
