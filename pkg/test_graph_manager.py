"""Test routing graph construction, incidence matrix, reachability and model files."""
import json

import numpy as np
import pytest

from conftest import chain_doc, single_vertex_doc
from network.graph_manager import (build_graph, goal_reachable, incidence_matrix, is_identity_permutation,
                                   to_canonical, unreachable_vertices)
from network.model_manager import ModelManager
from utils.exceptions import ModelError

EXAMPLE1_EDGES = [(1, 2), (1, 4), (1, 5), (2, 3), (2, 4), (2, 5), (3, None), (4, 3), (5, 3)]

EXAMPLE1_B = np.array([
    [-1, -1, -1, 0, 0, 0, 0, 0, 0],
    [1, 0, 0, -1, -1, -1, 0, 0, 0],
    [0, 0, 0, 1, 0, 0, -1, 1, 1],
    [0, 1, 0, 0, 1, 0, 0, -1, 0],
    [0, 0, 1, 0, 0, 1, 0, 0, -1],
], dtype=float)


def test_example1_partition():
    graph = build_graph(5, EXAMPLE1_EDGES)
    assert graph.partition == (3, 3, 1, 1, 1)
    assert graph.m == 9
    assert is_identity_permutation(graph)
    assert list(graph.block(2)) == [3, 4, 5]


def test_single_vertex_graph():
    graph = build_graph(1, [(1, None)])
    assert (graph.n, graph.m, graph.partition) == (1, 1, (1,))
    assert np.array_equal(incidence_matrix(graph).B, [[-1.0]])


def test_shuffled_edges_give_canonical_order():
    shuffled = [(1, 5), (1, 2), (1, 4), (3, None), (2, 5), (2, 3), (5, 3), (2, 4), (4, 3)]
    graph = build_graph(5, shuffled)
    reference = build_graph(5, EXAMPLE1_EDGES)
    assert graph.tails == reference.tails and graph.heads == reference.heads
    assert not is_identity_permutation(graph)
    # file-order values follow their edges
    r_file = [10 * t + (6 if h is None else h) for t, h in shuffled]
    r = to_canonical(graph, r_file)
    assert list(r) == [12, 14, 15, 23, 24, 25, 36, 43, 53]


def test_goal_sorts_after_numbered_heads():
    graph = build_graph(2, [(1, None), (1, 2), (2, None)])
    assert graph.heads[:2] == (2, 3)


def test_example1_incidence_matrix():
    B = incidence_matrix(build_graph(5, EXAMPLE1_EDGES)).B
    assert np.array_equal(B, EXAMPLE1_B)


def test_chain_incidence_matrix():
    B = incidence_matrix(build_graph(2, [(1, 2), (2, None)])).B
    assert np.array_equal(B, [[-1, 0], [1, -1]])


def test_column_sums():
    graph = build_graph(5, EXAMPLE1_EDGES)
    sums = incidence_matrix(graph).B.sum(axis=0)
    for k in range(graph.m):
        assert sums[k] == (-1.0 if graph.is_goal_edge(k) else 0.0)


def test_incidence_matrix_is_read_only():
    B = incidence_matrix(build_graph(1, [(1, None)])).B
    with pytest.raises(ValueError):
        B[0, 0] = 3.0


@pytest.mark.parametrize("n, edges, fragment", [
    (0, [(1, None)], "n"),
    (2, [], "no edges"),
    (2, [(1, 1), (2, None)], "Self-loop"),
    (2, [(1, 3), (2, None)], "out of range"),
    (2, [(3, None)], "out of range"),
    (2, [(1, 2), (1, 2), (2, None)], "Duplicate"),
])
def test_build_graph_errors(n, edges, fragment):
    with pytest.raises(ModelError, match=fragment):
        build_graph(n, edges)


def test_reachability():
    assert goal_reachable(build_graph(5, EXAMPLE1_EDGES)) == {1, 2, 3, 4, 5}
    assert goal_reachable(build_graph(2, [(1, 2), (2, None)])) == {1, 2}


def test_isolated_vertex_is_unreachable():
    graph = build_graph(4, [(1, 2), (3, 2), (3, None), (4, None)])
    assert graph.warnings and "Vertex 2" in graph.warnings[0]
    assert unreachable_vertices(graph) == [1, 2]


def test_load_bundled_example(example1):
    assert example1.name == "example1"
    assert example1.n == 5 and example1.m == 9
    assert list(example1.costs.s) == [10, 5, 1, 3, 2]
    assert list(example1.costs.r) == [1, 5, 5, 1, 1, 1, 1, 1, 1]
    assert list(example1.bounds.u_max) == [0.25] * 6 + [1, 1, 1]


def test_parse_without_bounds(manager):
    doc = chain_doc()
    doc.pop("x_max")
    for edge in doc["edges"]:
        edge.pop("u_max")
    instance = manager.parse(doc)
    assert not instance.has_bounds


def test_partial_bounds_rejected(manager):
    doc = chain_doc()
    doc["edges"][0].pop("u_max")
    with pytest.raises(ModelError, match="every edge"):
        manager.parse(doc)


@pytest.mark.parametrize("mutate, fragment", [
    (lambda d: d.update(extra=1), "Invalid model"),
    (lambda d: d.update(s=[1.0]), "'s' has length 1"),
    (lambda d: d.update(s=[1.0, 0.0]), r"'s\[2\]' must be > 0"),
    (lambda d: d["edges"][0].update(r=-1.0), r"'r\[1\]' must be >= 0"),
    (lambda d: d["edges"][0].update(to="nowhere"), "Invalid model"),
    (lambda d: d["edges"][1].update(to="GOAL"), "Invalid model"),
])
def test_parse_errors(manager, mutate, fragment):
    doc = chain_doc()
    mutate(doc)
    with pytest.raises(ModelError, match=fragment):
        manager.parse(doc)


def test_load_missing_and_broken_files(manager, tmp_path):
    with pytest.raises(ModelError, match="not found"):
        manager.load(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ModelError, match="Invalid JSON"):
        manager.load(broken)


def test_save_and_hash(manager, example1, tmp_path):
    path = tmp_path / "copy.json"
    manager.save(example1, path)
    reloaded = manager.load(path)
    assert manager.instance_hash(reloaded) == manager.instance_hash(example1)
    assert json.loads(path.read_text())["edges"][6]["to"] == "goal"


def test_hash_ignores_name_and_edge_order(manager):
    doc = single_vertex_doc()
    renamed = dict(doc, name="other")
    assert manager.instance_hash(manager.parse(doc)) == manager.instance_hash(manager.parse(renamed))

    a = chain_doc()
    b = chain_doc()
    b["edges"].reverse()
    assert manager.instance_hash(manager.parse(a)) == manager.instance_hash(manager.parse(b))
    header = manager.report_header(manager.parse(a))
    assert set(header) == {"tool_version", "instance", "instance_hash"}


def test_data_dir_default():
    assert ModelManager().bundled_path().name == "example1.json"
    assert ModelManager().bundled_path().exists()
