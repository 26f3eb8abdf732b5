"""
Graph Manager - routing graph construction, incidence matrix and reachability.
"""
import logging
from collections import deque
from typing import Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from network.models import IncidenceMatrix, RoutingGraph
from utils.exceptions import ModelError
from utils.validators import validate_count, validate_edge

logger = logging.getLogger(__name__)

EdgeSpec = Tuple[int, Optional[int]]


def build_graph(n: int, edges: Sequence[EdgeSpec]) -> RoutingGraph:
    """Build a canonical routing graph.

    Args:
        n: number of non-goal vertices
        edges: (tail, head) pairs in file order; head None is the goal vertex

    Returns:
        RoutingGraph with edges sorted by (tail, head), goal = n+1 sorting last.
        permutation[k] is the file index of canonical edge k.
    """
    valid, msg = validate_count(n, "n", minimum=1)
    if not valid:
        raise ModelError(msg)
    if not edges:
        raise ModelError("Model has no edges")

    goal = n + 1
    keyed = []
    seen = {}
    for idx, (tail, head) in enumerate(edges):
        valid, msg = validate_edge(tail, head, n)
        if not valid:
            raise ModelError(f"Edge #{idx + 1}: {msg}")
        label = goal if head is None else head
        if (tail, label) in seen:
            raise ModelError(
                f"Duplicate edge {tail}->{'goal' if head is None else head} "
                f"(entries #{seen[(tail, label)] + 1} and #{idx + 1})"
            )
        seen[(tail, label)] = idx
        keyed.append((tail, label, idx))

    keyed.sort()
    tails = tuple(t for t, _, _ in keyed)
    heads = tuple(h for _, h, _ in keyed)
    permutation = tuple(i for _, _, i in keyed)

    dangling = sorted(set(range(1, n + 1)) - set(tails))
    warnings = tuple(f"Vertex {v} has no outgoing edges" for v in dangling)
    for warning in warnings:
        logger.warning(warning)

    return RoutingGraph(n=n, tails=tails, heads=heads, permutation=permutation, warnings=warnings)


def to_canonical(graph: RoutingGraph, values_in_file_order: Sequence[float]) -> np.ndarray:
    """Reorder a per-edge vector from file order to canonical order."""
    values = np.asarray(values_in_file_order, dtype=float)
    return values[list(graph.permutation)]


def is_identity_permutation(graph: RoutingGraph) -> bool:
    return list(graph.permutation) == list(range(graph.m))


def incidence_matrix(graph: RoutingGraph) -> IncidenceMatrix:
    """Signed incidence matrix: -1 at the tail row, +1 at the head row unless the head is the goal."""
    B = np.zeros((graph.n, graph.m))
    for k, (tail, head) in enumerate(zip(graph.tails, graph.heads)):
        B[tail - 1, k] = -1.0
        if head != graph.goal:
            B[head - 1, k] = 1.0
    B.setflags(write=False)
    return IncidenceMatrix(B=B, partition=graph.partition)


def goal_reachable(graph: RoutingGraph) -> Set[int]:
    """Vertices with a directed path to the goal (reverse traversal from the goal)."""
    predecessors: List[List[int]] = [[] for _ in range(graph.n + 2)]
    for tail, head in zip(graph.tails, graph.heads):
        predecessors[head].append(tail)

    reached = set()
    queue = deque([graph.goal])
    while queue:
        vertex = queue.popleft()
        for tail in predecessors[vertex]:
            if tail not in reached:
                reached.add(tail)
                queue.append(tail)
    return reached


def unreachable_vertices(graph: RoutingGraph) -> List[int]:
    return sorted(set(range(1, graph.n + 1)) - goal_reachable(graph))


def edges_from_labels(pairs: Iterable[Tuple[int, object]]) -> List[EdgeSpec]:
    """Convert validated (tail, head) pairs; the head label 'goal' becomes None."""
    return [(tail, None if head == "goal" else head) for tail, head in pairs]
