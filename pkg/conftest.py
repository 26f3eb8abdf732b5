"""Shared fixtures: bundled Example 1, the single-vertex and chain instances, random instances."""
import numpy as np
import pytest

from network.model_manager import ModelManager

EXAMPLE1_P = [19.0, 8.0, 2.0, 6.0, 5.0]
EXAMPLE1_NU = (2, 3, 6, 3, 3)
PAPER_LAMBDA = [0.25, 0.25, 1.0, 0.29, 0.31]
FIGURE_LAMBDA = [0.25, 0.25, 1.0, 0.2876, 0.305]


def single_vertex_doc(u_max=1.0, s=1.0, r=1.0, x_max=1.0):
    return {"name": "single", "n": 1, "s": [s], "x_max": [x_max],
            "edges": [{"from": 1, "to": "goal", "r": r, "u_max": u_max}]}


def chain_doc():
    return {"name": "chain", "n": 2, "s": [1, 1], "x_max": [1, 1],
            "edges": [{"from": 1, "to": 2, "r": 0, "u_max": 0.5},
                      {"from": 2, "to": "goal", "r": 0, "u_max": 1}]}


def random_doc(rng: np.random.Generator, n: int, bounded: bool = True, extra_edges: int = 2) -> dict:
    """Random routing model: every vertex keeps a path to the goal through higher labels or the goal."""
    edges = {}
    for i in range(1, n + 1):
        head = int(rng.integers(i + 1, n + 2))
        edges[(i, head)] = True
    for _ in range(extra_edges * n):
        i = int(rng.integers(1, n + 1))
        head = int(rng.integers(1, n + 2))
        if head != i:
            edges[(i, head)] = True

    doc = {"name": f"random{n}", "n": n, "s": [float(v) for v in rng.uniform(0.5, 5.0, n)], "edges": []}
    for (i, head) in sorted(edges):
        entry = {"from": i, "to": "goal" if head == n + 1 else head, "r": float(rng.uniform(0.0, 3.0))}
        if bounded:
            entry["u_max"] = float(rng.uniform(0.2, 1.0))
        doc["edges"].append(entry)
    if bounded:
        doc["x_max"] = [float(v) for v in rng.uniform(0.5, 2.0, n)]
    return doc


@pytest.fixture
def manager():
    return ModelManager()


@pytest.fixture
def example1(manager):
    return manager.load(manager.bundled_path())


@pytest.fixture
def single(manager):
    return manager.parse(single_vertex_doc())


@pytest.fixture
def single_half_cap(manager):
    return manager.parse(single_vertex_doc(u_max=0.5))


@pytest.fixture
def chain(manager):
    return manager.parse(chain_doc())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_instance(manager, rng):
    """Factory: random_instance(n, bounded=True)."""
    def make(n: int, bounded: bool = True, extra_edges: int = 2):
        return manager.parse(random_doc(rng, n, bounded, extra_edges))
    return make
