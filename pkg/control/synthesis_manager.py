"""
Synthesis Manager - unconstrained optimal value vector, selector gain and routing split.
"""
import logging
from typing import Sequence, Tuple

import numpy as np

from network.graph_manager import incidence_matrix, unreachable_vertices
from network.models import FeedbackGain, ProblemInstance, ValueVector
from utils.constants import VALUE_RESIDUAL_TOLERANCE
from utils.exceptions import CycleDetected, ModelError, NonpositiveS, NumericalFailure, UnreachableGoal
from utils.validators import validate_positive_vector

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-12


class SynthesisManager:
    """Computes the optimal positive feedback of the problem without capacity bounds."""

    def __init__(self, instance: ProblemInstance):
        """Initialize with a problem instance."""
        self.instance = instance
        self.graph = instance.graph
        self.costs = instance.costs
        self.incidence = incidence_matrix(instance.graph)

    def solve_value_vector(self) -> ValueVector:
        """Cost-to-go p of the vertex-and-edge-weighted shortest path to the goal.

        Jacobi Bellman-Ford sweeps from p = +inf (goal at 0); a path has at most n hops,
        so n sweeps suffice and one more sweep must leave p unchanged.
        """
        graph, s, r = self.graph, self.costs.s, self.costs.r
        valid, msg = validate_positive_vector(s, "s")
        if not valid:
            raise NonpositiveS(msg)
        missing = unreachable_vertices(graph)
        if missing:
            raise UnreachableGoal(missing)

        heads = np.array(graph.heads) - 1
        tails = np.array(graph.tails) - 1
        p = np.full(graph.n + 1, np.inf)
        p[graph.n] = 0.0

        sweeps = 0
        for sweeps in range(1, graph.n + 2):
            candidate = r + p[heads]
            best = np.full(graph.n, np.inf)
            np.minimum.at(best, tails, candidate)
            updated = np.append(s + best, 0.0)
            if np.array_equal(updated, p):
                break
            p = updated
        else:
            raise NumericalFailure(f"Value iteration did not settle after {graph.n + 1} sweeps")

        value = ValueVector(p=p[:graph.n], residual=self.residual(p[:graph.n]), sweeps=sweeps)
        if value.max_residual > VALUE_RESIDUAL_TOLERANCE * max(1.0, float(np.max(value.p))):
            raise NumericalFailure(f"Value vector residual {value.max_residual:.3e} too large")
        logger.info("Value vector solved in %d sweeps", sweeps)
        return value

    def edge_values(self, p: np.ndarray, vertex: int) -> np.ndarray:
        """r_i + B_i' p for the edges leaving a vertex."""
        block = self.graph.block(vertex)
        return self.costs.r[block.start:block.stop] + self.incidence.block(vertex).T @ p

    def residual(self, p: np.ndarray) -> np.ndarray:
        """s + sum_i min{min_k (r_i + B_i' p)_k, 0} e_i."""
        out = np.array(self.costs.s, dtype=float)
        for vertex in range(1, self.graph.n + 1):
            values = self.edge_values(p, vertex)
            inner = float(np.min(values)) if values.size else np.inf
            out[vertex - 1] += min(inner, 0.0)
        return out

    def build_feedback_gain(self, p: np.ndarray) -> FeedbackGain:
        """Select for each vertex the first edge minimising r_i + B_i' p."""
        selected = []
        for vertex in range(1, self.graph.n + 1):
            values = self.edge_values(p, vertex)
            if values.size == 0:
                raise ModelError(f"Vertex {vertex} has no outgoing edges")
            lowest = float(np.min(values))
            tol = TIE_TOLERANCE * max(1.0, abs(lowest))
            k = int(np.flatnonzero(values <= lowest + tol)[0])
            selected.append(self.graph.block(vertex).start + k)
        return self._gain_from_edges(selected)

    def gain_from_successors(self, nu: Sequence) -> FeedbackGain:
        """Gain routing each vertex to a given successor (label, None or n+1 for the goal)."""
        selected = []
        for vertex, successor in enumerate(nu, start=1):
            head = self.graph.goal if successor is None else int(successor)
            match = [k for k in self.graph.block(vertex) if self.graph.heads[k] == head]
            if not match:
                raise ModelError(f"No edge {vertex}->{successor} in the graph")
            selected.append(match[0])
        return self._gain_from_edges(selected)

    def _gain_from_edges(self, selected: Sequence[int]) -> FeedbackGain:
        K = np.zeros((self.graph.m, self.graph.n))
        for vertex, k in enumerate(selected, start=1):
            K[k, vertex - 1] = 1.0
        nu = tuple(self.graph.heads[k] for k in selected)
        return FeedbackGain(K=K, nu=nu, selected_edge=tuple(selected))

    def split_positive_part(self, gain: FeedbackGain) -> np.ndarray:
        """B-tilde with the checks BK = B-tilde K - I and (B-tilde K)^n = 0."""
        B = self.incidence.B
        B_tilde = self.incidence.positive_part
        n = self.graph.n
        self._check_gain_structure(gain)

        if not np.array_equal(B @ gain.K, B_tilde @ gain.K - np.eye(n)):
            raise NumericalFailure("Identity BK = B~K - I does not hold for this gain")
        routing = B_tilde @ gain.K
        if np.any(np.linalg.matrix_power(routing, n) != 0):
            raise CycleDetected(f"Routing cycle in successor map {self._format_nu(gain)}")
        return B_tilde

    def routing_matrix(self, gain: FeedbackGain) -> np.ndarray:
        """Selected-edge adjacency B-tilde K (nilpotent)."""
        return self.split_positive_part(gain) @ gain.K

    def _check_gain_structure(self, gain: FeedbackGain) -> None:
        """Each block K_i holds exactly one row e_i' and zeros elsewhere."""
        K = gain.K
        if K.shape != (self.graph.m, self.graph.n):
            raise ModelError(f"Gain has shape {K.shape}, expected {(self.graph.m, self.graph.n)}")
        for vertex in range(1, self.graph.n + 1):
            block = K[self.graph.block(vertex).start:self.graph.block(vertex).stop]
            others = np.delete(block, vertex - 1, axis=1)
            column = block[:, vertex - 1]
            if np.any(others != 0) or np.count_nonzero(column) != 1 or column.max() != 1.0:
                raise ModelError(f"Gain block of vertex {vertex} is not a selector")

    def _format_nu(self, gain: FeedbackGain) -> str:
        n = self.graph.n
        return ", ".join(f"{i}->{'goal' if j == n + 1 else j}" for i, j in enumerate(gain.nu, start=1))

    def synthesize(self) -> Tuple[ValueVector, FeedbackGain]:
        """Value vector and optimal positive feedback gain."""
        value = self.solve_value_vector()
        gain = self.build_feedback_gain(value.p)
        self.split_positive_part(gain)
        return value, gain
