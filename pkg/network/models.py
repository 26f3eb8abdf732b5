"""
Data models for the positive routing control toolkit.

Vertices are labelled 1..n, the goal vertex is n+1. Edge and vertex indices stored in
arrays are 0-based; labels exposed in reports are 1-based.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np


def _frozen(array) -> np.ndarray:
    """Return a read-only float copy of an array."""
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RoutingGraph:
    """Directed graph with edges grouped by tail in canonical order."""
    n: int
    tails: Tuple[int, ...]
    heads: Tuple[int, ...]
    permutation: Tuple[int, ...] = ()
    warnings: Tuple[str, ...] = ()

    @property
    def m(self) -> int:
        return len(self.tails)

    @property
    def goal(self) -> int:
        return self.n + 1

    @property
    def partition(self) -> Tuple[int, ...]:
        """Number of outgoing edges m_i of each vertex."""
        counts = [0] * self.n
        for tail in self.tails:
            counts[tail - 1] += 1
        return tuple(counts)

    @property
    def offsets(self) -> Tuple[int, ...]:
        """Start index of each vertex block, plus m at the end."""
        starts = [0]
        for count in self.partition:
            starts.append(starts[-1] + count)
        return tuple(starts)

    def block(self, vertex: int) -> range:
        """Canonical edge indices leaving a vertex (1-based label)."""
        offsets = self.offsets
        return range(offsets[vertex - 1], offsets[vertex])

    def edge_label(self, k: int) -> Tuple[int, int]:
        return self.tails[k], self.heads[k]

    def is_goal_edge(self, k: int) -> bool:
        return self.heads[k] == self.goal


@dataclass(frozen=True)
class IncidenceMatrix:
    """Signed incidence matrix B = (B_1 ... B_n)."""
    B: np.ndarray
    partition: Tuple[int, ...]

    def block(self, vertex: int) -> np.ndarray:
        start = sum(self.partition[:vertex - 1])
        return self.B[:, start:start + self.partition[vertex - 1]]

    @property
    def positive_part(self) -> np.ndarray:
        """B-tilde: only the +1 entries of B."""
        return np.where(self.B > 0, self.B, 0.0)


@dataclass(frozen=True)
class CostWeights:
    """Stage cost weights: l(x, u) = s'x + r'u."""
    s: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "s", _frozen(self.s))
        object.__setattr__(self, "r", _frozen(self.r))

    def stage_cost(self, x: np.ndarray, u: np.ndarray) -> float:
        return float(self.s @ x + self.r @ u)

    def scaled(self, factor: float) -> "CostWeights":
        return CostWeights(self.s * factor, self.r * factor)


@dataclass(frozen=True)
class CapacityBounds:
    """Upper bounds on states (storage) and controls (edge flows)."""
    x_max: np.ndarray
    u_max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_max", _frozen(self.x_max))
        object.__setattr__(self, "u_max", _frozen(self.u_max))


@dataclass(frozen=True)
class ProblemInstance:
    """Graph, costs and optional capacity bounds of one routing problem."""
    graph: RoutingGraph
    costs: CostWeights
    bounds: Optional[CapacityBounds] = None
    name: str = ""

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def m(self) -> int:
        return self.graph.m

    @property
    def has_bounds(self) -> bool:
        return self.bounds is not None

    def without_bounds(self) -> "ProblemInstance":
        return ProblemInstance(self.graph, self.costs, None, self.name)

    def with_bounds(self, bounds: Optional[CapacityBounds]) -> "ProblemInstance":
        return ProblemInstance(self.graph, self.costs, bounds, self.name)


@dataclass(frozen=True)
class ValueVector:
    """Unconstrained optimal cost-to-go p and the residual of its defining equation."""
    p: np.ndarray
    residual: np.ndarray
    sweeps: int = 0

    def __post_init__(self):
        object.__setattr__(self, "p", _frozen(self.p))
        object.__setattr__(self, "residual", _frozen(self.residual))

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0


@dataclass(frozen=True)
class FeedbackGain:
    """Selector gain K with successor map nu (labels, goal = n+1) and selected edges."""
    K: np.ndarray
    nu: Tuple[int, ...]
    selected_edge: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "K", _frozen(self.K))

    @property
    def n(self) -> int:
        return len(self.nu)

    def routing_order(self) -> List[int]:
        """Vertices ordered so that every vertex comes after its successor."""
        n = self.n
        depth = {}

        def hops(vertex: int) -> int:
            path = []
            current = vertex
            while current != n + 1 and current not in depth:
                path.append(current)
                current = self.nu[current - 1]
                if len(path) > n:
                    return -1
            base = 0 if current == n + 1 else depth[current]
            for offset, node in enumerate(reversed(path), start=1):
                depth[node] = base + offset
            return depth[vertex]

        for vertex in range(1, n + 1):
            if hops(vertex) < 0:
                return []
        return sorted(range(1, n + 1), key=lambda v: (depth[v], v))


@dataclass(frozen=True)
class Violation:
    """One violated constraint row."""
    kind: str
    row: int
    label: str
    value: float
    bound: float

    @property
    def excess(self) -> float:
        return self.value - self.bound


@dataclass(frozen=True)
class MembershipResult:
    """Decision of the admissible set test plus violated rows."""
    decision: str
    violations: Tuple[Violation, ...] = ()

    @property
    def is_in(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class ClosedLoopCertificate:
    """Exact closed-loop cost vector p-hat of the scaled feedback and its bound gamma."""
    lam: np.ndarray
    p_hat: np.ndarray
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "lam", _frozen(self.lam))
        object.__setattr__(self, "p_hat", _frozen(self.p_hat))


@dataclass(frozen=True)
class HorizonCertificate:
    """Minimal stabilizing horizon and suboptimality table for one gamma."""
    gamma: float
    n0: int
    alpha_table: Dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Monomial:
    """coefficient * prod_j y_j ** exponents[j] with exponents in {-1, 0, 1}."""
    coefficient: float
    exponents: Tuple[int, ...]


@dataclass(frozen=True)
class GpRow:
    """Posynomial constraint sum of monomials <= 1."""
    kind: str
    label: str
    terms: Tuple[Monomial, ...]


@dataclass(frozen=True)
class GpProblem:
    """Geometric program: minimize variable 0 subject to posynomial rows <= 1.

    For the bound program, variable 0 is gamma and variables 1..n are lambda_1..lambda_n.
    """
    n_vars: int
    rows: Tuple[GpRow, ...]
    variable_names: Tuple[str, ...] = ()

    def rows_of_kind(self, kind: str) -> List[GpRow]:
        return [row for row in self.rows if row.kind == kind]


@dataclass(frozen=True)
class GpSolution:
    """Optimal bound gamma* and scaling lambda* of the geometric program."""
    gamma_star: float
    lambda_star: np.ndarray
    kkt_residual: float
    iterations: int
    degraded: bool = False
    method: str = "barrier"
    binding: Tuple[str, ...] = ()
    flat_face: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lambda_star", _frozen(self.lambda_star))


@dataclass(frozen=True)
class CertificateReport:
    """Re-evaluation of a GP solution in the original variables."""
    max_violation: float
    gamma_recomputed: float
    gamma_reported: float
    violated_rows: Tuple[str, ...] = ()


@dataclass(frozen=True)
class FiniteOcp:
    """Finite-horizon problem as the LP min c'u s.t. A u <= b, u >= 0.

    u stacks u(0), ..., u(N-1); states are eliminated by x(t) = x0 + B sum_{tau<t} u(tau).
    """
    horizon: int
    x0: np.ndarray
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    offset: float
    row_labels: Tuple[str, ...] = ()


@dataclass(frozen=True)
class LpSolution:
    """Optimal vertex of the finite-horizon LP."""
    objective: float
    u: np.ndarray
    basis: Tuple[int, ...]
    status: str
    iterations: int = 0
    duals: Optional[np.ndarray] = None


@dataclass
class Trajectory:
    """Closed-loop run: states x(0..T), controls u(0..T-1), stage and cumulative costs."""
    controller: str
    states: List[np.ndarray] = field(default_factory=list)
    controls: List[np.ndarray] = field(default_factory=list)
    stage_costs: List[float] = field(default_factory=list)
    termination: str = ""
    tail: Optional[float] = None

    @property
    def steps(self) -> int:
        return len(self.controls)

    @property
    def cumulative_cost(self) -> float:
        return float(sum(self.stage_costs))

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]
