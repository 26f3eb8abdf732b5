"""
OCP Manager - finite-horizon optimal control problem as a linear program.
"""
import logging
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from control.simplex import RevisedSimplex
from network.graph_manager import incidence_matrix
from network.models import FiniteOcp, LpSolution, ProblemInstance
from utils.constants import get_tolerance
from utils.exceptions import InputError, NumericalFailure, X0OutOfBounds
from utils.validators import validate_state_in_box

logger = logging.getLogger(__name__)


class OcpManager:
    """Builds and solves V_N(x0) = min sum_{t<N} s'x(t) + r'u(t) over admissible controls."""

    def __init__(self, instance: ProblemInstance, tolerance: Optional[float] = None):
        """Initialize with an instance; tolerance defaults to the configured LP tolerance."""
        self.instance = instance
        self.tol = get_tolerance(tolerance)
        self.B = incidence_matrix(instance.graph).B
        # P[i, k] = 1 when edge k leaves vertex i
        self.P = np.maximum(-self.B, 0.0)

    def check_state(self, x0: np.ndarray) -> np.ndarray:
        """Validate x0 in X (within tolerance) and clip rounding noise."""
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (self.instance.n,):
            raise X0OutOfBounds(f"x0 has shape {x0.shape}, expected ({self.instance.n},)")
        upper = self.instance.bounds.x_max if self.instance.bounds is not None else None
        valid, msg = validate_state_in_box(x0, upper, tol=self.tol)
        if not valid:
            raise X0OutOfBounds(msg)
        x0 = np.maximum(x0, 0.0)
        if upper is not None:
            x0 = np.minimum(x0, upper)
        return x0

    def build_ocp(self, x0: np.ndarray, N: int) -> FiniteOcp:
        """LP in u(0..N-1) with states eliminated by x(t) = x0 + B sum_{tau<t} u(tau).

        Rows: edge caps, vertex mass 1'u_i(t) <= x_i(t), state upper boxes and state
        lower boxes for t = 1..N; u >= 0 is carried by the LP itself. Cap and upper
        rows are omitted when the instance has no bounds.
        """
        if N < 1:
            raise InputError(f"Horizon must be >= 1, got {N}")
        x0 = self.check_state(x0)
        n, m = self.instance.n, self.instance.m
        s, r = self.instance.costs.s, self.instance.costs.r
        bounds = self.instance.bounds
        B, P = self.B, self.P

        # objective: u(tau) weighs r + (N-1-tau) B's; constant N s'x0
        Bs = B.T @ s
        c = np.concatenate([r + (N - 1 - tau) * Bs for tau in range(N)])
        offset = float(N * (s @ x0))

        blocks, rhs, labels = [], [], []

        if bounds is not None:
            blocks.append(np.eye(m * N))
            rhs.append(np.tile(bounds.u_max, N))
            labels += [f"cap t={t} e={k + 1}" for t in range(N) for k in range(m)]

        mass = np.zeros((n * N, m * N))
        for t in range(N):
            mass[t * n:(t + 1) * n, t * m:(t + 1) * m] = P
            for tau in range(t):
                mass[t * n:(t + 1) * n, tau * m:(tau + 1) * m] = -B
        blocks.append(mass)
        rhs.append(np.tile(x0, N))
        labels += [f"mass t={t} v={i + 1}" for t in range(N) for i in range(n)]

        # cumulative[t-1] maps u to B sum_{tau<t} u(tau), t = 1..N
        cumulative = np.zeros((n * N, m * N))
        for t in range(1, N + 1):
            for tau in range(t):
                cumulative[(t - 1) * n:t * n, tau * m:(tau + 1) * m] = B
        if bounds is not None:
            blocks.append(cumulative)
            rhs.append(np.tile(bounds.x_max - x0, N))
            labels += [f"xmax t={t} v={i + 1}" for t in range(1, N + 1) for i in range(n)]
        blocks.append(-cumulative)
        rhs.append(np.tile(x0, N))
        labels += [f"xmin t={t} v={i + 1}" for t in range(1, N + 1) for i in range(n)]

        A = np.vstack(blocks)
        b = np.maximum(np.concatenate(rhs), 0.0)
        return FiniteOcp(horizon=N, x0=x0, c=c, A=A, b=b, offset=offset, row_labels=tuple(labels))

    def solve_lp(self, ocp: FiniteOcp) -> LpSolution:
        """Deterministic vertex solution; objective includes the constant term."""
        raw = RevisedSimplex(ocp.c, ocp.A, ocp.b, tol=self.tol).solve()
        slack = ocp.b - ocp.A @ raw.u
        scale = max(1.0, float(np.max(np.abs(ocp.b), initial=0.0)))
        if np.min(slack, initial=0.0) < -self.tol * scale * 10:
            raise NumericalFailure(f"LP solution violates a row by {-np.min(slack):.3e}")
        return LpSolution(objective=raw.objective + ocp.offset, u=raw.u, basis=raw.basis,
                          status=raw.status, iterations=raw.iterations, duals=raw.duals)

    def controls(self, solution: LpSolution, N: int) -> np.ndarray:
        """Control sequence as an (N, m) array."""
        return solution.u.reshape(N, self.instance.m)

    def value_function(self, x0: np.ndarray, N: int) -> Tuple[float, np.ndarray]:
        """V_N(x0) and an optimal control sequence (N, m)."""
        ocp = self.build_ocp(x0, N)
        solution = self.solve_lp(ocp)
        u = self.controls(solution, N)
        recomputed = self.cost_over_horizon(ocp.x0, u)
        if abs(recomputed - solution.objective) > self.tol * max(1.0, abs(recomputed)) * 100:
            raise NumericalFailure(
                f"LP objective {solution.objective} disagrees with simulated cost {recomputed}")
        logger.debug("V_%d = %.9g after %d pivots", N, solution.objective, solution.iterations)
        return solution.objective, u

    def cost_over_horizon(self, x0: np.ndarray, controls: np.ndarray) -> float:
        """J_N(x0, u) by forward simulation; x(N) is not charged."""
        x = np.asarray(x0, dtype=float)
        total = 0.0
        for u in np.asarray(controls, dtype=float):
            total += self.instance.costs.stage_cost(x, u)
            x = x + self.B @ u
        return float(total)

    def value_sweep(self, x0: np.ndarray, horizons: Iterable[int]) -> Dict[int, float]:
        """V_N(x0) for several horizons."""
        return {N: self.value_function(x0, N)[0] for N in horizons}

    @staticmethod
    def export_lp(ocp: FiniteOcp, path) -> None:
        """Plain-text dump of min c'u s.t. A u <= b, u >= 0."""
        rows, cols = ocp.A.shape
        lines = [
            "# min c'u + offset  s.t.  A u <= b,  u >= 0",
            f"# horizon {ocp.horizon}",
            f"variables {cols}",
            f"rows {rows}",
            f"offset {ocp.offset!r}",
            "c " + " ".join(repr(float(v)) for v in ocp.c),
        ]
        for i in range(rows):
            label = ocp.row_labels[i] if i < len(ocp.row_labels) else f"row {i + 1}"
            coeffs = " ".join(f"{j + 1}:{float(ocp.A[i, j])!r}" for j in np.flatnonzero(ocp.A[i]))
            lines.append(f"row [{label}] {coeffs} <= {float(ocp.b[i])!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
