"""
Dense revised simplex for min c'x s.t. A x <= b, x >= 0 with b >= 0.

The slack basis is feasible because b >= 0, so no first phase is needed.
Pivoting follows Bland's rule (lowest-index entering variable, lowest-index leaving
basic variable among ratio ties), which terminates and makes the returned vertex a
deterministic function of (c, A, b).
"""
import logging
from typing import Optional

import numpy as np

from network.models import LpSolution
from utils.constants import LP_TOLERANCE, MAX_SIMPLEX_ITERATIONS, REFACTOR_EVERY
from utils.exceptions import InputError, MaxIterations, Unbounded

logger = logging.getLogger(__name__)

STATUS_OPTIMAL = "optimal"
RATIO_TIE = 1e-12


class RevisedSimplex:
    """Revised simplex with an explicit basis inverse and periodic refactorisation."""

    def __init__(self, c: np.ndarray, A: np.ndarray, b: np.ndarray,
                 tol: float = LP_TOLERANCE, max_iterations: int = MAX_SIMPLEX_ITERATIONS):
        """Initialize with the LP data."""
        self.c = np.asarray(c, dtype=float)
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.tol = tol
        self.max_iterations = max_iterations
        rows, cols = self.A.shape
        if self.c.shape != (cols,) or self.b.shape != (rows,):
            raise InputError(f"LP dimensions disagree: A {self.A.shape}, b {self.b.shape}, c {self.c.shape}")
        if np.any(self.b < -tol):
            raise InputError("Right-hand side must be nonnegative for the slack start")

    def solve(self) -> LpSolution:
        """Run the simplex iterations to an optimal vertex."""
        rows, cols = self.A.shape
        full = np.hstack([self.A, np.eye(rows)])
        cost = np.concatenate([self.c, np.zeros(rows)])
        b = np.maximum(self.b, 0.0)

        basis = list(range(cols, cols + rows))
        B_inv = np.eye(rows)
        x_B = b.copy()

        for iteration in range(self.max_iterations + 1):
            if iteration and iteration % REFACTOR_EVERY == 0:
                B_inv = np.linalg.inv(full[:, basis])
                x_B = np.maximum(B_inv @ b, 0.0)

            y = cost[basis] @ B_inv
            reduced = cost - y @ full
            reduced[basis] = 0.0
            entering = np.flatnonzero(reduced < -self.tol)
            if entering.size == 0:
                return self._finish(full, cost, b, basis, iteration)
            q = int(entering[0])

            direction = B_inv @ full[:, q]
            rows_pos = np.flatnonzero(direction > self.tol)
            if rows_pos.size == 0:
                raise Unbounded(f"LP unbounded along variable {q}")
            ratios = x_B[rows_pos] / direction[rows_pos]
            best = float(ratios.min())
            tied = rows_pos[ratios <= best + RATIO_TIE * max(1.0, best)]
            r = int(min(tied, key=lambda i: basis[i]))

            theta = x_B[r] / direction[r]
            x_B = np.maximum(x_B - theta * direction, 0.0)
            x_B[r] = theta
            pivot_row = B_inv[r] / direction[r]
            B_inv -= np.outer(direction, pivot_row)
            B_inv[r] = pivot_row
            basis[r] = q

        raise MaxIterations(f"Simplex stopped after {self.max_iterations} iterations")

    def _finish(self, full, cost, b, basis, iterations) -> LpSolution:
        rows, cols = self.A.shape
        B_inv = np.linalg.inv(full[:, basis])
        x_B = B_inv @ b
        x_B[np.abs(x_B) <= self.tol] = 0.0
        solution = np.zeros(cols + rows)
        solution[basis] = np.maximum(x_B, 0.0)
        x = solution[:cols]
        duals = cost[basis] @ B_inv
        logger.debug("Simplex optimal after %d iterations", iterations)
        return LpSolution(objective=float(self.c @ x), u=x, basis=tuple(int(j) for j in basis),
                          status=STATUS_OPTIMAL, iterations=iterations, duals=duals)


def complementary_slackness_residual(c: np.ndarray, A: np.ndarray, b: np.ndarray,
                                     solution: LpSolution) -> float:
    """max |y_j (b - Ax)_j| and |x_k (c - A'y)_k| at the returned basis."""
    x = solution.u
    y: Optional[np.ndarray] = solution.duals
    if y is None:
        return float("nan")
    slack = b - A @ x
    reduced = c - A.T @ y
    return float(max(np.max(np.abs(y * slack), initial=0.0),
                     np.max(np.abs(x * reduced), initial=0.0)))


def dual_infeasibility(c: np.ndarray, A: np.ndarray, solution: LpSolution) -> float:
    """Largest violation of y <= 0 and c - A'y >= 0."""
    y = solution.duals
    reduced = c - A.T @ y
    return float(max(np.max(y, initial=0.0), -np.min(reduced, initial=0.0), 0.0))
