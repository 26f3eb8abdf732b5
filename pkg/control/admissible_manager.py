"""
Admissible Manager - scaled feedback u = K Lambda x, admissible set L and closed-loop cost.
"""
import logging
from typing import List, Optional

import numpy as np

from control.synthesis_manager import SynthesisManager
from network.models import (CapacityBounds, ClosedLoopCertificate, FeedbackGain, MembershipResult,
                            ProblemInstance, Violation)
from utils.constants import MEMBERSHIP_IN, MEMBERSHIP_OUT, MEMBERSHIP_TOLERANCE
from utils.exceptions import BoundsRequired, LambdaNotAdmissible, NumericalFailure
from utils.formatters import format_edge
from utils.validators import validate_lambda

logger = logging.getLogger(__name__)

KIND_LAMBDA = "lambda"
KIND_EDGE_CAP = "edge-cap"
KIND_STATE = "upstream-state"


class AdmissibleManager:
    """Builds and certifies the scaled feedback that keeps one successor per vertex."""

    def __init__(self, instance: ProblemInstance, gain: Optional[FeedbackGain] = None):
        """Initialize with an instance and optionally a precomputed gain."""
        self.instance = instance
        self.synthesis = SynthesisManager(instance)
        if gain is None:
            _, gain = self.synthesis.synthesize()
        self.gain = gain
        self.B = self.synthesis.incidence.B
        self.routing = self.synthesis.routing_matrix(gain)

    def _require_bounds(self) -> CapacityBounds:
        if self.instance.bounds is None:
            raise BoundsRequired("This operation requires capacity bounds (x_max, u_max)")
        return self.instance.bounds

    def membership(self, lam: np.ndarray, tol: float = MEMBERSHIP_TOLERANCE) -> MembershipResult:
        """Decide lambda in L: K Lambda x_max <= u_max and B K Lambda x_max <= 0.

        Rows are normalised by their bound before comparison with tol.
        """
        bounds = self._require_bounds()
        lam = np.asarray(lam, dtype=float)
        graph = self.instance.graph
        violations: List[Violation] = []

        for i, value in enumerate(lam):
            if not (0.0 < value <= 1.0 + tol):
                violations.append(Violation(KIND_LAMBDA, i, f"lambda_{i + 1}", float(value), 1.0))

        scaled = lam * bounds.x_max
        flows = self.gain.K @ scaled
        for k in self.gain.selected_edge:
            ratio = flows[k] / bounds.u_max[k]
            if ratio - 1.0 > tol:
                label = format_edge(graph.tails[k], graph.heads[k], graph.n)
                violations.append(Violation(KIND_EDGE_CAP, k, f"edge {label}",
                                            float(flows[k]), float(bounds.u_max[k])))

        # B K Lambda x_max <= 0 in the form B~ K Lambda x_max <= Lambda x_max
        inflow = self.routing @ scaled
        for i in range(graph.n):
            if (inflow[i] - scaled[i]) / bounds.x_max[i] > tol:
                violations.append(Violation(KIND_STATE, i, f"vertex {i + 1}",
                                            float(inflow[i]), float(scaled[i])))

        decision = MEMBERSHIP_IN if not violations else MEMBERSHIP_OUT
        return MembershipResult(decision=decision, violations=tuple(violations))

    def positive_eigen_direction(self) -> np.ndarray:
        """v = sum_{j<n} (B~K)^j 1, which satisfies B~K v = v - 1 < v."""
        n = self.instance.n
        v = np.zeros(n)
        term = np.ones(n)
        for _ in range(n):
            v += term
            term = self.routing @ term
        return v

    def feasible_lambda(self) -> np.ndarray:
        """A point of L built as Lambda x_max = alpha v with the largest admissible alpha."""
        bounds = self._require_bounds()
        v = self.positive_eigen_direction()
        sel_caps = bounds.u_max[list(self.gain.selected_edge)]
        alpha = float(min(np.min(bounds.x_max / v), np.min(sel_caps / v)))
        lam = np.minimum(alpha * v / bounds.x_max, 1.0)

        result = self.membership(lam)
        if not result.is_in:
            raise NumericalFailure(f"Constructed lambda is not admissible: {result.violations}")
        logger.debug("Feasible lambda %s (alpha=%.6g)", lam, alpha)
        return lam

    def closed_loop_cost_vector(self, lam: np.ndarray) -> np.ndarray:
        """p-hat = -(BK)^{-T} (Lambda^{-1} s + K' r) by back-substitution along the routing tree."""
        lam = np.asarray(lam, dtype=float)
        n = self.instance.n
        valid, msg = validate_lambda(lam, n)
        if not valid:
            raise LambdaNotAdmissible(msg)
        if self.instance.bounds is not None:
            result = self.membership(lam)
            if not result.is_in:
                rows = ", ".join(v.label for v in result.violations)
                raise LambdaNotAdmissible(f"lambda is outside L (violated: {rows})")

        s, r = self.instance.costs.s, self.instance.costs.r
        p_hat = np.zeros(n + 1)
        for vertex in self.gain.routing_order():
            i = vertex - 1
            k = self.gain.selected_edge[i]
            p_hat[i] = s[i] / lam[i] + r[k] + p_hat[self.gain.nu[i] - 1]
        return p_hat[:n]

    def gamma_of(self, p_hat: np.ndarray) -> float:
        """gamma = max_i p-hat_i / s_i."""
        return float(np.max(np.asarray(p_hat) / self.instance.costs.s))

    def certify(self, lam: np.ndarray) -> ClosedLoopCertificate:
        """Closed-loop cost vector and bound of an admissible scaling."""
        p_hat = self.closed_loop_cost_vector(lam)
        return ClosedLoopCertificate(lam=np.asarray(lam, dtype=float), p_hat=p_hat,
                                     gamma=self.gamma_of(p_hat))

    def scaled_feedback_apply(self, lam: np.ndarray, x: np.ndarray) -> np.ndarray:
        """u = K Lambda x."""
        return self.gain.K @ (np.asarray(lam, dtype=float) * np.asarray(x, dtype=float))

    def one_step_violations(self, x: np.ndarray, u: np.ndarray, tol: float = 1e-9) -> List[str]:
        """Conditions of one admissible step that fail: u in U(x), u in the caps, x + Bu in X."""
        graph = self.instance.graph
        bounds = self.instance.bounds
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        failures = []

        for k in np.flatnonzero(u < -tol):
            failures.append(f"negative flow on edge {format_edge(graph.tails[k], graph.heads[k], graph.n)}")
        for vertex in range(1, graph.n + 1):
            block = graph.block(vertex)
            sent = float(np.sum(u[block.start:block.stop]))
            if sent > x[vertex - 1] + tol:
                failures.append(f"vertex {vertex} sends {sent:.6g} > stored {x[vertex - 1]:.6g}")
        if bounds is not None:
            for k in np.flatnonzero(u > bounds.u_max + tol):
                label = format_edge(graph.tails[k], graph.heads[k], graph.n)
                failures.append(f"edge {label} flow {u[k]:.6g} > cap {bounds.u_max[k]:.6g}")

        successor = x + self.B @ u
        for i in np.flatnonzero(successor < -tol):
            failures.append(f"vertex {i + 1} becomes negative ({successor[i]:.6g})")
        if bounds is not None:
            for i in np.flatnonzero(successor > bounds.x_max + tol):
                failures.append(f"vertex {i + 1} overflows ({successor[i]:.6g} > {bounds.x_max[i]:.6g})")
        return failures

    def admissibility_witnesses(self) -> dict:
        """States showing why the unscaled feedback u = Kx fails the bounds.

        'edge_cap': a single full vertex whose transfer exceeds its edge cap.
        'upstream': upstream vertices filled up to their caps overflowing their common successor.
        """
        bounds = self._require_bounds()
        n = self.instance.n
        K = self.gain.K
        witnesses = {}

        for i in range(n):
            k = self.gain.selected_edge[i]
            if bounds.x_max[i] > bounds.u_max[k] * (1.0 + MEMBERSHIP_TOLERANCE):
                x = np.zeros(n)
                x[i] = bounds.x_max[i]
                if self.one_step_violations(x, K @ x):
                    witnesses["edge_cap"] = x
                    break

        for j in range(1, n + 1):
            upstream = [i for i in range(n) if self.gain.nu[i] == j]
            if not upstream:
                continue
            x = np.zeros(n)
            for i in upstream:
                x[i] = min(bounds.x_max[i], bounds.u_max[self.gain.selected_edge[i]])
            if self.one_step_violations(x, K @ x):
                witnesses["upstream"] = x
                break
        return witnesses
