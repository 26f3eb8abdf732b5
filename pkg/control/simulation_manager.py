"""
Simulation Manager - MPC feedback and closed-loop runs under the MPC, scaled and unconstrained controllers.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from control.admissible_manager import AdmissibleManager
from control.ocp_manager import OcpManager
from network.models import ProblemInstance, Trajectory
from utils.constants import (CONTROLLER_MPC, CONTROLLER_SCALED, CONTROLLER_UNCONSTRAINED, CONTROLLERS,
                             TERMINATION_MAX_STEPS, TERMINATION_REACHED_ZERO, ZERO_STATE_TOLERANCE)
from utils.exceptions import (AdmissibilityViolation, BoundsRequired, InputError, LambdaNotAdmissible,
                              TruncatedCost, X0OutOfBounds)
from utils.validators import validate_count, validate_nonnegative_vector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ControllerSpec:
    """Which closed loop to run: MPC(N), Scaled(lambda) or the unconstrained feedback Kx."""
    kind: str
    horizon: Optional[int] = None
    lam: Optional[np.ndarray] = None
    ignore_bounds: bool = False

    def __post_init__(self):
        if self.kind not in CONTROLLERS:
            raise InputError(f"Unknown controller '{self.kind}' (choose from {', '.join(CONTROLLERS)})")
        if self.kind == CONTROLLER_MPC:
            valid, msg = validate_count(self.horizon, "horizon")
            if not valid:
                raise InputError(msg)
        if self.kind == CONTROLLER_SCALED and self.lam is None:
            raise InputError("The scaled controller needs a lambda vector")
        if self.kind != CONTROLLER_SCALED and self.lam is not None:
            raise InputError("lambda is only used by the scaled controller")

    @classmethod
    def mpc(cls, horizon: int) -> "ControllerSpec":
        return cls(CONTROLLER_MPC, horizon=horizon)

    @classmethod
    def scaled(cls, lam) -> "ControllerSpec":
        return cls(CONTROLLER_SCALED, lam=np.asarray(lam, dtype=float))

    @classmethod
    def unconstrained(cls, ignore_bounds: bool = False) -> "ControllerSpec":
        return cls(CONTROLLER_UNCONSTRAINED, ignore_bounds=ignore_bounds)

    @property
    def label(self) -> str:
        if self.kind == CONTROLLER_MPC:
            return f"{self.kind}(N={self.horizon})"
        return self.kind


class SimulationManager:
    """Runs closed loops and verifies every step against the admissibility conditions.

    One manager holds no per-run state, so independent runs may share it.
    """

    def __init__(self, instance: ProblemInstance, tolerance: Optional[float] = None):
        """Initialize with an instance; the gain is synthesized once."""
        self.instance = instance
        self.admissible = AdmissibleManager(instance)
        self.gain = self.admissible.gain
        self.ocp = OcpManager(instance, tolerance)
        self.tol = self.ocp.tol
        self.zero_tol = ZERO_STATE_TOLERANCE * self.tol / 1e-9

    def mpc_feedback(self, x: np.ndarray, N: int) -> np.ndarray:
        """mu_N(x) = u*(0) of the deterministic LP solution."""
        x = np.asarray(x, dtype=float)
        if float(np.sum(np.abs(x))) <= self.zero_tol:
            return np.zeros(self.instance.m)
        _, controls = self.ocp.value_function(x, N)
        return controls[0]

    def check_spec(self, spec: ControllerSpec) -> None:
        """Instance-dependent invariants of a controller."""
        bounds = self.instance.bounds
        if spec.kind in (CONTROLLER_MPC, CONTROLLER_SCALED) and bounds is None:
            raise BoundsRequired(f"The {spec.kind} controller requires capacity bounds")
        if spec.kind == CONTROLLER_SCALED:
            lam = np.asarray(spec.lam, dtype=float)
            if lam.shape != (self.instance.n,):
                raise LambdaNotAdmissible(f"lambda has {lam.size} entries, expected {self.instance.n}")
            result = self.admissible.membership(lam)
            if not result.is_in:
                raise LambdaNotAdmissible(
                    "lambda is outside L (violated: " + ", ".join(v.label for v in result.violations) + ")")
        if spec.kind == CONTROLLER_UNCONSTRAINED and bounds is not None and not spec.ignore_bounds:
            raise InputError("The unconstrained feedback ignores capacity bounds; override them explicitly")

    def feedback(self, spec: ControllerSpec) -> Callable[[np.ndarray], np.ndarray]:
        """State feedback x -> u for a controller."""
        if spec.kind == CONTROLLER_MPC:
            return lambda x: self.mpc_feedback(x, spec.horizon)
        if spec.kind == CONTROLLER_SCALED:
            return lambda x: self.admissible.scaled_feedback_apply(spec.lam, x)
        return lambda x: self.gain.K @ np.asarray(x, dtype=float)

    def _initial_state(self, spec: ControllerSpec, x0) -> np.ndarray:
        if spec.kind == CONTROLLER_UNCONSTRAINED:
            x0 = np.asarray(x0, dtype=float)
            valid, msg = validate_nonnegative_vector(x0, "x0")
            if not valid or x0.shape != (self.instance.n,):
                raise X0OutOfBounds(msg or f"x0 must have {self.instance.n} entries")
            return x0
        return self.ocp.check_state(x0)

    def simulate(self, spec: ControllerSpec, x0, T_max: int) -> Trajectory:
        """Closed loop x(t+1) = x(t) + B u(t) until ||x||_1 <= zero tolerance or T_max steps."""
        valid, msg = validate_count(T_max, "T_max")
        if not valid:
            raise InputError(msg)
        self.check_spec(spec)
        x = self._initial_state(spec, x0)
        controller = self.feedback(spec)
        # the unconstrained loop is checked against positivity only
        checker = self.admissible
        if spec.kind == CONTROLLER_UNCONSTRAINED and self.instance.bounds is not None:
            checker = AdmissibleManager(self.instance.without_bounds(), self.gain)

        trajectory = Trajectory(controller=spec.label, states=[x.copy()])
        termination = TERMINATION_MAX_STEPS
        for t in range(T_max + 1):
            if float(np.sum(np.abs(x))) <= self.zero_tol:
                termination = TERMINATION_REACHED_ZERO
                break
            if t == T_max:
                break
            u = controller(x)
            failures = checker.one_step_violations(x, u, tol=self.tol)
            if failures:
                raise AdmissibilityViolation(f"{spec.label} step {t}: " + "; ".join(failures))
            trajectory.controls.append(u)
            trajectory.stage_costs.append(self.instance.costs.stage_cost(x, u))
            x = x + self.admissible.B @ u
            trajectory.states.append(x.copy())

        trajectory.termination = termination
        trajectory.tail = self._tail(spec, x, termination)
        logger.info("%s terminated (%s) after %d steps, cumulative cost %.9g",
                    spec.label, termination, trajectory.steps, trajectory.cumulative_cost)
        return trajectory

    def _tail(self, spec: ControllerSpec, x: np.ndarray, termination: str) -> Optional[float]:
        """Exact remaining cost where one exists."""
        if spec.kind == CONTROLLER_SCALED:
            return float(self.admissible.closed_loop_cost_vector(spec.lam) @ x)
        if spec.kind == CONTROLLER_UNCONSTRAINED:
            p = self.admissible.synthesis.solve_value_vector().p
            return float(p @ x)
        return 0.0 if termination == TERMINATION_REACHED_ZERO else None

    @staticmethod
    def closed_loop_cost(trajectory: Trajectory) -> float:
        """Cumulative stage cost plus the exact tail; MPC runs cut at T_max only give a lower bound."""
        if trajectory.tail is None:
            lower = trajectory.cumulative_cost
            logger.warning("%s did not reach zero; cost %.9g is a lower bound", trajectory.controller, lower)
            raise TruncatedCost(
                f"{trajectory.controller} stopped after {trajectory.steps} steps without reaching zero; "
                f"J >= {lower:.9g}", lower_bound=lower)
        return trajectory.cumulative_cost + trajectory.tail
