"""
GP Solver - optimal bound gamma* over admissible scalings as a geometric program.

Variables are y = log(gamma, lambda_1..lambda_n). Every posynomial row becomes
g(y) = log sum_k exp(a_k'y + log c_k) <= 0, which is convex; the solver minimises
y_0 with a log-barrier and damped Newton steps. Exponents are in {-1, 0, 1}, so the
row matrices are small signed selector matrices and gradients/Hessians are exact.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from control.admissible_manager import AdmissibleManager
from network.models import CertificateReport, GpProblem, GpRow, GpSolution, Monomial
from utils.constants import (CERTIFICATE_TOLERANCE, GP_ACCEPTABLE_GAP, GP_BARRIER_FACTOR,
                             GP_BISECTION_TOLERANCE, GP_DUALITY_TOLERANCE, GP_INTERIOR_SHRINK,
                             GP_MAX_NEWTON_STEPS, GP_MAX_OUTER_ITERATIONS, GP_NEWTON_TOLERANCE,
                             GP_STALL_ACCEPT, GP_STALL_TOLERANCE, LINE_SEARCH_ALPHA, LINE_SEARCH_BETA)
from utils.exceptions import CertificateMismatch, InfeasibleInput, InputError, NumericalFailure

logger = logging.getLogger(__name__)

ROW_LAMBDA = "lambda-max"
ROW_CAP = "edge-cap"
ROW_UPSTREAM = "upstream"
ROW_BOUND = "bound"
ROW_OVERRIDE = "override"
ROW_FLOOR = "floor"

BINDING_TOLERANCE = 1e-6
ROW_VIOLATION_TOLERANCE = 1e-8
LAMBDA_FLOOR = 1e-9


@dataclass(frozen=True)
class LambdaOverride:
    """User bounds lower <= lambda_i <= upper added to the program."""
    vertex: int
    lower: Optional[float] = None
    upper: Optional[float] = None


def _exponents(n_vars: int, pairs: Sequence[Tuple[int, int]]) -> Tuple[int, ...]:
    exps = [0] * n_vars
    for index, power in pairs:
        exps[index] += power
    return tuple(exps)


def assemble_gp(admissible: AdmissibleManager,
                overrides: Sequence[LambdaOverride] = ()) -> GpProblem:
    """Rows of min gamma s.t. lambda in L and gamma s >= p-hat(lambda), normalised to <= 1.

    Variable 0 is gamma, variable i is lambda_i.
    """
    instance = admissible.instance
    bounds = admissible._require_bounds()
    gain = admissible.gain
    n = instance.n
    n_vars = n + 1
    s, r = instance.costs.s, instance.costs.r
    x_max, u_max = bounds.x_max, bounds.u_max
    rows: List[GpRow] = []

    for i in range(n):
        rows.append(GpRow(ROW_LAMBDA, f"lambda_{i + 1} <= 1",
                          (Monomial(1.0, _exponents(n_vars, [(i + 1, 1)])),)))

    graph = instance.graph
    for i in range(n):
        k = gain.selected_edge[i]
        head = "goal" if graph.is_goal_edge(k) else str(graph.heads[k])
        rows.append(GpRow(ROW_CAP, f"cap {i + 1}->{head}",
                          (Monomial(float(x_max[i] / u_max[k]), _exponents(n_vars, [(i + 1, 1)])),)))

    for i in range(n):
        upstream = np.flatnonzero(admissible.routing[i])
        if upstream.size == 0:
            continue
        terms = tuple(
            Monomial(float(admissible.routing[i, j] * x_max[j] / x_max[i]),
                     _exponents(n_vars, [(j + 1, 1), (i + 1, -1)]))
            for j in upstream
        )
        rows.append(GpRow(ROW_UPSTREAM, f"upstream {i + 1}", terms))

    for i in range(n):
        terms = []
        edge_cost = 0.0
        vertex = i + 1
        while vertex != n + 1:
            j = vertex - 1
            terms.append(Monomial(float(s[j] / s[i]), _exponents(n_vars, [(0, -1), (j + 1, -1)])))
            edge_cost += float(r[gain.selected_edge[j]])
            vertex = gain.nu[j]
        if edge_cost > 0.0:
            terms.append(Monomial(edge_cost / float(s[i]), _exponents(n_vars, [(0, -1)])))
        rows.append(GpRow(ROW_BOUND, f"bound {i + 1}", tuple(terms)))

    for override in overrides:
        i = override.vertex
        if not 1 <= i <= n:
            raise InputError(f"Override vertex {i} out of range 1..{n}")
        if override.upper is not None:
            if override.upper <= 0:
                raise InputError(f"Upper override for lambda_{i} must be > 0")
            rows.append(GpRow(ROW_OVERRIDE, f"lambda_{i} <= {override.upper:g}",
                              (Monomial(1.0 / override.upper, _exponents(n_vars, [(i, 1)])),)))
        if override.lower is not None:
            if override.lower <= 0:
                raise InputError(f"Lower override for lambda_{i} must be > 0")
            rows.append(GpRow(ROW_OVERRIDE, f"lambda_{i} >= {override.lower:g}",
                              (Monomial(override.lower, _exponents(n_vars, [(i, -1)])),)))

    names = ("gamma",) + tuple(f"lambda_{i + 1}" for i in range(n))
    return GpProblem(n_vars=n_vars, rows=tuple(rows), variable_names=names)


def evaluate_rows(problem: GpProblem, values: np.ndarray) -> np.ndarray:
    """Posynomial values of every row at positive variables (original space)."""
    values = np.asarray(values, dtype=float)
    out = np.zeros(len(problem.rows))
    for idx, row in enumerate(problem.rows):
        out[idx] = sum(term.coefficient * float(np.prod(values ** np.array(term.exponents)))
                       for term in row.terms)
    return out


class BarrierSolver:
    """Log-barrier interior-point method for GPs in log variables."""

    def __init__(self, problem: GpProblem):
        """Compile every row into (exponent matrix, log coefficients)."""
        self.problem = problem
        self.compiled = []
        for row in problem.rows:
            E = np.array([term.exponents for term in row.terms], dtype=float)
            beta = np.log(np.array([term.coefficient for term in row.terms], dtype=float))
            self.compiled.append((E, beta))
        self.n_rows = len(self.compiled)

    def row_values(self, y: np.ndarray) -> np.ndarray:
        """g_j(y) = logsumexp(E_j y + beta_j)."""
        out = np.empty(self.n_rows)
        for j, (E, beta) in enumerate(self.compiled):
            z = E @ y + beta
            top = np.max(z)
            out[j] = top + np.log(np.sum(np.exp(z - top)))
        return out

    def _derivatives(self, y: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """Gradient and Hessian of t*y_0 - sum log(-g_j)."""
        dim = y.size
        grad = np.zeros(dim)
        grad[0] = t
        hess = np.zeros((dim, dim))
        for E, beta in self.compiled:
            z = E @ y + beta
            top = np.max(z)
            weights = np.exp(z - top)
            total = np.sum(weights)
            g = top + np.log(total)
            if g >= 0:
                raise NumericalFailure("Barrier iterate left the feasible region", best=None)
            pi = weights / total
            dg = E.T @ pi
            d2g = E.T @ (np.diag(pi) - np.outer(pi, pi)) @ E
            grad += dg / -g
            hess += d2g / -g + np.outer(dg, dg) / (g * g)
        return grad, hess

    @staticmethod
    def _newton_step(grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
        """-H^{-1} grad, solved on the diagonally scaled Hessian."""
        diag = np.diag(hess)
        d = np.sqrt(np.where(diag > 0, diag, 1.0))
        scaled = hess / np.outer(d, d)
        try:
            return -np.linalg.solve(scaled, grad / d) / d
        except np.linalg.LinAlgError:
            return -np.linalg.lstsq(scaled, grad / d, rcond=None)[0] / d

    def _line_search(self, y: np.ndarray, delta: np.ndarray, t: float,
                     decrement: float) -> Optional[np.ndarray]:
        """Backtracking on the change of the barrier, or None when no step decreases it."""
        log_slack = np.log(-self.row_values(y))
        size = 1.0
        while size > 1e-14:
            trial = y + size * delta
            g = self.row_values(trial)
            if np.all(g < 0):
                change = t * size * delta[0] - float(np.sum(np.log(-g) - log_slack))
                if change <= -LINE_SEARCH_ALPHA * size * decrement:
                    return trial
            size *= LINE_SEARCH_BETA
        return None

    def _center(self, y: np.ndarray, t: float) -> Tuple[np.ndarray, int]:
        """Damped Newton on the barrier problem at parameter t."""
        centred = max(GP_NEWTON_TOLERANCE, GP_STALL_TOLERANCE * t)
        decrement = np.inf
        for step in range(1, GP_MAX_NEWTON_STEPS + 1):
            grad, hess = self._derivatives(y, t)
            delta = self._newton_step(grad, hess)
            decrement = float(-grad @ delta)
            if decrement / 2.0 <= centred:
                return y, step
            trial = self._line_search(y, delta, t, decrement)
            if trial is None:
                if decrement / 2.0 <= GP_STALL_ACCEPT * t:
                    logger.debug("Line search stalled at t=%.3g (decrement %.3e), iterate kept", t, decrement)
                    return y, step
                raise NumericalFailure(f"Newton stagnation at t={t:.3g} (decrement {decrement:.3e})",
                                       best=y)
            y = trial
        if decrement / 2.0 <= GP_STALL_ACCEPT * t:
            return y, GP_MAX_NEWTON_STEPS
        raise NumericalFailure(f"Newton did not converge in {GP_MAX_NEWTON_STEPS} steps at t={t:.3g}",
                               best=y)

    def solve(self, y0: np.ndarray, t0: float = 1.0,
              target: Optional[float] = None) -> Tuple[np.ndarray, int, float]:
        """Minimise y_0 from a strictly feasible start; returns (y, Newton steps, KKT residual).

        With a target, stops as soon as an iterate lies below it or the duality gap puts the
        optimum above it.
        """
        y = np.array(y0, dtype=float)
        if np.any(self.row_values(y) >= 0):
            raise NumericalFailure("Barrier start is not strictly feasible", best=None)
        t = t0
        total_steps = 0
        centred: Optional[Tuple[np.ndarray, float]] = None
        for outer in range(GP_MAX_OUTER_ITERATIONS):
            try:
                y, steps = self._center(y, t)
            except NumericalFailure as e:
                if centred is None or self.n_rows / centred[1] > GP_ACCEPTABLE_GAP:
                    raise
                y, t = centred
                logger.debug("Centring failed (%s); keeping the iterate at gap %.3g", e, self.n_rows / t)
                return y, total_steps, self.kkt_residual(y, t)
            total_steps += steps
            centred = (y, t)
            logger.debug("Barrier outer %d: t=%.3g y0=%.12g (%d Newton steps)", outer, t, y[0], steps)
            if target is not None and (y[0] < target or y[0] - self.n_rows / t > target):
                return y, total_steps, self.kkt_residual(y, t)
            if self.n_rows / t < GP_DUALITY_TOLERANCE:
                return y, total_steps, self.kkt_residual(y, t)
            t *= GP_BARRIER_FACTOR
        raise NumericalFailure("Barrier parameter limit reached", best=y)

    def kkt_residual(self, y: np.ndarray, t: float) -> float:
        """max of stationarity |e_0 + sum mu_j grad g_j| and complementarity m/t."""
        stationarity = np.zeros(y.size)
        stationarity[0] = 1.0
        for E, beta in self.compiled:
            z = E @ y + beta
            top = np.max(z)
            weights = np.exp(z - top)
            g = top + np.log(np.sum(weights))
            pi = weights / np.sum(weights)
            stationarity += (E.T @ pi) / (t * -g)
        return float(max(np.max(np.abs(stationarity)), self.n_rows / t))


def phase_one_problem(problem: GpProblem, fixed: Dict[int, float]) -> Tuple[GpProblem, List[int]]:
    """min tau s.t. row_j / tau <= 1, with some variables fixed.

    Returns the problem (variable 0 = tau) and the original indices of its other variables.
    """
    free = [v for v in range(problem.n_vars) if v not in fixed]
    rows = []
    for row in problem.rows:
        terms = []
        for term in row.terms:
            coefficient = term.coefficient
            for v, value in fixed.items():
                coefficient *= value ** term.exponents[v]
            exps = (-1,) + tuple(term.exponents[v] for v in free)
            terms.append(Monomial(coefficient, exps))
        rows.append(GpRow(row.kind, row.label, tuple(terms)))
    names = ("tau",) + tuple(problem.variable_names[v] for v in free) if problem.variable_names else ()
    return GpProblem(n_vars=len(free) + 1, rows=tuple(rows), variable_names=names), free


def _phase_one(problem: GpProblem, start: np.ndarray, fixed: Dict[int, float]) -> Tuple[float, np.ndarray]:
    """Smallest tau with all rows <= tau, solved until tau < 1 or tau* >= 1 is certain.

    Returns (tau, full variable vector).
    """
    sub, free = phase_one_problem(problem, fixed)
    values = np.array(start, dtype=float)
    for v, value in fixed.items():
        values[v] = value
    tau0 = 2.0 * float(np.max(evaluate_rows(problem, values)))
    y0 = np.log(np.concatenate([[tau0], values[free]]))
    y, _, _ = BarrierSolver(sub).solve(y0, target=0.0)
    point = values.copy()
    point[free] = np.exp(y[1:])
    return float(np.exp(y[0])), point


class GpManager:
    """Assembles, solves and certifies the optimal-bound geometric program."""

    def __init__(self, admissible: AdmissibleManager, overrides: Sequence[LambdaOverride] = ()):
        """Initialize with an admissible manager (instance must carry bounds)."""
        self.admissible = admissible
        self.problem = assemble_gp(admissible, overrides)

    def start_point(self) -> np.ndarray:
        """Strictly feasible (gamma, lambda) from the constructive point of L."""
        lam = self.admissible.feasible_lambda() * GP_INTERIOR_SHRINK
        gamma = self.admissible.gamma_of(self.admissible.closed_loop_cost_vector(lam))
        point = np.concatenate([[gamma / GP_INTERIOR_SHRINK], lam])
        if np.all(evaluate_rows(self.problem, point) < 1.0):
            return point
        # gamma only enters the bound rows; search lambda alone, floored away from zero
        rows = [row for row in self.problem.rows if row.kind != ROW_BOUND]
        rows += [GpRow(ROW_FLOOR, f"lambda_{i} >= {LAMBDA_FLOOR:g}",
                       (Monomial(LAMBDA_FLOOR, _exponents(self.problem.n_vars, [(i, -1)])),))
                 for i in range(1, self.problem.n_vars)]
        reduced = GpProblem(self.problem.n_vars, tuple(rows), self.problem.variable_names)
        tau, point = _phase_one(reduced, point, fixed={0: 1.0})
        if tau >= 1.0 - 1e-12:
            raise InfeasibleInput(f"Constraint overrides leave no admissible lambda (tau*={tau:.6g})")
        lam = np.minimum(point[1:], 1.0)
        gamma = self.admissible.gamma_of(self.admissible.closed_loop_cost_vector(lam))
        return np.concatenate([[gamma / GP_INTERIOR_SHRINK], lam])

    def solve_gp(self) -> GpSolution:
        """Barrier solve, bisection on gamma as recovery, best iterate flagged degraded last."""
        start = self.start_point()
        solver = BarrierSolver(self.problem)
        method, degraded = "barrier", False
        try:
            y, iterations, kkt = solver.solve(np.log(start))
            point = np.exp(y)
        except NumericalFailure as e:
            logger.warning("Barrier method failed (%s); bisecting on gamma", e)
            try:
                point, iterations = self._bisect_gamma(start)
                method, kkt = "bisection", float("nan")
            except NumericalFailure as inner:
                logger.warning("Bisection failed (%s); returning the best admissible iterate", inner)
                point = self._best_admissible([e.best, inner.best], start)
                method, degraded, iterations, kkt = "best-iterate", True, 0, float("nan")

        lam = np.minimum(point[1:], 1.0)
        gamma = self.admissible.gamma_of(self.admissible.closed_loop_cost_vector(lam))
        full = np.concatenate([[gamma], lam])
        row_values = evaluate_rows(self.problem, full)
        binding = tuple(row.label for row, v in zip(self.problem.rows, row_values)
                        if v >= 1.0 - BINDING_TOLERANCE)
        flat = self._is_flat(full, row_values)
        if flat:
            logger.warning("Optimal face is not a single point; returned lambda is one of many optima")
        logger.info("gamma* = %.9g via %s", gamma, method)
        return GpSolution(gamma_star=gamma, lambda_star=lam, kkt_residual=kkt, iterations=iterations,
                          degraded=degraded, method=method, binding=binding, flat_face=flat)

    def _bisect_gamma(self, start: np.ndarray) -> Tuple[np.ndarray, int]:
        """Bisection on gamma with a phase-one feasibility problem per candidate."""
        hi_point = start.copy()
        hi = float(start[0])
        lo = 1.0
        rounds = 0
        while hi - lo > GP_BISECTION_TOLERANCE * hi:
            rounds += 1
            mid = 0.5 * (lo + hi)
            try:
                tau, point = _phase_one(self.problem, hi_point, fixed={0: mid})
            except NumericalFailure as e:
                raise NumericalFailure(f"Bisection stopped with gamma in [{lo:.9g}, {hi:.9g}]: {e}",
                                       best=np.log(hi_point)) from e
            if tau < 1.0:
                hi, hi_point = mid, point
            else:
                lo = mid
        return hi_point, rounds

    def _gamma_at(self, point: np.ndarray) -> float:
        return self.admissible.gamma_of(self.admissible.closed_loop_cost_vector(np.minimum(point[1:], 1.0)))

    def _best_admissible(self, candidates: Sequence[Optional[np.ndarray]], start: np.ndarray) -> np.ndarray:
        """Point of smallest gamma among log-space iterates whose lambda is in L; the start otherwise."""
        best, best_gamma = start, self._gamma_at(start)
        for y in candidates:
            if y is None or np.size(y) != self.problem.n_vars or not np.all(np.isfinite(y)):
                continue
            point = np.exp(y)
            if not self.admissible.membership(np.minimum(point[1:], 1.0)).is_in:
                logger.debug("Discarding iterate %s: lambda outside L", point)
                continue
            gamma = self._gamma_at(point)
            if gamma < best_gamma:
                best, best_gamma = point, gamma
        return best

    def _is_flat(self, point: np.ndarray, row_values: np.ndarray) -> bool:
        """Gradients of binding rows in log space do not pin every variable."""
        solver = BarrierSolver(self.problem)
        y = np.log(point)
        gradients = []
        for (E, beta), value in zip(solver.compiled, row_values):
            if value < 1.0 - BINDING_TOLERANCE:
                continue
            z = E @ y + beta
            pi = np.exp(z - np.max(z))
            gradients.append(E.T @ (pi / np.sum(pi)))
        if not gradients:
            return True
        return int(np.linalg.matrix_rank(np.array(gradients), tol=1e-8)) < self.problem.n_vars

    def certificate_check(self, solution: GpSolution) -> CertificateReport:
        """Re-evaluate every row at (gamma*, lambda*) and recompute gamma from p-hat."""
        point = np.concatenate([[solution.gamma_star], solution.lambda_star])
        values = evaluate_rows(self.problem, point)
        excess = values - 1.0
        violated = tuple(row.label for row, e in zip(self.problem.rows, excess)
                         if e > ROW_VIOLATION_TOLERANCE)
        if violated:
            raise CertificateMismatch(
                f"Rows violated at the reported solution: {', '.join(violated)} "
                f"(max excess {float(np.max(excess)):.3e})")

        recomputed = self.admissible.gamma_of(
            self.admissible.closed_loop_cost_vector(solution.lambda_star))
        if abs(recomputed - solution.gamma_star) > CERTIFICATE_TOLERANCE * recomputed:
            raise CertificateMismatch(
                f"gamma* = {solution.gamma_star:.9g} but p-hat gives {recomputed:.9g}")
        return CertificateReport(max_violation=float(max(np.max(excess), 0.0)),
                                 gamma_recomputed=recomputed, gamma_reported=solution.gamma_star,
                                 violated_rows=violated)
