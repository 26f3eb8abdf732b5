"""Test the optimal-bound geometric program."""
import itertools
import json

import numpy as np
import pytest

from conftest import PAPER_LAMBDA, single_vertex_doc
from control.admissible_manager import AdmissibleManager
from control.gp_solver import (ROW_BOUND, ROW_CAP, ROW_LAMBDA, ROW_UPSTREAM, BarrierSolver, GpManager,
                               LambdaOverride, assemble_gp, evaluate_rows, phase_one_problem)
from network.models import GpSolution
from utils.exceptions import BoundsRequired, CertificateMismatch, InfeasibleInput, NumericalFailure


def terms_of(row):
    return sorted((t.coefficient, t.exponents) for t in row.terms)


def grid_gamma(admissible, points_per_axis):
    """Smallest max_i p-hat_i / s_i over a lambda grid restricted to L."""
    instance = admissible.instance
    n = instance.n
    axis = np.linspace(1.0 / points_per_axis, 1.0, points_per_axis)
    lam = np.array(list(itertools.product(axis, repeat=n)))
    x_max, u_max = instance.bounds.x_max, instance.bounds.u_max
    gain = admissible.gain
    scaled = lam * x_max
    caps = u_max[list(gain.selected_edge)]
    feasible = np.all(scaled <= caps * (1 + 1e-12), axis=1)
    feasible &= np.all(scaled @ admissible.routing.T <= scaled * (1 + 1e-12), axis=1)

    s, r = instance.costs.s, instance.costs.r
    p_hat = np.zeros((lam.shape[0], n + 1))
    for vertex in gain.routing_order():
        i = vertex - 1
        p_hat[:, i] = s[i] / lam[:, i] + r[gain.selected_edge[i]] + p_hat[:, gain.nu[i] - 1]
    gamma = np.max(p_hat[:, :n] / s, axis=1)
    return float(np.min(gamma[feasible]))


def test_single_vertex_rows(single):
    problem = assemble_gp(AdmissibleManager(single))
    assert problem.n_vars == 2
    assert [len(problem.rows_of_kind(k)) for k in (ROW_LAMBDA, ROW_CAP, ROW_UPSTREAM, ROW_BOUND)] == [1, 1, 0, 1]
    assert terms_of(problem.rows_of_kind(ROW_BOUND)[0]) == [(1.0, (-1, -1)), (1.0, (-1, 0))]


def test_chain_rows(chain):
    problem = assemble_gp(AdmissibleManager(chain))
    upstream = problem.rows_of_kind(ROW_UPSTREAM)
    assert len(upstream) == 1
    assert terms_of(upstream[0]) == [(1.0, (0, 1, -1))]
    bound = problem.rows_of_kind(ROW_BOUND)
    assert terms_of(bound[0]) == [(1.0, (-1, -1, 0)), (1.0, (-1, 0, -1))]
    assert terms_of(bound[1]) == [(1.0, (-1, 0, -1))]
    cap = problem.rows_of_kind(ROW_CAP)[0]
    assert terms_of(cap) == [(2.0, (0, 1, 0))]


def test_example1_rows_at_paper_point(example1):
    problem = assemble_gp(AdmissibleManager(example1))
    assert len(problem.rows) == 5 + 5 + 2 + 5
    values = evaluate_rows(problem, np.concatenate([[6.4], PAPER_LAMBDA]))
    assert np.all(values <= 1 + 1e-12)
    assert values[[r.label for r in problem.rows].index("bound 1")] == pytest.approx(1.0)


def test_requires_bounds(example1):
    with pytest.raises(BoundsRequired):
        assemble_gp(AdmissibleManager(example1.without_bounds()))


def test_single_vertex_optimum(single):
    gp = GpManager(AdmissibleManager(single))
    solution = gp.solve_gp()
    assert solution.gamma_star == pytest.approx(2.0, abs=1e-6)
    assert solution.lambda_star[0] == pytest.approx(1.0, abs=1e-6)
    assert not solution.flat_face
    assert solution.method == "barrier"


def test_chain_optimum(chain):
    gp = GpManager(AdmissibleManager(chain))
    solution = gp.solve_gp()
    assert solution.gamma_star == pytest.approx(3.0, abs=1e-6)
    assert np.allclose(solution.lambda_star, [0.5, 1.0], atol=1e-6)
    assert gp.certificate_check(solution).max_violation <= 1e-8


def test_example1_optimum(example1):
    gp = GpManager(AdmissibleManager(example1))
    solution = gp.solve_gp()
    assert solution.gamma_star == pytest.approx(6.4, abs=1e-5)
    assert np.allclose(solution.lambda_star[:3], [0.25, 0.25, 1.0], atol=1e-6)
    assert not solution.degraded
    assert solution.kkt_residual < 1e-4
    assert {"cap 1->2", "cap 2->3", "lambda_3 <= 1", "bound 1"} <= set(solution.binding)
    # lambda_4 and lambda_5 are free on the optimal face
    assert solution.flat_face
    lam4, lam5 = solution.lambda_star[3:]
    assert lam4 >= 1 / 5.4 - 1e-6 and lam5 >= 1 / 4.9 - 1e-6
    assert lam4 + lam5 <= 0.75 + 1e-9


def test_example1_certificate(example1):
    gp = GpManager(AdmissibleManager(example1))
    solution = gp.solve_gp()
    report = gp.certificate_check(solution)
    assert report.max_violation <= 1e-8
    assert report.gamma_recomputed == pytest.approx(solution.gamma_star, rel=1e-6)
    assert report.violated_rows == ()


def test_certificate_rejects_perturbed_lambda(example1):
    gp = GpManager(AdmissibleManager(example1))
    solution = gp.solve_gp()
    lam = np.array(solution.lambda_star)
    lam[2] = 1.01
    bad = GpSolution(gamma_star=solution.gamma_star, lambda_star=lam, kkt_residual=0.0, iterations=0)
    with pytest.raises(CertificateMismatch, match="lambda_3 <= 1"):
        gp.certificate_check(bad)


def test_certificate_rejects_understated_gamma(example1):
    gp = GpManager(AdmissibleManager(example1))
    solution = gp.solve_gp()
    bad = GpSolution(gamma_star=0.99 * solution.gamma_star, lambda_star=solution.lambda_star,
                     kkt_residual=0.0, iterations=0)
    with pytest.raises(CertificateMismatch, match="bound 1"):
        gp.certificate_check(bad)


def test_upper_override_moves_optimum(single):
    gp = GpManager(AdmissibleManager(single), [LambdaOverride(1, upper=0.5)])
    solution = gp.solve_gp()
    assert solution.lambda_star[0] == pytest.approx(0.5, abs=1e-6)
    assert solution.gamma_star == pytest.approx(3.0, abs=1e-5)


def test_contradictory_overrides_are_infeasible(manager):
    instance = manager.parse(single_vertex_doc(u_max=0.5))
    gp = GpManager(AdmissibleManager(instance), [LambdaOverride(1, lower=0.9)])
    with pytest.raises(InfeasibleInput):
        gp.solve_gp()


def test_bisection_agrees_with_barrier(chain):
    gp = GpManager(AdmissibleManager(chain))
    point, rounds = gp._bisect_gamma(gp.start_point())
    assert rounds > 0
    assert point[0] == pytest.approx(3.0, rel=1e-6)


def test_phase_one_substitutes_fixed_variables(chain):
    problem = assemble_gp(AdmissibleManager(chain))
    sub, free = phase_one_problem(problem, {0: 2.0})
    assert free == [1, 2]
    bound = [row for row in sub.rows if row.label == "bound 2"][0]
    assert terms_of(bound) == [(0.5, (-1, 0, -1))]


def test_rows_are_convex_in_log_space(example1, rng):
    solver = BarrierSolver(assemble_gp(AdmissibleManager(example1)))
    for _ in range(200):
        z1, z2 = rng.normal(0, 1.5, 6), rng.normal(0, 1.5, 6)
        theta = rng.uniform(0, 1)
        mixed = solver.row_values(theta * z1 + (1 - theta) * z2)
        assert np.all(mixed <= theta * solver.row_values(z1) + (1 - theta) * solver.row_values(z2) + 1e-12)


def test_gamma_star_matches_grid_search(random_instance, rng):
    for _ in range(10):
        n = int(rng.integers(1, 4))
        instance = random_instance(n, extra_edges=1)
        admissible = AdmissibleManager(instance)
        solution = GpManager(admissible).solve_gp()
        points = 400 if n <= 2 else 100
        brute = grid_gamma(admissible, points)
        assert solution.gamma_star <= brute + 1e-6
        assert brute <= solution.gamma_star * (1.10 if n <= 2 else 1.5)


def corner_instance(manager):
    """Single vertex whose optimum has the cap row and the bound row both active."""
    return manager.parse(single_vertex_doc(u_max=0.64948, s=0.60915, r=0.37232, x_max=0.83849))


def test_optimum_at_cap_and_bound_corner(manager):
    gp = GpManager(AdmissibleManager(corner_instance(manager)))
    solution = gp.solve_gp()
    lam = 0.64948 / 0.83849
    assert solution.method == "barrier"
    assert not solution.degraded
    assert solution.lambda_star[0] == pytest.approx(lam, rel=1e-6)
    assert solution.gamma_star == pytest.approx(1.0 / lam + 0.37232 / 0.60915, rel=1e-6)
    assert solution.kkt_residual < 1e-4
    assert gp.certificate_check(solution).max_violation <= 1e-8


def test_barrier_solves_random_instances(random_instance, rng):
    for _ in range(40):
        admissible = AdmissibleManager(random_instance(int(rng.integers(1, 4)), extra_edges=1))
        gp = GpManager(admissible)
        solution = gp.solve_gp()
        assert not solution.degraded
        assert admissible.membership(solution.lambda_star).is_in
        gp.certificate_check(solution)


def fail_every_solve(self, y0, t0=1.0, target=None):
    raise NumericalFailure("stalled", best=np.log([1.0082, 0.78097]))


def test_failed_solves_fall_back_to_an_admissible_iterate(manager, monkeypatch):
    monkeypatch.setattr(BarrierSolver, "solve", fail_every_solve)
    admissible = AdmissibleManager(corner_instance(manager))
    gp = GpManager(admissible)
    solution = gp.solve_gp()
    assert solution.degraded
    assert solution.method == "best-iterate"
    assert admissible.membership(solution.lambda_star).is_in
    assert solution.gamma_star >= 1.0 / (0.64948 / 0.83849) + 0.37232 / 0.60915 - 1e-9
    gp.certificate_check(solution)


def test_bisection_failure_reports_a_full_point(chain, monkeypatch):
    monkeypatch.setattr(BarrierSolver, "solve", fail_every_solve)
    gp = GpManager(AdmissibleManager(chain))
    start = gp.start_point()
    with pytest.raises(NumericalFailure) as info:
        gp._bisect_gamma(start)
    assert np.allclose(np.exp(info.value.best), start)


@pytest.mark.parametrize("factor", [0.1, 3.7])
def test_gamma_star_is_scale_invariant(manager, factor):
    doc = json.loads(manager.bundled_path().read_text(encoding="utf-8"))
    base = GpManager(AdmissibleManager(manager.parse(doc))).solve_gp()
    doc["s"] = [factor * v for v in doc["s"]]
    for edge in doc["edges"]:
        edge["r"] = factor * edge.get("r", 0.0)
    scaled = GpManager(AdmissibleManager(manager.parse(doc))).solve_gp()
    assert scaled.gamma_star == pytest.approx(base.gamma_star, rel=1e-6)
    assert scaled.gamma_star == pytest.approx(6.4, abs=1e-5)
