import dataclasses
import math

import numpy as np
import pytest

from qlground.discretization import Grid2D, RadialGrid
from qlground.energy import constraint_norm_sq, evaluate_J_bar, gradient_J_bar
from qlground.errors import DomainError, ModelGridError, NonConvergenceError
from qlground.model import builtin_model, gaussian_sp_bound, level_upper_bound
from qlground.solver import (ENDPOINT_TARGET, MONOTONE_TOL, PAIRING_RTOL, SolveReport, SolverOptions,
                             compute_sp, find_descent_endpoint, gaussian_profile,
                             gaussian_sweep_bound, mountain_pass_solve, random_bumps, sp_quotient,
                             verify_solution)

TINY = Grid2D(3.0, 15)


@pytest.fixture(scope="module")
def solved():
    model = builtin_model("power")
    return model, mountain_pass_solve(model, Grid2D(6.0, 31), SolverOptions(tol=1e-5))


# ---- descent endpoint ----

def test_descent_endpoint(power, small_grid):
    phi = gaussian_profile(small_grid)
    e = find_descent_endpoint(power, small_grid, phi)
    assert evaluate_J_bar(power, e).total <= ENDPOINT_TARGET
    u = power.kernel.f_inverse(e.values)
    t = u.max() / phi.values.max()
    assert math.log2(t) == pytest.approx(round(math.log2(t)), abs=1e-9)
    np.testing.assert_allclose(u, t * phi.values, rtol=1e-10, atol=1e-14)


def test_descent_endpoint_rejects_bad_profiles(power, small_grid):
    with pytest.raises(DomainError):
        find_descent_endpoint(power, small_grid, small_grid.zeros())
    with pytest.raises(DomainError):
        find_descent_endpoint(power, small_grid, small_grid.sample(lambda x1, x2: x1 + 0.0 * x2))


def test_weak_nonlinearity_has_no_endpoint(small_grid):
    model = builtin_model("power", cp=1e-30)
    with pytest.raises(ModelGridError):
        find_descent_endpoint(model, small_grid, gaussian_profile(small_grid))


# ---- S_p ----

def test_sp_quotient_is_scale_invariant(radial_grid):
    u = radial_grid.sample(lambda r: np.exp(-r ** 2) * (1.0 + 0.3 * np.cos(r)))
    q = sp_quotient(u, 2.0, 6.0)
    for lam in (1e-3, 0.5, 7.0, -2.0):
        assert sp_quotient(u.with_values(lam * u.values), 2.0, 6.0) == pytest.approx(q, rel=1e-12)
    with pytest.raises(DomainError):
        sp_quotient(radial_grid.zeros(), 2.0, 6.0)


def test_gaussian_closed_form_matches_discrete_quotient():
    grid = RadialGrid(8.0, 2000)
    a = math.pi + 0.5 * math.sqrt(math.pi)
    y = 2.0 * a / (math.pi * 4.0)
    assert math.sqrt(y) == pytest.approx(0.80065, abs=1e-5)
    u = grid.sample(lambda r: np.exp(-r ** 2 / y))
    assert sp_quotient(u, 2.0, 6.0) == pytest.approx(gaussian_sp_bound(2.0, 6.0), rel=1e-3)
    assert gaussian_sweep_bound(grid, 2.0, 6.0) >= sp_quotient(u, 2.0, 6.0) * (1 - 1e-3)


def test_compute_sp(power, radial_grid):
    result = compute_sp(power, radial_grid, restarts=3, seed=1)
    sweep = gaussian_sweep_bound(radial_grid, power.V1, power.p)
    assert 0.0 < result.value <= sweep
    assert result.value > 0.9 * sweep
    assert result.restarts_spread <= 0.01
    assert np.all(result.minimizer.values >= 0.0)
    assert sp_quotient(result.minimizer, power.V1, power.p) == pytest.approx(result.value,
                                                                             rel=1e-12)
    assert result.to_dict()["S_p"] == result.value
    with pytest.raises(DomainError):
        compute_sp(power, radial_grid, restarts=0)


# ---- mountain pass ----

def test_solve_converges_to_a_positive_critical_point(solved):
    model, report = solved
    assert report.converged
    assert report.residual_max <= 1e-5
    assert np.max(np.abs(gradient_J_bar(model, report.solution).values)) == report.residual_max
    assert 0.0 < report.energy < level_upper_bound(model.theta)
    theta = model.theta
    assert constraint_norm_sq(model, report.solution) <= (
        2.0 * theta / (theta - 4.0) * report.energy * (1 + 1e-3))
    assert np.min(report.solution.values) >= -1e-8


def test_path_maximum_never_increases(solved):
    _, report = solved
    energies = np.array([e for _, e, _ in report.history])
    assert len(energies) == report.iterations + 1
    assert np.all(np.diff(energies) <= MONOTONE_TOL * (1.0 + np.abs(energies[:-1])))


def test_solution_passes_bound_checks(solved):
    model, report = solved
    checks = verify_solution(model, report, (1e-3, 1e-2, 1e-1), seed=0)
    failed = [name for name, c in checks.items() if not c["passed"]]
    assert not failed, failed
    assert checks["geometry_largest_rho"]["value"] == 0.1
    assert checks["pairing_closed_form"]["informational"]
    assert "informational" not in checks["pairing_residual"]
    report.bound_checks = checks
    assert report.checks_passed()
    assert report.to_dict()["checks_passed"] is True


def test_level_violation_is_reported(solved):
    model, report = solved
    fake = dataclasses.replace(report, energy=0.2, bound_checks={})
    checks = verify_solution(model, fake, (1e-2,))
    assert not checks["level_upper_bound"]["passed"]
    assert checks["level_upper_bound"]["margin"] == pytest.approx(1.0 / 6.0 - 0.2)


def test_zero_solution_checks(power):
    zero = TINY.zeros()
    report = SolveReport(solution=zero, energy=0.0, residual_max=0.0, residual_l2=0.0,
                         iterations=0, breakdown=evaluate_J_bar(power, zero), converged=True)
    checks = verify_solution(power, report, (1e-2,))
    assert checks["pairing_residual"]["value"] == 0.0
    assert not checks["positive_energy"]["passed"]
    assert not checks["nontrivial"]["passed"]
    assert "embedding_constant" not in checks


@pytest.mark.parametrize("amplitude", [0.1, 0.7])
def test_pairing_check_rejects_a_non_critical_field(power, amplitude):
    grid = Grid2D(4.0, 21)
    v = grid.sample(lambda x1, x2: amplitude * np.exp(-(x1 ** 2 + x2 ** 2)))
    grad = gradient_J_bar(power, v)
    report = SolveReport(solution=v, energy=evaluate_J_bar(power, v).total,
                         residual_max=float(np.max(np.abs(grad.values))),
                         residual_l2=float(np.linalg.norm(grad.values)), iterations=0,
                         breakdown=evaluate_J_bar(power, v), converged=False)
    check = verify_solution(power, report, (1e-2,))["pairing_residual"]
    assert not check["passed"]
    assert abs(check["value"]) > PAIRING_RTOL * constraint_norm_sq(power, v)
    assert check["margin"] < 0.0


def test_pairing_check_holds_at_the_solution(solved):
    model, report = solved
    check = verify_solution(model, report, (1e-2,))["pairing_residual"]
    assert check["passed"]
    assert check["bound"] == pytest.approx(PAIRING_RTOL * constraint_norm_sq(model, report.solution))


def test_solve_is_deterministic(power):
    opts = SolverOptions(tol=1e-4)
    first = mountain_pass_solve(power, TINY, opts)
    second = mountain_pass_solve(power, TINY, opts)
    assert first.energy == second.energy
    assert first.iterations == second.iterations
    np.testing.assert_array_equal(first.solution.values, second.solution.values)


def test_sweep_cap_raises_with_best_iterate(power):
    with pytest.raises(NonConvergenceError) as info:
        mountain_pass_solve(power, TINY, SolverOptions(max_sweeps=1))
    report = info.value.report
    assert report is not None
    assert not report.converged
    assert report.iterations == 1
    assert report.residual_max > 0.0


def test_solver_options_validation():
    with pytest.raises(DomainError):
        SolverOptions(points=2)
    with pytest.raises(DomainError):
        SolverOptions(tol=0.0)
    with pytest.raises(DomainError):
        SolverOptions(armijo_shrink=1.0)


def test_random_bumps_are_seeded():
    a = random_bumps(TINY, 3, seed=5)
    b = random_bumps(TINY, 3, seed=5)
    assert len(a) == 3
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.values, y.values)
    assert not np.array_equal(a[0].values, random_bumps(TINY, 1, seed=6)[0].values)
