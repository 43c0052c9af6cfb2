import numpy as np
import pytest

from qlground.discretization import Field, Grid2D, RadialGrid
from qlground.errors import DomainError, OracleUnavailableError
from qlground.model import builtin_model
from qlground.oracle import (CONVERGED, CROSSES_ZERO, DIVERGES, ShootResult, bracket_height,
                             compare_profiles,
                             criticality_residual, find_ground_state_shooting,
                             ground_state_shooting, shoot)
from qlground.solver import SolverOptions, mountain_pass_solve

CELL = Grid2D(6.0, 128).spacing ** 2


@pytest.fixture(scope="module")
def outcome():
    return ground_state_shooting(builtin_model("constant_V_power"), 6.0, 2e-3, 1e-6, m=300)


def test_zero_height_stays_at_zero(constant_power):
    shot = shoot(constant_power, 2.0, 0.0, 1e-2)
    assert shot.classification == CONVERGED
    assert not np.any(shot.v)


def test_small_height_turns_up(constant_power):
    shot = shoot(constant_power, 2.0, 1e-4, 1e-3)
    assert shot.classification == DIVERGES
    np.testing.assert_array_equal(shot.trajectory[0], [0.0, 1e-4, 0.0])


def test_large_height_crosses_zero(constant_power):
    shot = shoot(constant_power, 2.0, 5.0, 1e-4)
    assert shot.classification == CROSSES_ZERO
    assert shot.v[-1] < 0.0
    assert np.all(np.diff(shot.r) > 0.0)


def test_shoot_validation(constant_power, power):
    with pytest.raises(DomainError):
        shoot(power, 2.0, 0.1, 1e-2)
    with pytest.raises(DomainError):
        shoot(constant_power, 2.0, -0.1, 1e-2)
    with pytest.raises(DomainError):
        shoot(constant_power, 2.0, 0.1, 2.0)


def test_no_bracket_on_a_narrow_range(constant_power):
    with pytest.raises(OracleUnavailableError):
        bracket_height(constant_power, 2.0, 1e-2, v0_min=1e-6, v0_max=1e-5, points=4)


def test_bisection_halves_the_bracket(outcome):
    widths = np.array(outcome.widths)
    assert widths[-1] <= 1e-6
    assert np.all(widths[1:] <= 0.5 * widths[:-1] * (1 + 1e-6))
    assert outcome.shot.classification != CROSSES_ZERO
    assert outcome.to_dict()["bisection_steps"] == len(widths)


HEIGHT = 1.2345


def _step_shooter(converged_within=0.0):
    def fake(model, r_max, v0, step):
        if abs(v0 - HEIGHT) < converged_within:
            kind = CONVERGED
        else:
            kind = CROSSES_ZERO if v0 > HEIGHT else DIVERGES
        return ShootResult(v0, np.array([[0.0, v0, 0.0], [r_max, 0.0, 0.0]]), kind)
    return fake


def test_bisection_stops_at_float_resolution(constant_power, monkeypatch):
    monkeypatch.setattr("qlground.oracle.shoot", _step_shooter())
    result = ground_state_shooting(constant_power, 6.0, 1e-2, 1e-20, m=50)
    widths = np.array(result.widths)
    assert np.all(widths > 0.0)
    assert np.all(widths[1:] < widths[:-1])
    coarse = widths[1:] > 1e-8
    np.testing.assert_allclose(widths[1:][coarse], 0.5 * widths[:-1][coarse], rtol=1e-6)
    assert widths[-1] <= 2.0 * np.spacing(HEIGHT)
    assert result.v0 == pytest.approx(HEIGHT, abs=2.0 * np.spacing(HEIGHT))


def test_bisection_stops_on_a_converged_shot(constant_power, monkeypatch):
    monkeypatch.setattr("qlground.oracle.shoot", _step_shooter(converged_within=1e-3))
    result = ground_state_shooting(constant_power, 6.0, 1e-2, 1e-20, m=50)
    assert result.shot.classification == CONVERGED
    assert abs(result.v0 - HEIGHT) < 1e-3
    assert result.widths and min(result.widths) > 0.0


def test_profile_is_positive_and_decreasing(outcome):
    v = outcome.profile.values
    assert v[0] > 0.0
    assert v[0] == pytest.approx(outcome.v0, rel=1e-2)
    assert np.all(v >= 0.0)
    assert np.all(np.diff(v) <= 1e-8)


def test_profile_is_a_critical_point(outcome, constant_power):
    assert criticality_residual(constant_power, outcome.profile, CELL) <= 1e-4


def test_find_ground_state_returns_the_profile(constant_power):
    profile = find_ground_state_shooting(constant_power, 3.0, 5e-3, 1e-4, m=60)
    assert isinstance(profile.grid, RadialGrid)
    assert profile.grid.m == 60


def test_compare_profiles():
    radial = RadialGrid(5.0, 50)
    gauss = radial.sample(lambda r: np.exp(-r ** 2))
    assert compare_profiles(gauss, gauss) == 0.0
    assert compare_profiles(gauss.with_values(1.01 * gauss.values), gauss) == pytest.approx(0.01)
    finer = RadialGrid(5.0, 500).sample(lambda r: np.exp(-r ** 2))
    assert compare_profiles(finer, gauss) <= 1e-3
    planar = Grid2D(6.0, 127).sample(lambda x1, x2: np.exp(-(x1 ** 2 + x2 ** 2)))
    assert compare_profiles(planar, gauss) <= 5e-3
    with pytest.raises(DomainError):
        compare_profiles(gauss, radial.zeros())
    with pytest.raises(DomainError):
        compare_profiles(gauss, planar)


@pytest.mark.slow
def test_height_is_stable_under_step_halving(constant_power):
    coarse = ground_state_shooting(constant_power, 6.0, 2e-3, 1e-12)
    fine = ground_state_shooting(constant_power, 6.0, 1e-3, 1e-12)
    assert fine.v0 == pytest.approx(coarse.v0, rel=1e-5)


@pytest.mark.slow
def test_mountain_pass_agrees_with_shooting(constant_power):
    grid = Grid2D(6.0, 128)
    report = mountain_pass_solve(constant_power, grid, SolverOptions(tol=1e-5))
    profile = ground_state_shooting(constant_power, 6.0, 1e-3, 1e-12).profile
    assert compare_profiles(report.solution, profile) <= 0.02
    assert criticality_residual(constant_power, profile, grid.spacing ** 2) <= 1e-4


def test_field_shape_of_outcome(outcome):
    assert isinstance(outcome.profile, Field)
    assert outcome.profile.values.shape == (300,)
