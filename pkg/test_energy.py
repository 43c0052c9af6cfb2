import math

import numpy as np
import pytest

from qlground.discretization import Field, Grid2D, dirichlet_energy
from qlground.energy import (constraint_norm_sq, direction_pairing, embedding_ratio,
                             evaluate_J, evaluate_J_bar, fit_embedding_constant, gradient_J_bar,
                             h1L_norm, orlicz_norm, pairing_direction, sphere_field)
from qlground.errors import DomainError, EvaluationError
from qlground.solver import EMBEDDING_SLACK

TINY = Grid2D(3.0, 15)


def _bump(grid, rng, amplitude):
    c1, c2 = rng.uniform(-1.0, 1.0, size=2)
    width = rng.uniform(0.5, 1.5)
    return grid.sample(lambda x1, x2: amplitude * np.exp(-((x1 - c1) ** 2 + (x2 - c2) ** 2) / width))


def _smooth_fields(grid, rng, count, scale=1.0):
    for _ in range(count):
        yield _bump(grid, rng, scale * rng.uniform(-1.0, 1.0))


def test_transformed_energy_matches_untransformed(any_model, rng):
    for v in _smooth_fields(TINY, rng, 50, scale=2.0):
        u = v.with_values(any_model.kernel.f_inverse(v.values))
        assert evaluate_J(any_model, u) == pytest.approx(evaluate_J_bar(any_model, v).total,
                                                         rel=1e-9, abs=1e-12)


def test_untransformed_energy_through_h(power, rng):
    for u in _smooth_fields(TINY, rng, 10):
        v = u.with_values(power.kernel.h_forward(u.values))
        assert evaluate_J_bar(power, v).total == pytest.approx(evaluate_J(power, u), rel=1e-9)


def test_midpoint_kinetic_mismatch_converges_at_second_order(power):
    mismatch = []
    for n in (31, 63, 127):
        u = Grid2D(6.0, n).sample(lambda x1, x2: 0.5 * np.exp(-(x1 ** 2 + x2 ** 2)))
        mismatch.append(abs(evaluate_J(power, u, kinetic="midpoint") - evaluate_J(power, u)))
    for coarse, fine in zip(mismatch[:-1], mismatch[1:]):
        assert 3.0 < coarse / fine < 5.0
    with pytest.raises(DomainError):
        evaluate_J(power, u, kinetic="trapezoid")


def test_breakdown_total(power):
    grid = Grid2D(4.0, 21)
    parts = evaluate_J_bar(power, grid.sample(lambda x1, x2: 0.3 * np.exp(-(x1 ** 2 + x2 ** 2))))
    assert parts.total == pytest.approx(parts.kinetic + parts.potential - parts.nonlinear, rel=1e-15)
    assert set(parts.to_dict()) == {"kinetic", "potential", "nonlinear", "total"}


def test_gradient_matches_finite_differences(any_model, rng):
    eps = 1e-6
    for _ in range(20):
        v = _bump(TINY, rng, rng.uniform(0.1, 1.0))
        phi = Field(TINY, rng.standard_normal(TINY.shape))
        exact = float(np.sum(gradient_J_bar(any_model, v).values * phi.values))
        plus = evaluate_J_bar(any_model, v.with_values(v.values + eps * phi.values)).total
        minus = evaluate_J_bar(any_model, v.with_values(v.values - eps * phi.values)).total
        assert (plus - minus) / (2 * eps) == pytest.approx(exact, rel=1e-6, abs=1e-9)


def test_energy_near_zero_and_along_a_ray(power, small_grid):
    gauss = small_grid.sample(lambda x1, x2: np.exp(-(x1 ** 2 + x2 ** 2)))
    assert evaluate_J_bar(power, gauss.with_values(0.05 * gauss.values)).total > 0.0
    assert evaluate_J_bar(power, gauss.with_values(3.0 * gauss.values)).total < 0.0
    assert evaluate_J_bar(power, small_grid.zeros()).total == 0.0


def test_orlicz_norm_axioms(power, rng):
    assert orlicz_norm(power, TINY.zeros()) == 0.0
    for _ in range(100):
        a = Field(TINY, rng.standard_normal(TINY.shape))
        b = Field(TINY, rng.standard_normal(TINY.shape))
        na, nb = orlicz_norm(power, a), orlicz_norm(power, b)
        assert na > 0.0
        assert orlicz_norm(power, a.with_values(a.values + b.values)) <= na + nb + 1e-9


def test_orlicz_norm_is_homogeneous(power, rng):
    for _ in range(100):
        a = Field(TINY, rng.standard_normal(TINY.shape))
        lam = rng.uniform(-5.0, 5.0)
        assert orlicz_norm(power, a.with_values(lam * a.values)) == pytest.approx(
            abs(lam) * orlicz_norm(power, a), rel=1e-9)


def test_h1L_norm_axioms(power, rng):
    assert h1L_norm(power, TINY.zeros()) == 0.0
    for _ in range(20):
        a = _bump(TINY, rng, rng.uniform(0.2, 2.0))
        b = Field(TINY, rng.standard_normal(TINY.shape))
        s = h1L_norm(power, a.with_values(a.values + b.values))
        assert s <= h1L_norm(power, a) + h1L_norm(power, b) + 1e-9
        assert h1L_norm(power, a.with_values(3.0 * a.values)) == pytest.approx(
            3.0 * h1L_norm(power, a), rel=1e-8)


def test_square_gradient_is_dominated(power, rng):
    for _ in range(30):
        v = Field(TINY, rng.uniform(-3.0, 3.0, TINY.shape))
        sq = v.with_values(power.kernel.f_inverse(v.values) ** 2)
        assert dirichlet_energy(sq) <= 4.0 * dirichlet_energy(v) * (1 + 1e-12)


def test_embedding_constant_generalizes(power, rng):
    train = list(_smooth_fields(TINY, rng, 30, scale=3.0))
    held_out = list(_smooth_fields(TINY, rng, 30, scale=3.0))
    constant = fit_embedding_constant(power, train)
    assert constant > 0.0
    assert max(embedding_ratio(power, v) for v in held_out) <= EMBEDDING_SLACK * constant
    with pytest.raises(DomainError):
        embedding_ratio(power, TINY.zeros())
    with pytest.raises(DomainError):
        fit_embedding_constant(power, [])


def test_pairing_closed_form(power):
    grid = Grid2D(6.0, 63)
    v = grid.sample(lambda x1, x2: 0.5 * np.exp(-(x1 ** 2 + x2 ** 2)))
    phi = pairing_direction(power, v)
    weak = float(np.sum(gradient_J_bar(power, v).values * phi.values))
    assert abs(weak - direction_pairing(power, v)) <= 1e-2 * dirichlet_energy(v)
    f = power.kernel.f_inverse(v.values)
    np.testing.assert_allclose(phi.values, f * np.sqrt(1.0 + f * f), rtol=1e-14)


@pytest.mark.parametrize("rho", [1e-3, 1e-2])
def test_energy_is_positive_on_small_spheres(any_model, rho, rng):
    for _ in range(100):
        w = Field(TINY, rng.standard_normal(TINY.shape))
        v = sphere_field(any_model, w, rho)
        assert constraint_norm_sq(any_model, v) == pytest.approx(rho * rho, rel=1e-10)
        assert evaluate_J_bar(any_model, v).total >= rho * rho / 8.0


def test_sphere_field_validation(power):
    w = TINY.sample(lambda x1, x2: np.exp(-(x1 ** 2 + x2 ** 2)))
    with pytest.raises(DomainError):
        sphere_field(power, TINY.zeros(), 0.1)
    with pytest.raises(DomainError):
        sphere_field(power, w, 0.0)
    big = sphere_field(power, w, 10.0)
    assert constraint_norm_sq(power, big) == pytest.approx(100.0, rel=1e-10)


def test_overflow_is_reported_with_the_node(critical):
    grid = Grid2D(2.0, 7)
    values = np.zeros(grid.shape)
    values[2, 4] = critical.kernel.h_forward(3.0)
    v = Field(grid, values)
    with pytest.raises(EvaluationError) as info:
        evaluate_J_bar(critical, v)
    assert info.value.node == (2, 4)
    with pytest.raises(EvaluationError):
        gradient_J_bar(critical, v)
    assert math.isfinite(evaluate_J_bar(critical, v.with_values(0.5 * values)).total)
