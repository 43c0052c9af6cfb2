"""Discrete energies J and J_bar, the weak-form gradient, and the E_L norms.

    J_bar(v) = 1/2 int |grad v|^2 + 1/2 int V f(v)^2 - int G(x, f(v))
    J(u)     = 1/2 int (1+u^2)|grad u|^2 + 1/2 int V u^2 - int G(x, u)

The gradient is the exact derivative of the discrete J_bar, scaled by the
quadrature weights: sum(gradient * phi) is the directional derivative.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np
from scipy import optimize

from .discretization import Field, Grid2D, dirichlet_energy
from .errors import ConvergenceError, DomainError, EvaluationError
from .model import ModelProblem

logger = logging.getLogger(__name__)

ORLICZ_XTOL = 1e-10
BRACKET_MAXITER = 1_000_000


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    potential: float
    nonlinear: float
    total: float

    @classmethod
    def from_terms(cls, kinetic: float, potential: float, nonlinear: float) -> "EnergyBreakdown":
        return cls(kinetic, potential, nonlinear, kinetic + potential - nonlinear)

    def to_dict(self) -> dict:
        return asdict(self)


def node_coords(grid) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(grid, Grid2D):
        return grid.coords
    return grid.r, np.zeros_like(grid.r)


def _guarded(model: ModelProblem, field: Field, u: np.ndarray) -> None:
    bad = model.overflow_mask(u)
    if np.any(bad):
        idx = np.unravel_index(int(np.argmax(bad)), u.shape)
        x1, x2 = node_coords(field.grid)
        raise EvaluationError(
            f"exp_guard exceeded at node {tuple(int(i) for i in idx)} "
            f"(x=({x1[idx]:.6g}, {x2[idx]:.6g}), u={u[idx]:.6g})",
            node=tuple(int(i) for i in idx))


def _local_terms(model: ModelProblem, u: np.ndarray, field: Field):
    """V u^2 / 2 and G(x, u) at the nodes."""
    _guarded(model, field, u)
    x1, x2 = node_coords(field.grid)
    return 0.5 * model.V(x1, x2) * u * u, model.G(x1, x2, u)


# ---- energies ----

def evaluate_J_bar(model: ModelProblem, v: Field) -> EnergyBreakdown:
    u = model.kernel.f_inverse(v.values)
    pot, G = _local_terms(model, u, v)
    w = v.grid.weights
    return EnergyBreakdown.from_terms(
        0.5 * dirichlet_energy(v), float(np.sum(w * pot)), float(np.sum(w * G)))


def evaluate_J(model: ModelProblem, u: Field, kinetic: str = "secant") -> float:
    """Untransformed energy.

    kinetic="secant" weights each edge by the secant slope of h, the discrete
    chain rule, so evaluate_J(f(v)) equals evaluate_J_bar(v) to round-off.
    kinetic="midpoint" uses 1 + (edge mean of u)^2.
    """
    a, b, c = u.grid.edges(u.values)
    if kinetic == "secant":
        h = model.kernel.h_forward
        kin = 0.5 * float(np.sum(c * (h(a) - h(b)) ** 2))
    elif kinetic == "midpoint":
        mid = 0.5 * (a + b)
        kin = 0.5 * float(np.sum(c * (1.0 + mid * mid) * (a - b) ** 2))
    else:
        raise DomainError(f"unknown kinetic mode {kinetic!r}")
    pot, G = _local_terms(model, u.values, u)
    w = u.grid.weights
    return kin + float(np.sum(w * pot)) - float(np.sum(w * G))


def gradient_J_bar(model: ModelProblem, v: Field) -> Field:
    f, fp = model.kernel.inverse_with_prime(v.values)
    _guarded(model, v, f)
    x1, x2 = node_coords(v.grid)
    local = (model.V(x1, x2) * f - model.g(x1, x2, f)) * fp
    grid = v.grid
    return v.with_values(grid.weights * (grid.neg_laplacian(v.values) + local))


def constraint_norm_sq(model: ModelProblem, v: Field) -> float:
    """int |grad v|^2 + int V f(v)^2."""
    u = model.kernel.f_inverse(v.values)
    x1, x2 = node_coords(v.grid)
    return dirichlet_energy(v) + float(np.sum(v.grid.weights * model.V(x1, x2) * u * u))


# ---- Orlicz and H^1_L norms ----

def orlicz_norm(model: ModelProblem, v: Field) -> float:
    """inf over zeta > 0 of zeta (1 + int V L(v / zeta)), searched in log zeta."""
    if v.is_zero():
        return 0.0
    x1, x2 = node_coords(v.grid)
    wV = v.grid.weights * model.V(x1, x2)
    L = model.kernel.orlicz_kernel

    def phi(t: float) -> float:
        zeta = math.exp(t)
        return zeta * (1.0 + float(np.sum(wV * L(v.values / zeta)[0])))

    t0 = math.log(float(np.max(np.abs(v.values))))
    try:
        xa, xb, xc, *_ = optimize.bracket(phi, t0, t0 + 1.0, maxiter=BRACKET_MAXITER)
    except RuntimeError as exc:
        raise ConvergenceError(f"Orlicz minimizer bracket failed: {exc}") from exc
    res = optimize.minimize_scalar(phi, bracket=(xa, xb, xc), method="golden",
                                   options={"xtol": ORLICZ_XTOL})
    return float(res.fun)


def h1L_norm(model: ModelProblem, v: Field) -> float:
    return math.sqrt(dirichlet_energy(v)) + orlicz_norm(model, v)


# ---- test direction f/f' ----

def pairing_direction(model: ModelProblem, v: Field) -> Field:
    """phi = f(v)/f'(v) = f sqrt(1 + f^2)."""
    f = model.kernel.f_inverse(v.values)
    return v.with_values(f * np.hypot(1.0, f))


def direction_pairing(model: ModelProblem, v: Field) -> float:
    """Closed form of <J_bar'(v), f/f'>:
    int (1 + f^2/(1+f^2)) |grad v|^2 + int V f^2 - int g(x, f) f.
    """
    f = model.kernel.f_inverse(v.values)
    _guarded(model, v, f)
    a, b, c = v.grid.edges(v.values)
    fa, fb, _ = v.grid.edges(f * f)
    q = 0.5 * (fa + fb)
    kin = float(np.sum(c * (a - b) ** 2 * (1.0 + q / (1.0 + q))))
    x1, x2 = node_coords(v.grid)
    w = v.grid.weights
    return kin + float(np.sum(w * f * (model.V(x1, x2) * f - model.g(x1, x2, f))))


# ---- u^2 embedding (||u^2|| <= C (||v|| + ||v||^2)) ----

def square_h1_norm(model: ModelProblem, v: Field) -> float:
    """H^1 norm of u^2 with u = f(v)."""
    sq = v.with_values(model.kernel.f_inverse(v.values) ** 2)
    return math.sqrt(dirichlet_energy(sq) + float(np.sum(v.grid.weights * sq.values ** 2)))


def embedding_ratio(model: ModelProblem, v: Field) -> float:
    norm = h1L_norm(model, v)
    if norm == 0.0:
        raise DomainError("embedding ratio undefined at v = 0")
    return square_h1_norm(model, v) / (norm + norm * norm)


def fit_embedding_constant(model: ModelProblem, fields: Iterable[Field]) -> float:
    ratios = [embedding_ratio(model, v) for v in fields]
    if not ratios:
        raise DomainError("need at least one field")
    logger.debug("embedding constant fitted on %d fields: %.6g", len(ratios), max(ratios))
    return max(ratios)


# ---- small spheres ----

def sphere_field(model: ModelProblem, w: Field, rho: float) -> Field:
    """a w with int |grad(a w)|^2 + int V f(a w)^2 = rho^2, a > 0."""
    if w.is_zero():
        raise DomainError("direction must not vanish")
    if not rho > 0.0:
        raise DomainError(f"rho must be > 0, got {rho}")
    target = rho * rho

    def gap(a: float) -> float:
        return constraint_norm_sq(model, w.with_values(a * w.values)) - target

    hi = 1.0
    for _ in range(200):
        if gap(hi) >= 0.0:
            break
        hi *= 2.0
    else:
        raise ConvergenceError(f"no amplitude reaches rho={rho}")
    lo = hi / 2.0
    while gap(lo) > 0.0 and lo > 1e-300:
        lo /= 2.0
    a = optimize.brentq(gap, lo, hi, xtol=1e-15, rtol=1e-13)
    return w.with_values(a * w.values)
