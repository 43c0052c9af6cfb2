"""Radial shooting for the constant-potential transformed equation.

    v'' + v'/r = V f(v) f'(v) - g(f(v)) f'(v),   v'(0) = 0,  v(0) = v0

Small heights turn back up before reaching zero, large heights overshoot
through zero; the ground state height sits at the transition and is found
by bisection.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .discretization import Field, Grid2D, RadialGrid, radial_average
from .energy import gradient_J_bar
from .errors import DomainError, IntegrationError, OracleUnavailableError
from .model import ModelProblem

logger = logging.getLogger(__name__)

CROSSES_ZERO = "crosses_zero"
DIVERGES = "stays_positive_diverges"
CONVERGED = "converged_to_zero"

CROSSING_LEVEL = -1e-10
DIVERGENCE_FACTOR = 10.0


@dataclass
class ShootResult:
    v0: float
    trajectory: np.ndarray  # rows (r, v, v')
    classification: str

    @property
    def r(self) -> np.ndarray:
        return self.trajectory[:, 0]

    @property
    def v(self) -> np.ndarray:
        return self.trajectory[:, 1]


@dataclass
class ShootingOutcome:
    profile: Field
    v0: float
    shot: ShootResult
    widths: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"v0": self.v0, "classification": self.shot.classification,
                "bisection_steps": len(self.widths),
                "final_width": self.widths[-1] if self.widths else None}


def _forcing(model: ModelProblem, V: float):
    kernel = model.kernel
    g = model.nonlinearity

    def F(v: float) -> float:
        f, fp = kernel.inverse_with_prime(v)
        gf = float(g(0.0, 0.0, f)) if f > 0.0 else 0.0
        return (V * f - gf) * fp
    return F


def _classify(v: float, w: float, v0: float) -> str | None:
    if v < CROSSING_LEVEL:
        return CROSSES_ZERO
    if (w > 0.0 and v > 0.0) or v > DIVERGENCE_FACTOR * v0:
        return DIVERGES
    return None


def shoot(model: ModelProblem, r_max: float, v0: float, step: float) -> ShootResult:
    if not model.constant_potential:
        raise DomainError(f"shooting needs a constant potential, model {model.name!r} has none")
    if not v0 >= 0.0:
        raise DomainError(f"v0 must be >= 0, got {v0}")
    if not (r_max > 0.0 and 0.0 < step < r_max):
        raise DomainError("need r_max > 0 and 0 < step < r_max")
    if v0 == 0.0:
        r = np.arange(0.0, r_max + 0.5 * step, step)
        return ShootResult(0.0, np.column_stack([r, np.zeros_like(r), np.zeros_like(r)]), CONVERGED)

    F = _forcing(model, model.V1)

    def rhs(r: float, v: float, w: float) -> tuple[float, float]:
        return w, F(v) - w / r

    F0 = F(v0)
    r, v, w = step, v0 + 0.25 * step * step * F0, 0.5 * step * F0
    rows = [(0.0, v0, 0.0), (r, v, w)]
    classification = None
    n_steps = int(math.floor(r_max / step + 1e-9))
    for _ in range(1, n_steps):
        classification = _classify(v, w, v0)
        if classification:
            break
        k1 = rhs(r, v, w)
        k2 = rhs(r + 0.5 * step, v + 0.5 * step * k1[0], w + 0.5 * step * k1[1])
        k3 = rhs(r + 0.5 * step, v + 0.5 * step * k2[0], w + 0.5 * step * k2[1])
        k4 = rhs(r + step, v + step * k3[0], w + step * k3[1])
        v_next = v + step / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        w_next = w + step / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        if not (math.isfinite(v_next) and math.isfinite(w_next)):
            if w > 0.0:
                classification = DIVERGES
                break
            raise IntegrationError(f"non-finite state at r={r + step:.6g} for v0={v0!r}")
        r, v, w = r + step, v_next, w_next
        rows.append((r, v, w))
    else:
        classification = _classify(v, w, v0)
    return ShootResult(v0, np.asarray(rows), classification or CONVERGED)


def bracket_height(model: ModelProblem, r_max: float, step: float, v0_min: float = 1e-4,
                   v0_max: float = 100.0, points: int = 48) -> tuple[ShootResult, ShootResult]:
    """Adjacent heights of a geometric sweep that land on opposite sides."""
    heights = np.geomspace(v0_min, v0_max, points)
    prev = None
    for v0 in heights:
        shot = shoot(model, r_max, float(v0), step)
        if shot.classification == CONVERGED:
            return shot, shot
        if prev is not None and prev.classification != shot.classification:
            logger.info("shooting bracket [%.6g, %.6g] (%s | %s)", prev.v0, shot.v0,
                        prev.classification, shot.classification)
            return prev, shot
        prev = shot
    raise OracleUnavailableError(
        f"no sign change of the shooting class on [{v0_min:g}, {v0_max:g}]")


def ground_state_shooting(model: ModelProblem, r_max: float, step: float, tol_v0: float,
                          m: int = 600, v0_min: float = 1e-4, v0_max: float = 100.0,
                          points: int = 48) -> ShootingOutcome:
    lo, hi = bracket_height(model, r_max, step, v0_min, v0_max, points)
    widths = []
    while hi.v0 - lo.v0 > tol_v0:
        mid_v0 = 0.5 * (lo.v0 + hi.v0)
        if not lo.v0 < mid_v0 < hi.v0:
            logger.info("bracket at float resolution, width %.3g", hi.v0 - lo.v0)
            break
        mid = shoot(model, r_max, mid_v0, step)
        if mid.classification == CONVERGED:
            lo = hi = mid
            break
        if mid.classification == lo.classification:
            lo = mid
        else:
            hi = mid
        widths.append(hi.v0 - lo.v0)
    shot = lo if lo.classification != CROSSES_ZERO else hi
    logger.info("ground state height %.15g after %d bisections", shot.v0, len(widths))

    grid = RadialGrid(r_max, m)
    # the tail past the turn-up point is cut to zero
    values = np.interp(grid.r, shot.r, np.maximum(shot.v, 0.0), right=0.0)
    return ShootingOutcome(Field(grid, values), shot.v0, shot, widths)


def find_ground_state_shooting(model: ModelProblem, r_max: float, step: float, tol_v0: float,
                               **kwargs) -> Field:
    return ground_state_shooting(model, r_max, step, tol_v0, **kwargs).profile


def compare_profiles(a: Field, b: Field) -> float:
    """sqrt( int (a-b)^2 / int b^2 ) on b's radial grid."""
    grid = b.grid
    if not isinstance(grid, RadialGrid):
        raise DomainError("reference profile must be radial")
    if b.is_zero():
        raise DomainError("reference profile vanishes")
    if isinstance(a.grid, Grid2D):
        a = radial_average(a, grid)
    elif a.grid != grid:
        a = Field(grid, np.interp(grid.r, a.grid.r, a.values, right=0.0))
    w = grid.weights
    return math.sqrt(float(np.sum(w * (a.values - b.values) ** 2)) / float(np.sum(w * b.values ** 2)))


def criticality_residual(model: ModelProblem, profile: Field, cell_measure: float,
                         interior: float = 0.75) -> float:
    """Max nodal residual of a radial profile, rescaled to a 2D cell measure.

    Only nodes with r <= interior * r_max count; the shooting profile ignores
    the Dirichlet ghost at r_max.
    """
    grid = profile.grid
    residual = gradient_J_bar(model, profile).values / grid.weights
    mask = grid.r <= interior * grid.r_max
    return float(np.max(np.abs(residual[mask]))) * cell_measure
