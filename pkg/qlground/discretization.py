"""Truncated domains, the discrete -Laplacian, quadrature and H^1 maps.

Grid2D   [-R, R]^2, n interior nodes per axis, zero Dirichlet halo,
         5-point stencil, weight h^2 per node.
RadialGrid  cell-centred nodes r_j = (j - 1/2) dr on (0, r_max], zero flux
         through the axis, zero ghost beyond r_max, weight 2 pi r_j dr.

Both grids describe their stencil as a list of edges (a, b, c) so that
    dirichlet_energy(v) = sum c (v_a - v_b)^2 = integrate(v * laplacian(v))
holds exactly (summation by parts).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np
from scipy import fft, linalg
from scipy.interpolate import RegularGridInterpolator

from .errors import DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Grid2D:
    R: float = 6.0
    n: int = 128

    def __post_init__(self) -> None:
        if not self.R > 0:
            raise DomainError(f"grid half width must be > 0, got {self.R}")
        if int(self.n) != self.n or self.n < 3:
            raise DomainError(f"grid needs n >= 3 interior nodes, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def spacing(self) -> float:
        return 2.0 * self.R / (self.n + 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.R + self.spacing * np.arange(1, self.n + 1)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    @cached_property
    def weights(self) -> np.ndarray:
        return np.full(self.shape, self.spacing ** 2)

    def sample(self, func: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "Field":
        x1, x2 = self.coords
        return Field(self, np.broadcast_to(func(x1, x2), self.shape).astype(float))

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.shape))

    def edges(self, values: np.ndarray):
        """Endpoint values and coefficients of every stencil edge, halo included."""
        p = np.pad(values, 1)
        a = np.concatenate([p[:-1, 1:-1].ravel(), p[1:-1, :-1].ravel()])
        b = np.concatenate([p[1:, 1:-1].ravel(), p[1:-1, 1:].ravel()])
        return a, b, 1.0

    def neg_laplacian(self, values: np.ndarray) -> np.ndarray:
        p = np.pad(values, 1)
        lap = 4.0 * values - p[:-2, 1:-1] - p[2:, 1:-1] - p[1:-1, :-2] - p[1:-1, 2:]
        return lap / self.spacing ** 2

    @cached_property
    def _riesz_symbol(self) -> np.ndarray:
        k = np.arange(1, self.n + 1)
        s = np.sin(0.5 * math.pi * k / (self.n + 1)) ** 2
        lam = (4.0 / self.spacing ** 2) * (s[:, None] + s[None, :])
        return 1.0 / (lam + 1.0)

    def solve_shifted(self, rhs: np.ndarray) -> np.ndarray:
        """(-Delta_h + I)^{-1} rhs via the type-I sine transform."""
        coef = fft.dstn(rhs, type=1, norm="ortho")
        return fft.idstn(coef * self._riesz_symbol, type=1, norm="ortho")


@dataclass(frozen=True)
class RadialGrid:
    r_max: float = 6.0
    m: int = 600

    def __post_init__(self) -> None:
        if not self.r_max > 0:
            raise DomainError(f"r_max must be > 0, got {self.r_max}")
        if int(self.m) != self.m or self.m < 3:
            raise DomainError(f"radial grid needs m >= 3 nodes, got {self.m}")
        object.__setattr__(self, "m", int(self.m))

    @property
    def spacing(self) -> float:
        return self.r_max / self.m

    @property
    def shape(self) -> tuple[int]:
        return (self.m,)

    @cached_property
    def r(self) -> np.ndarray:
        return (np.arange(self.m) + 0.5) * self.spacing

    @cached_property
    def faces(self) -> np.ndarray:
        # face i sits between node i and i+1; the last one faces the zero ghost
        return (np.arange(self.m) + 1.0) * self.spacing

    @cached_property
    def weights(self) -> np.ndarray:
        return 2.0 * math.pi * self.r * self.spacing

    @cached_property
    def face_coef(self) -> np.ndarray:
        return 2.0 * math.pi * self.faces / self.spacing

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> "Field":
        return Field(self, np.broadcast_to(func(self.r), self.shape).astype(float))

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.shape))

    def edges(self, values: np.ndarray):
        a = values
        b = np.append(values[1:], 0.0)
        return a, b, self.face_coef

    def neg_laplacian(self, values: np.ndarray) -> np.ndarray:
        flux = self.face_coef * (values - np.append(values[1:], 0.0))
        inflow = np.concatenate([[0.0], flux[:-1]])
        return (flux - inflow) / self.weights

    @cached_property
    def _shifted_bands(self) -> np.ndarray:
        c = self.face_coef / self.weights
        c_in = np.concatenate([[0.0], self.face_coef[:-1]]) / self.weights
        ab = np.zeros((3, self.m))
        ab[0, 1:] = -c[:-1]
        ab[1] = c + c_in + 1.0
        ab[2, :-1] = -c_in[1:]
        return ab

    def solve_shifted(self, rhs: np.ndarray) -> np.ndarray:
        return linalg.solve_banded((1, 1), self._shifted_bands, rhs)


AnyGrid = Union[Grid2D, RadialGrid]


@dataclass(frozen=True, eq=False)
class Field:
    grid: AnyGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise DomainError(f"field shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("field values must be finite")
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)

    def is_zero(self) -> bool:
        return not np.any(self.values)


# ---- operators ----

def laplacian_apply(field: Field) -> Field:
    """-Delta_h of the field with zero Dirichlet data."""
    return field.with_values(field.grid.neg_laplacian(field.values))


def integrate(field: Field) -> float:
    return float(np.sum(field.grid.weights * field.values))


def dirichlet_energy(field: Field) -> float:
    a, b, c = field.grid.edges(field.values)
    return float(np.sum(c * (a - b) ** 2))


def sobolev_inner(a: Field, b: Field) -> float:
    """Discrete H^1 inner product: int grad a . grad b + int a b."""
    ea, eb, c = a.grid.edges(a.values)
    fa, fb, _ = b.grid.edges(b.values)
    return float(np.sum(c * (ea - eb) * (fa - fb)) + np.sum(a.grid.weights * a.values * b.values))


def riesz_map(gradient: Field) -> Field:
    """H^1 representative d of a weighted gradient r: (-Delta_h + I) d = r / w.

    sobolev_inner(riesz_map(r), phi) == sum(r * phi) for every phi.
    """
    grid = gradient.grid
    return gradient.with_values(grid.solve_shifted(gradient.values / grid.weights))


def radial_average(field: Field, radial: RadialGrid, n_angles: int = 64) -> Field:
    """Angular mean of a 2D field at the radial nodes (zero outside the square)."""
    grid = field.grid
    if not isinstance(grid, Grid2D):
        raise DomainError("radial_average needs a field on Grid2D")
    axis = np.concatenate([[-grid.R], grid.axis, [grid.R]])
    interp = RegularGridInterpolator((axis, axis), np.pad(field.values, 1),
                                     bounds_error=False, fill_value=0.0)
    angles = 2.0 * math.pi * np.arange(n_angles) / n_angles
    r = radial.r[:, None]
    pts = np.stack([r * np.cos(angles), r * np.sin(angles)], axis=-1)
    values = interp(pts.reshape(-1, 2)).reshape(radial.m, n_angles).mean(axis=1)
    return Field(radial, values)
