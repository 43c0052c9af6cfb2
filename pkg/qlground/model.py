"""Problem instances (V, g, G and the H1-H6 constants) and their audit.

Builtins:
  power             V = 1 + a(sin^2 pi x1 + sin^2 pi x2),  g = Cp s^(p-1)
  critical          power + s^3 (exp(4 pi s^4) - 1)
  constant_V_power  power with V == 1 + 2a (radially symmetric, for the oracle)

g and G are extended by zero for s < 0. Exponentials are clamped at the
kernel's exp_guard; samples beyond it are reported as untestable.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .errors import DomainError
from .transform import DEFAULT_KERNEL, TransformKernel

logger = logging.getLogger(__name__)

Potential = Callable[[np.ndarray, np.ndarray], np.ndarray]
Nonlinearity = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

BUILTIN_NAMES = ("power", "critical", "constant_V_power")
HYPOTHESES = ("H1", "H2", "H3", "H4", "H5", "H6")
CRITICAL_BETA = 4.0 * math.pi
CP_SAFETY = 1.5

# audit tolerances
H2_SMALL_S = 1e-3
H2_ENVELOPE = 0.01
PRIMITIVE_RTOL = 1e-6
PERIODIC_TOL = 1e-12


@dataclass(frozen=True)
class ModelProblem:
    name: str
    V0: float
    V1: float
    theta: float
    p: float
    Cp: float
    potential: Potential
    nonlinearity: Nonlinearity
    primitive: Nonlinearity
    h3_constant: Optional[float] = None
    growth_exponent: Optional[Callable[[np.ndarray], np.ndarray]] = None
    constant_potential: bool = False
    kernel: TransformKernel = DEFAULT_KERNEL
    params: Dict[str, float] = field(default_factory=dict, compare=False)

    def V(self, x1, x2) -> np.ndarray:
        return np.broadcast_to(self.potential(x1, x2), np.broadcast(x1, x2).shape)

    def g(self, x1, x2, s) -> np.ndarray:
        return self.nonlinearity(x1, x2, np.maximum(s, 0.0))

    def G(self, x1, x2, s) -> np.ndarray:
        return self.primitive(x1, x2, np.maximum(s, 0.0))

    def overflow_mask(self, s) -> np.ndarray:
        """True where an exponential in g would exceed exp_guard."""
        s = np.asarray(s, dtype=float)
        if self.growth_exponent is None:
            return np.zeros(s.shape, dtype=bool)
        return self.growth_exponent(np.maximum(s, 0.0)) > self.kernel.exp_guard


# ---- builtin pieces ----

def _periodic_potential(x1, x2, *, amplitude: float):
    return 1.0 + amplitude * (np.sin(np.pi * x1) ** 2 + np.sin(np.pi * x2) ** 2)


def _constant_potential(x1, x2, *, value: float):
    return np.full(np.broadcast(x1, x2).shape, value)


def _power_g(x1, x2, s, *, cp: float, p: float):
    return cp * s ** (p - 1.0)


def _power_G(x1, x2, s, *, cp: float, p: float):
    return cp * s ** p / p


def _quartic_exponent(s):
    return CRITICAL_BETA * s ** 4


def _critical_g(x1, x2, s, *, cp: float, p: float, guard: float):
    x = np.minimum(_quartic_exponent(s), guard)
    return cp * s ** (p - 1.0) + s ** 3 * np.expm1(x)


def _critical_G(x1, x2, s, *, cp: float, p: float, guard: float):
    x = np.minimum(_quartic_exponent(s), guard)
    # d/ds exp(4 pi s^4) = 16 pi s^3 exp(4 pi s^4)
    return cp * s ** p / p + np.expm1(x) / (4.0 * CRITICAL_BETA) - s ** 4 / 4.0


# ---- constants of H4/H6 and the level bounds ----

def cp_threshold(theta: float, p: float, sp_value: float) -> float:
    """Smallest admissible C_p: [theta(p-2)/(p(theta-4))]^((p-2)/2) S_p^p."""
    if not theta > 4.0:
        raise DomainError(f"theta must be > 4, got {theta}")
    if not p > 2.0:
        raise DomainError(f"p must be > 2, got {p}")
    if not sp_value >= 0.0:
        raise DomainError(f"S_p must be positive, got {sp_value}")
    base = theta * (p - 2.0) / (p * (theta - 4.0))
    return float(base ** ((p - 2.0) / 2.0) * sp_value ** p)


def level_upper_bound(theta: float) -> float:
    return (theta - 4.0) / (2.0 * theta)


def sp_level_bound(p: float, cp: float, sp_value: float) -> float:
    """sup_t of the power-law majorant along h(t phi) for an S_p minimizer phi."""
    if not p > 2.0 or not cp > 0.0:
        raise DomainError("need p > 2 and Cp > 0")
    return float((p - 2.0) * sp_value ** (2.0 * p / (p - 2.0))
                 / (2.0 * p * cp ** (2.0 / (p - 2.0))))


def gaussian_sp_bound(V1: float, p: float) -> float:
    """Minimum of the S_p quotient over dilations of exp(-|x|^2).

    With u = exp(-|x|^2/y): grad term pi, mass term V1 y pi/2,
    (int u^2|grad u|^2)^(1/2) = sqrt(pi)/2, int u^p = y pi/p.
    """
    if not p > 2.0 or not V1 > 0.0:
        raise DomainError("need p > 2 and V1 > 0")
    a = math.pi + 0.5 * math.sqrt(math.pi)
    b = 0.5 * V1 * math.pi
    y = 2.0 * a / (b * (p - 2.0))
    return math.sqrt((a + b * y) / (y * math.pi / p) ** (2.0 / p))


def builtin_model(name: str, *, theta: Optional[float] = None, p: Optional[float] = None,
                  cp: Optional[float] = None, amplitude: Optional[float] = None,
                  sp_value: Optional[float] = None,
                  kernel: TransformKernel = DEFAULT_KERNEL) -> ModelProblem:
    if name not in BUILTIN_NAMES:
        raise LookupError(f"unknown model {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
    theta = 6.0 if theta is None else float(theta)
    p = 6.0 if p is None else float(p)
    amplitude = 0.5 if amplitude is None else float(amplitude)
    V0, V1 = 1.0, 1.0 + 2.0 * amplitude

    if cp is None:
        if theta > 4.0 and p > 2.0:
            sp = gaussian_sp_bound(V1, p) if sp_value is None else float(sp_value)
            cp = CP_SAFETY * cp_threshold(theta, p, sp)
        else:
            logger.warning("theta=%g, p=%g admit no C_p threshold; using Cp=1", theta, p)
            cp = 1.0
    cp = float(cp)

    growth = None
    if name == "critical":
        guard = kernel.exp_guard
        g = partial(_critical_g, cp=cp, p=p, guard=guard)
        G = partial(_critical_G, cp=cp, p=p, guard=guard)
        s_guard = (guard / CRITICAL_BETA) ** 0.25
        h3 = cp / (4.0 * math.pi) + s_guard ** 3
        growth = _quartic_exponent
    else:
        g = partial(_power_g, cp=cp, p=p)
        G = partial(_power_G, cp=cp, p=p)
        # e^x - 1 >= x for s <= 1 and >= x^2/2 beyond
        h3 = cp / (4.0 * math.pi)

    if name == "constant_V_power":
        potential = partial(_constant_potential, value=V1)
        V0 = V1
    else:
        potential = partial(_periodic_potential, amplitude=amplitude)

    return ModelProblem(
        name=name, V0=V0, V1=V1, theta=theta, p=p, Cp=cp,
        potential=potential, nonlinearity=g, primitive=G,
        h3_constant=h3, growth_exponent=growth,
        constant_potential=(name == "constant_V_power"), kernel=kernel,
        params={"theta": theta, "p": p, "Cp": cp, "amplitude": amplitude},
    )


# ---- hypothesis audit ----

@dataclass
class HypothesisResult:
    name: str
    status: str = "pass"            # pass | fail | skipped
    worst_violation: float = 0.0
    location: Optional[Tuple[float, float, float]] = None
    untestable: int = 0
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def flag(self, magnitude: float, location=None, note: str = "") -> None:
        """Record a violation; keeps the largest one."""
        if magnitude <= 0.0:
            return
        self.status = "fail"
        if magnitude > self.worst_violation:
            self.worst_violation = float(magnitude)
            if location is not None:
                self.location = tuple(float(c) for c in location)
            if note:
                self.detail = note

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "worst_violation": self.worst_violation,
            "location": list(self.location) if self.location else None,
            "untestable_overflow": self.untestable,
            "detail": self.detail,
        }


@dataclass
class HypothesisReport:
    results: Dict[str, HypothesisResult]

    def passed(self, names: Sequence[str] = HYPOTHESES[:5]) -> bool:
        return all(self.results[n].passed for n in names)

    def to_dict(self) -> dict:
        return {name: self.results[name].to_dict() for name in HYPOTHESES}


def _flag_array(res: HypothesisResult, excess: np.ndarray, X1, X2, S, note: str) -> None:
    excess = np.where(np.isfinite(excess), excess, np.inf)
    if excess.size == 0 or not np.any(excess > 0.0):
        return
    i = np.unravel_index(int(np.argmax(excess)), excess.shape)
    bx1, bx2, bs = np.broadcast_arrays(X1, X2, S)
    res.flag(float(excess[i]), (bx1[i], bx2[i], bs[i]), note)


def default_samples(count: int = 64, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Sorted s samples on (0, 3] and x samples in the unit cell."""
    rng = np.random.default_rng(seed)
    s = np.unique(np.concatenate([np.geomspace(1e-6, 1.0, count), np.linspace(1.0, 3.0, count // 2)]))
    x = rng.random((8, 2))
    return s, x


def check_hypotheses(model: ModelProblem, s_samples: Iterable[float],
                     x_samples: Iterable[Sequence[float]],
                     sp_value: Optional[float] = None) -> HypothesisReport:
    s = np.asarray(list(s_samples), dtype=float)
    x = np.asarray(list(x_samples), dtype=float).reshape(-1, 2)
    if s.size == 0 or np.any(s <= 0.0) or np.any(np.diff(s) <= 0.0):
        raise DomainError("s_samples must be positive and strictly increasing")
    if x.size == 0:
        raise DomainError("x_samples must not be empty")

    X1, X2 = x[:, :1], x[:, 1:]
    S = s[None, :]
    guard = model.kernel.exp_guard
    testable = ~model.overflow_mask(S)
    n_untestable = int(np.count_nonzero(~testable)) * x.shape[0]
    g = model.g(X1, X2, S)
    G = model.G(X1, X2, S)
    results = {name: HypothesisResult(name) for name in HYPOTHESES}

    # H1: V >= V0 > 0, V <= V1, unit periodicity
    h1 = results["H1"]
    if not model.V0 > 0.0:
        h1.flag(max(-model.V0, 0.0) + 1e-300, note="V0 must be positive")
    V = model.V(X1, X2)
    zeros = np.zeros_like(X1)
    _flag_array(h1, model.V0 - V - PERIODIC_TOL, X1, X2, zeros, "V below V0")
    _flag_array(h1, V - model.V1 - PERIODIC_TOL, X1, X2, zeros, "V above V1")
    for e1, e2 in ((1.0, 0.0), (0.0, 1.0)):
        _flag_array(h1, np.abs(model.V(X1 + e1, X2 + e2) - V) - PERIODIC_TOL,
                    X1, X2, zeros, "V not 1-periodic")

    # H2: nonnegative, vanishes at 0, periodic, g(x,s)/s -> 0
    h2 = results["H2"]
    g_t = np.where(testable, g, 0.0)
    _flag_array(h2, -g_t, X1, X2, S, "g negative")
    _flag_array(h2, -np.where(testable, G, 0.0), X1, X2, S, "G negative")
    _flag_array(h2, np.abs(model.g(X1, X2, 0.0 * X1)) - PERIODIC_TOL, X1, X2, zeros, "g(x,0) != 0")
    _flag_array(h2, np.abs(model.G(X1, X2, 0.0 * X1)) - PERIODIC_TOL, X1, X2, zeros, "G(x,0) != 0")
    for e1, e2 in ((1.0, 0.0), (0.0, 1.0)):
        shifted = np.where(testable, model.g(X1 + e1, X2 + e2, S), 0.0)
        _flag_array(h2, np.abs(shifted - g_t) - PERIODIC_TOL * (1.0 + np.abs(g_t)),
                    X1, X2, S, "g not 1-periodic")
    small = np.union1d(s[s <= H2_SMALL_S], np.geomspace(1e-6, H2_SMALL_S, 16))[None, :]
    _flag_array(h2, model.g(X1, X2, small) / small - H2_ENVELOPE, X1, X2, small,
                "g(x,s)/s not small near the origin")

    # H3: g <= C (exp(4 pi s^4) - 1)
    h3 = results["H3"]
    expo = CRITICAL_BETA * S ** 4
    h3_ok = expo <= guard
    h3.untestable = int(np.count_nonzero(~(h3_ok & testable))) * x.shape[0]
    if model.h3_constant is None:
        h3.flag(np.inf, note="no H3 constant declared")
    else:
        bound = model.h3_constant * np.expm1(np.minimum(expo, guard))
        excess = g - bound - 1e-12 * (1.0 + np.abs(g))
        _flag_array(h3, np.where(h3_ok & testable, excess, -1.0), X1, X2, S,
                    "g exceeds the critical-growth envelope")

    # H4: theta > 4 and 0 <= theta G <= s g; G is the primitive of g
    h4 = results["H4"]
    h4.untestable = n_untestable
    if not model.theta > 4.0:
        h4.flag(4.0 - model.theta + 1e-300, note="theta must exceed 4")
    sg = S * g
    tG = model.theta * G
    _flag_array(h4, np.where(testable, tG - sg - 1e-12 * (1.0 + np.abs(sg)), -1.0),
                X1, X2, S, "theta G > s g")
    _flag_array(h4, np.where(testable, -tG, -1.0), X1, X2, S, "theta G < 0")
    s_quad = s[testable[0]]
    for x1, x2 in x:
        edges = np.concatenate([[0.0], s_quad])
        pieces = [integrate.quad(lambda t: float(model.g(x1, x2, t)), a, b,
                                 epsabs=1e-14, epsrel=1e-11, limit=200)[0]
                  for a, b in zip(edges[:-1], edges[1:])]
        quad = np.cumsum(pieces)
        G_row = model.G(x1, x2, s_quad)
        _flag_array(h4, np.abs(G_row - quad) - PRIMITIVE_RTOL * (1.0 + np.abs(G_row)),
                    np.full_like(s_quad, x1), np.full_like(s_quad, x2), s_quad,
                    "primitive disagrees with quadrature of g")

    # H5: g(x,s)/s nondecreasing
    h5 = results["H5"]
    h5.untestable = n_untestable
    ratio = np.where(testable, g / S, np.inf)
    drop = ratio[:, :-1] - ratio[:, 1:]
    tol = 1e-12 * (1.0 + np.abs(ratio[:, 1:]))
    drop = np.where(np.isfinite(drop), drop - tol, -1.0)
    _flag_array(h5, drop, X1, X2, S[:, :-1], "g(x,s)/s decreases")

    # H6: p > 2, g >= Cp s^(p-1), and Cp above the S_p threshold
    h6 = results["H6"]
    h6.untestable = n_untestable
    if not model.p > 2.0:
        h6.flag(2.0 - model.p + 1e-300, note="p must exceed 2")
    if not model.Cp > 0.0:
        h6.flag(-model.Cp + 1e-300, note="Cp must be positive")
    lower = model.Cp * S ** (model.p - 1.0)
    _flag_array(h6, np.where(testable, lower - g - 1e-12 * (1.0 + lower), -1.0),
                X1, X2, S, "g below Cp s^(p-1)")
    if sp_value is None:
        if h6.status == "pass":
            h6.status = "skipped"
            h6.detail = "pointwise bound holds; Cp threshold needs S_p"
    elif model.theta > 4.0 and model.p > 2.0:
        threshold = cp_threshold(model.theta, model.p, sp_value)
        h6.flag(threshold - model.Cp + (1e-300 if model.Cp <= threshold else 0.0),
                note=f"Cp={model.Cp:.6g} not above threshold {threshold:.6g}")
        if h6.passed:
            h6.detail = f"Cp={model.Cp:.6g} > threshold {threshold:.6g}"

    for name in HYPOTHESES:
        logger.debug("%s: %s (worst %.3g)", name, results[name].status,
                     results[name].worst_violation)
    return HypothesisReport(results)
