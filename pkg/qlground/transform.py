"""Scalar kernel of the dual change of variables.

    dv = sqrt(1+u^2) du,   v = h(u) = 1/2 u sqrt(1+u^2) + 1/2 asinh(u)

h is odd and strictly increasing, f = h^{-1} has no closed form and is
computed by safeguarded Newton. L(v) = f(v)^2 is the Orlicz kernel.

Every operation takes a scalar or an array (elementwise). Scalars take a
`math` fast path because the shooting oracle calls the kernel millions of
times one value at a time.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike

from .errors import ConvergenceError, DomainError

logger = logging.getLogger(__name__)

# above this |u| the log form of asinh loses digits to cancellation
_ASINH_SWITCH = 1e8
DOUBLING_CONSTANT = 8.0


def _check_finite(x: ArrayLike, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _asinh(u: np.ndarray) -> np.ndarray:
    big = np.abs(u) > _ASINH_SWITCH
    if not np.any(big):
        return np.arcsinh(u)
    out = np.arcsinh(np.where(big, 0.0, u))
    ub = np.abs(u[big])
    out[big] = np.sign(u[big]) * (np.log(2.0 * ub) + 0.25 / (ub * ub))
    return out


def _asinh_scalar(u: float) -> float:
    au = abs(u)
    if au > _ASINH_SWITCH:
        return math.copysign(math.log(2.0 * au) + 0.25 / (au * au), u)
    return math.asinh(u)


@dataclass(frozen=True)
class TransformKernel:
    newton_tol: float = 1e-12
    max_newton_iters: int = 60
    exp_guard: float = 700.0

    def __post_init__(self) -> None:
        if not self.newton_tol > 0:
            raise DomainError("newton_tol must be > 0")
        if self.max_newton_iters < 1:
            raise DomainError("max_newton_iters must be >= 1")
        if not self.exp_guard <= 700.0:
            raise DomainError("exp_guard must be <= 700")

    # ---- h and its derivative ----

    def h_forward(self, u: ArrayLike) -> float | np.ndarray:
        if np.ndim(u) == 0:
            x = float(u)
            if not math.isfinite(x):
                raise DomainError("u must be finite")
            return 0.5 * (x * math.hypot(1.0, x) + _asinh_scalar(x))
        arr = _check_finite(u, "u")
        return 0.5 * (arr * np.hypot(1.0, arr) + _asinh(arr))

    def h_prime(self, u: ArrayLike) -> float | np.ndarray:
        if np.ndim(u) == 0:
            x = float(u)
            if not math.isfinite(x):
                raise DomainError("u must be finite")
            return math.hypot(1.0, x)
        return np.hypot(1.0, _check_finite(u, "u"))

    # ---- inverse ----

    def f_inverse(self, v: ArrayLike) -> float | np.ndarray:
        if np.ndim(v) == 0:
            return self._f_scalar(float(v))
        return self._f_array(_check_finite(v, "v"))

    def _f_scalar(self, v: float) -> float:
        if not math.isfinite(v):
            raise DomainError("v must be finite")
        a = abs(v)
        if a == 0.0:
            return 0.0
        # h(u) >= max(u, u^2/2) brackets the root from the right
        lo, hi = 0.0, min(a, math.sqrt(2.0 * a))
        u = hi
        for _ in range(self.max_newton_iters):
            r = 0.5 * (u * math.hypot(1.0, u) + _asinh_scalar(u)) - a
            if r > 0.0:
                hi = u
            elif r < 0.0:
                lo = u
            else:
                return math.copysign(u, v)
            u_new = u - r / math.hypot(1.0, u)
            if u_new < lo or u_new > hi:
                u_new = 0.5 * (lo + hi)
            if abs(u_new - u) <= self.newton_tol * max(1.0, u_new):
                return math.copysign(u_new, v)
            u = u_new
        raise ConvergenceError(f"f_inverse did not converge for v={v!r}")

    def _f_array(self, v: np.ndarray) -> np.ndarray:
        a = np.abs(v)
        lo = np.zeros_like(a)
        hi = np.minimum(a, np.sqrt(2.0 * a))
        u = hi.copy()
        for _ in range(self.max_newton_iters):
            r = 0.5 * (u * np.hypot(1.0, u) + _asinh(u)) - a
            hi = np.where(r > 0.0, u, hi)
            lo = np.where(r < 0.0, u, lo)
            u_new = u - r / np.hypot(1.0, u)
            outside = (u_new < lo) | (u_new > hi)
            u_new = np.where(outside, 0.5 * (lo + hi), u_new)
            done = np.abs(u_new - u) <= self.newton_tol * np.maximum(1.0, u_new)
            u = u_new
            if np.all(done):
                return np.copysign(u, v)
        worst = int(np.argmax(np.abs(r)))
        raise ConvergenceError(
            f"f_inverse did not converge for v={v.flat[worst]!r}")

    def f_prime(self, v: ArrayLike) -> float | np.ndarray:
        f = self.f_inverse(v)
        if np.ndim(f) == 0:
            return 1.0 / math.hypot(1.0, f)
        return 1.0 / np.hypot(1.0, f)

    def inverse_with_prime(self, v: ArrayLike) -> tuple:
        """(f(v), f'(v)) with a single inversion."""
        f = self.f_inverse(v)
        if np.ndim(f) == 0:
            return f, 1.0 / math.hypot(1.0, f)
        return f, 1.0 / np.hypot(1.0, f)

    # ---- Orlicz kernel ----

    def orlicz_kernel(self, v: ArrayLike) -> tuple:
        """(L, L', L'') at v, with L = f(v)^2."""
        f = self.f_inverse(v)
        if np.ndim(f) == 0:
            q = 1.0 + f * f
            return f * f, 2.0 * f / math.sqrt(q), 2.0 / (q * q)
        q = 1.0 + f * f
        return f * f, 2.0 * f / np.sqrt(q), 2.0 / (q * q)

    def fit_doubling_constant(self, v_samples: Iterable[float]) -> float:
        """Empirical sup of L(2v)/L(v) over nonzero samples."""
        v = np.asarray(list(v_samples), dtype=float)
        v = v[v != 0.0]
        if v.size == 0:
            raise DomainError("need at least one nonzero sample")
        ratio = self.orlicz_kernel(2.0 * v)[0] / self.orlicz_kernel(v)[0]
        value = float(np.max(ratio))
        logger.debug("doubling constant fitted on %d samples: %.6g", v.size, value)
        return value


DEFAULT_KERNEL = TransformKernel()
