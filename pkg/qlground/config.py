"""Run configuration: flat dotted keys in a dotenv-style file.

    # runs/power.cfg
    model.name=power
    grid.n=96
    solver.rho_scan=0.001,0.01

Every key has a default; unknown keys and malformed values are rejected
before anything is computed. `manifest()` echoes the resolved values in the
same format so a run directory can be replayed with --config.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, Mapping, Optional, Tuple

from dotenv import dotenv_values

from .discretization import Grid2D, RadialGrid
from .errors import DomainError, ValidationError
from .model import BUILTIN_NAMES, ModelProblem, builtin_model
from .solver import SolverOptions

logger = logging.getLogger(__name__)

# ---- CONFIG ----
DEFAULTS: Dict[str, str] = {
    "model.name": "power",
    "model.theta": "6",
    "model.p": "6",
    "model.cp": "",                 # empty: 1.5 x threshold from the best known S_p
    "model.amplitude": "0.5",
    "grid.R": "6",
    "grid.n": "128",
    "grid.r_max": "6",
    "grid.m": "600",
    "solver.points": "21",
    "solver.tol": "1e-5",
    "solver.max_sweeps": "50000",
    "solver.seed": "0",
    "solver.rho_scan": "0.001,0.01,0.1",
    "solver.restarts": "4",
    "oracle.step": "0.001",
    "oracle.tol_v0": "1e-12",
    "oracle.v0_min": "1e-4",
    "oracle.v0_max": "100",
    "oracle.sweep_points": "48",
    "output.dir": "runs/default",
}


def _number(key: str, raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ValidationError(f"{key}: expected a number, got {raw!r}") from None
    if not math.isfinite(value):
        raise ValidationError(f"{key}: expected a finite number, got {raw!r}")
    return value


def _integer(key: str, raw: str) -> int:
    value = _number(key, raw)
    if value != int(value):
        raise ValidationError(f"{key}: expected an integer, got {raw!r}")
    return int(value)


def _numbers(key: str, raw: str) -> Tuple[float, ...]:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise ValidationError(f"{key}: expected a comma list of numbers")
    return tuple(_number(key, p) for p in parts)


@dataclass(frozen=True)
class RunConfig:
    model_name: str = "power"
    theta: float = 6.0
    p: float = 6.0
    cp: Optional[float] = None
    amplitude: float = 0.5
    R: float = 6.0
    n: int = 128
    r_max: float = 6.0
    m: int = 600
    points: int = 21
    tol: float = 1e-5
    max_sweeps: int = 50_000
    seed: int = 0
    rho_scan: Tuple[float, ...] = (1e-3, 1e-2, 1e-1)
    restarts: int = 4
    oracle_step: float = 1e-3
    oracle_tol_v0: float = 1e-12
    oracle_v0_min: float = 1e-4
    oracle_v0_max: float = 100.0
    oracle_sweep_points: int = 48
    output_dir: Path = Path("runs/default")

    def validate(self) -> "RunConfig":
        checks = [
            (self.model_name in BUILTIN_NAMES,
             f"model.name must be one of {', '.join(BUILTIN_NAMES)}"),
            (self.cp is None or self.cp > 0, "model.cp must be > 0"),
            (self.amplitude >= 0, "model.amplitude must be >= 0"),
            (self.R > 0, "grid.R must be > 0"),
            (self.n >= 3, "grid.n must be >= 3"),
            (self.r_max > 0, "grid.r_max must be > 0"),
            (self.m >= 3, "grid.m must be >= 3"),
            (self.points >= 3, "solver.points must be >= 3"),
            (self.tol > 0, "solver.tol must be > 0"),
            (self.max_sweeps >= 1, "solver.max_sweeps must be >= 1"),
            (all(r > 0 for r in self.rho_scan), "solver.rho_scan entries must be > 0"),
            (self.restarts >= 1, "solver.restarts must be >= 1"),
            (0 < self.oracle_step < self.r_max, "oracle.step must lie in (0, grid.r_max)"),
            (self.oracle_tol_v0 > 0, "oracle.tol_v0 must be > 0"),
            (0 < self.oracle_v0_min < self.oracle_v0_max, "need 0 < oracle.v0_min < oracle.v0_max"),
            (self.oracle_sweep_points >= 2, "oracle.sweep_points must be >= 2"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValidationError(message)
        return self

    # ---- derived objects ----

    def grid2d(self) -> Grid2D:
        return Grid2D(self.R, self.n)

    def radial_grid(self) -> RadialGrid:
        return RadialGrid(self.r_max, self.m)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(points=self.points, tol=self.tol, max_sweeps=self.max_sweeps,
                             seed=self.seed, rho_scan=self.rho_scan)

    def build_model(self, sp_value: Optional[float] = None) -> ModelProblem:
        try:
            return builtin_model(self.model_name, theta=self.theta, p=self.p, cp=self.cp,
                                 amplitude=self.amplitude, sp_value=sp_value)
        except (LookupError, DomainError) as exc:
            raise ValidationError(str(exc)) from exc

    def with_model(self, name: str, output_dir: Path) -> "RunConfig":
        return replace(self, model_name=name, output_dir=output_dir)

    def manifest(self, resolved_cp: Optional[float] = None) -> str:
        """Fully resolved configuration in the input format."""
        cp = self.cp if self.cp is not None else resolved_cp
        values = {
            "model.name": self.model_name,
            "model.theta": repr(self.theta),
            "model.p": repr(self.p),
            "model.cp": "" if cp is None else repr(cp),
            "model.amplitude": repr(self.amplitude),
            "grid.R": repr(self.R),
            "grid.n": str(self.n),
            "grid.r_max": repr(self.r_max),
            "grid.m": str(self.m),
            "solver.points": str(self.points),
            "solver.tol": repr(self.tol),
            "solver.max_sweeps": str(self.max_sweeps),
            "solver.seed": str(self.seed),
            "solver.rho_scan": ",".join(repr(r) for r in self.rho_scan),
            "solver.restarts": str(self.restarts),
            "oracle.step": repr(self.oracle_step),
            "oracle.tol_v0": repr(self.oracle_tol_v0),
            "oracle.v0_min": repr(self.oracle_v0_min),
            "oracle.v0_max": repr(self.oracle_v0_max),
            "oracle.sweep_points": str(self.oracle_sweep_points),
            "output.dir": str(self.output_dir),
        }
        return "".join(f"{key}={value}\n" for key, value in values.items())


_FIELDS: Dict[str, Tuple[str, Callable[[str, str], object]]] = {
    "model.name": ("model_name", lambda k, v: v.strip()),
    "model.theta": ("theta", _number),
    "model.p": ("p", _number),
    "model.cp": ("cp", lambda k, v: _number(k, v) if v.strip() else None),
    "model.amplitude": ("amplitude", _number),
    "grid.R": ("R", _number),
    "grid.n": ("n", _integer),
    "grid.r_max": ("r_max", _number),
    "grid.m": ("m", _integer),
    "solver.points": ("points", _integer),
    "solver.tol": ("tol", _number),
    "solver.max_sweeps": ("max_sweeps", _integer),
    "solver.seed": ("seed", _integer),
    "solver.rho_scan": ("rho_scan", _numbers),
    "solver.restarts": ("restarts", _integer),
    "oracle.step": ("oracle_step", _number),
    "oracle.tol_v0": ("oracle_tol_v0", _number),
    "oracle.v0_min": ("oracle_v0_min", _number),
    "oracle.v0_max": ("oracle_v0_max", _number),
    "oracle.sweep_points": ("oracle_sweep_points", _integer),
    "output.dir": ("output_dir", lambda k, v: Path(v.strip())),
}


def parse_config(values: Mapping[str, Optional[str]]) -> RunConfig:
    unknown = sorted(set(values) - set(DEFAULTS))
    if unknown:
        raise ValidationError(f"unknown configuration keys: {', '.join(unknown)}")
    merged = dict(DEFAULTS)
    for key, raw in values.items():
        if raw is None:
            raise ValidationError(f"{key}: missing value")
        merged[key] = raw
    kwargs = {name: parse(key, merged[key]) for key, (name, parse) in _FIELDS.items()}
    return RunConfig(**kwargs).validate()


def load_config(path: Optional[Path] = None, *, out: Optional[Path] = None,
                seed: Optional[int] = None) -> RunConfig:
    """Read a config file (or only defaults), then apply --out / --seed."""
    values: Dict[str, Optional[str]] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ValidationError(f"config file not found: {path}")
        values = dict(dotenv_values(path))
        logger.debug("read %d keys from %s", len(values), path)
    config = parse_config(values)
    if out is not None:
        config = replace(config, output_dir=Path(out))
    if seed is not None:
        config = replace(config, seed=int(seed))
    return config
