"""Ground states of a 2D quasilinear Schrodinger equation via the dual change of variables."""

from .discretization import Field, Grid2D, RadialGrid
from .errors import QlgroundError
from .model import ModelProblem, builtin_model
from .transform import DEFAULT_KERNEL, TransformKernel

__all__ = [
    "DEFAULT_KERNEL",
    "Field",
    "Grid2D",
    "ModelProblem",
    "QlgroundError",
    "RadialGrid",
    "TransformKernel",
    "builtin_model",
]
