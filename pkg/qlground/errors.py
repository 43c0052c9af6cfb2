"""Exception hierarchy shared by every qlground module.

Library code raises; only the CLI turns exceptions into exit statuses.

Exit codes:
  0 ok, 1 non-convergence, 2 checks failed, 3 I/O, 4 validation
"""

from __future__ import annotations

from typing import Any

EXIT_OK = 0
EXIT_NON_CONVERGENCE = 1
EXIT_CHECKS_FAILED = 2
EXIT_IO = 3
EXIT_VALIDATION = 4


class QlgroundError(Exception):
    exit_code = EXIT_NON_CONVERGENCE


class DomainError(QlgroundError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = EXIT_VALIDATION


class ValidationError(QlgroundError, ValueError):
    """Configuration or precondition rejected before any computation."""

    exit_code = EXIT_VALIDATION


class ConvergenceError(QlgroundError, RuntimeError):
    """An inner iteration (Newton, bracketing, descent restarts) did not converge."""


class NonConvergenceError(QlgroundError, RuntimeError):
    """The mountain-pass loop hit its sweep cap. `report` holds the best iterate."""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


class StepSizeError(QlgroundError, RuntimeError):
    pass


class EvaluationError(QlgroundError, ArithmeticError):
    """Overflow guard tripped while evaluating an energy term."""

    def __init__(self, message: str, node: tuple[int, ...] | None = None):
        super().__init__(message)
        self.node = node


class ModelGridError(QlgroundError, RuntimeError):
    pass


class IntegrationError(QlgroundError, RuntimeError):
    pass


class OracleUnavailableError(QlgroundError, RuntimeError):
    exit_code = EXIT_VALIDATION


class OutputError(QlgroundError, OSError):
    exit_code = EXIT_IO
