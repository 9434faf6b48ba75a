from __future__ import annotations


class SolverError(Exception):
    """Raised by the command layer for user-facing failures."""


class ContractError(SolverError):
    """Raised when manifests, curves or solution files are malformed."""


class ProblemSpecError(SolverError):
    """Raised when a problem JSON cannot be turned into a CommitmentProblem."""

    def __init__(
        self,
        message: str,
        *,
        field: str | None = None,
        line: int | None = None,
        column: int | None = None,
    ) -> None:
        self.field = field
        self.line = line
        self.column = column
        anchor = ""
        if line is not None:
            anchor = f"line {line}, column {column}: "
        elif field is not None:
            anchor = f"{field}: "
        super().__init__(f"{anchor}{message}")


class ComponentError(Exception):
    """Base exception for component-level failures."""


class InputValidationError(ComponentError):
    """Raised when an input file, curve or config is invalid."""


class DomainError(ComponentError):
    """Raised when an argument lies outside a function's domain."""


class NoRootError(ComponentError):
    """Raised when a bracket shows no sign change."""

    def __init__(self, message: str, *, lo: float, hi: float, f_lo: float, f_hi: float) -> None:
        super().__init__(message)
        self.lo = lo
        self.hi = hi
        self.f_lo = f_lo
        self.f_hi = f_hi


class ConvergenceError(ComponentError):
    """Raised when an iterative kernel runs out of iterations."""

    def __init__(self, message: str, *, estimate: float, residual: float) -> None:
        super().__init__(message)
        self.estimate = estimate
        self.residual = residual


class UnsupportedProblemError(ComponentError):
    """Raised when a closed-form solver's preconditions do not hold."""


class InputFileError(SolverError):
    """Raised when a command input file is missing or unreadable."""
