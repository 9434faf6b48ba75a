from .artifacts import (
    AuditReport,
    CutPointReport,
    Finding,
    GridSpec,
    PerturbationReport,
    RuleViolation,
    SweepResult,
    Tolerance,
)
from .errors import (
    ComponentError,
    ContractError,
    ConvergenceError,
    DomainError,
    InputFileError,
    InputValidationError,
    NoRootError,
    ProblemSpecError,
    SolverError,
    UnsupportedProblemError,
)
from .manifest import ArtifactRefs, Manifest, StepRecord

__all__ = [
    "AuditReport",
    "CutPointReport",
    "Finding",
    "GridSpec",
    "PerturbationReport",
    "RuleViolation",
    "SweepResult",
    "Tolerance",
    "ArtifactRefs",
    "Manifest",
    "StepRecord",
    "SolverError",
    "ContractError",
    "ProblemSpecError",
    "ComponentError",
    "InputFileError",
    "InputValidationError",
    "DomainError",
    "NoRootError",
    "ConvergenceError",
    "UnsupportedProblemError",
]
