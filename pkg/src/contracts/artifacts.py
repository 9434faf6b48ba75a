from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any

from .errors import InputValidationError


@dataclass(frozen=True, slots=True)
class Tolerance:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    max_iter: int = 200

    def __post_init__(self) -> None:
        if not self.abs_tol > 0:
            raise InputValidationError("abs_tol must be > 0")
        if self.rel_tol < 0:
            raise InputValidationError("rel_tol must be >= 0")
        if self.max_iter < 1:
            raise InputValidationError("max_iter must be >= 1")

    def bound(self, scale: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(scale))


@dataclass(frozen=True, slots=True)
class GridSpec:
    """
    Discretisation used by the brute-force oracle and the curve builders.
    bid_ceiling=None means "the larger of b2 and the highest leader bid".
    """

    leader_types: int = 2000
    follower_types: int = 2000
    bids: int = 2000
    bid_ceiling: float | None = None
    curve_samples: int = 2001

    def __post_init__(self) -> None:
        for name in ("leader_types", "follower_types", "bids", "curve_samples"):
            if getattr(self, name) < 2:
                raise InputValidationError(f"{name} must be >= 2")
        if self.bid_ceiling is not None and not self.bid_ceiling > 0:
            raise InputValidationError("bid_ceiling must be > 0")

    def resolution(self) -> float:
        return 1.0 / min(self.leader_types, self.follower_types, self.bids)


@dataclass(frozen=True, slots=True)
class RuleViolation:
    code: str
    message: str
    lo: float
    hi: float | None = None


@dataclass(frozen=True, slots=True)
class Finding:
    check: str
    passed: bool
    message: str
    meta: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True, slots=True)
class SweepResult:
    argmax: float
    curve: list[tuple[float, float]]


@dataclass(frozen=True, slots=True)
class PerturbationReport:
    trials: int
    seed: int
    base_utility: float
    max_gain: float
    threshold: float
    worst_kind: str | None = None

    @property
    def passed(self) -> bool:
        return self.max_gain <= self.threshold


@dataclass(frozen=True, slots=True)
class CutPointReport:
    proof_form_roots: list[float]
    statement_form_roots: list[float]
    sweep_argmax: float
    utility_at_argmax: float
    utilities_at_roots: dict[str, float]
    overbidding_margin: float

    @property
    def overbids(self) -> bool:
        return self.overbidding_margin > 0


@dataclass(frozen=True, slots=True)
class AuditReport:
    seed: int
    trials: int
    findings: list[Finding]
    cut_point: CutPointReport | None = None
    diagnostics: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(finding.passed for finding in self.findings)

    def failed_checks(self) -> list[str]:
        return [finding.check for finding in self.findings if not finding.passed]

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["passed"] = self.passed
        if self.cut_point is not None:
            data["cut_point"]["overbids"] = self.cut_point.overbids
        return data


__all__ = [
    "AuditReport",
    "CutPointReport",
    "Finding",
    "GridSpec",
    "PerturbationReport",
    "RuleViolation",
    "SweepResult",
    "Tolerance",
]
