from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, TypeVar

from src.components.auction import PaymentRule
from src.components.distributions import PiecewiseDensity
from src.components.follower import CommitmentProblem
from src.contracts.artifacts import GridSpec, Tolerance
from src.contracts.errors import ComponentError, ProblemSpecError

_TOP_LEVEL_KEYS = {"f1", "f2", "auction", "tolerances", "grids"}
_TOLERANCE_KEYS = {f.name for f in fields(Tolerance)}
_GRID_KEYS = {f.name for f in fields(GridSpec)}

T = TypeVar("T")


@dataclass(frozen=True, slots=True)
class ProblemSpec:
    """Problem file contents before validation."""

    f1: dict[str, Any]
    f2: dict[str, Any]
    auction: dict[str, Any]
    tolerances: dict[str, Any] = field(default_factory=dict)
    grids: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> "ProblemSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProblemSpecError(exc.msg, line=exc.lineno, column=exc.colno) from exc
        if not isinstance(data, dict):
            raise ProblemSpecError("expected a JSON object", field="$")
        unknown = sorted(set(data) - _TOP_LEVEL_KEYS)
        if unknown:
            raise ProblemSpecError(f"unknown key(s) {unknown}", field="$")
        for name in ("f1", "f2", "auction"):
            if name not in data:
                raise ProblemSpecError("required", field=name)
            if not isinstance(data[name], dict):
                raise ProblemSpecError("expected an object", field=name)
        for name in ("tolerances", "grids"):
            if not isinstance(data.get(name, {}), dict):
                raise ProblemSpecError("expected an object", field=name)
        return cls(
            f1=data["f1"],
            f2=data["f2"],
            auction=data["auction"],
            tolerances=data.get("tolerances", {}),
            grids=data.get("grids", {}),
        )

    @classmethod
    def read(cls, path: Path) -> "ProblemSpec":
        path = Path(path)
        if not path.is_file():
            raise ProblemSpecError(f"problem file not found: {path}", field="$")
        return cls.from_text(path.read_text(encoding="utf-8"))

    def to_problem(
        self,
        *,
        tol: float | None = None,
        leader_types: int | None = None,
        bids: int | None = None,
        follower_types: int | None = None,
    ) -> CommitmentProblem:
        F1 = _section("f1", lambda: PiecewiseDensity.from_json(self.f1))
        F2 = _section("f2", lambda: PiecewiseDensity.from_json(self.f2))
        rule = _section("auction", lambda: PaymentRule.from_json(self.auction))

        tolerance_data = _checked_keys("tolerances", self.tolerances, _TOLERANCE_KEYS)
        if tol is not None:
            tolerance_data["abs_tol"] = tol
        tolerance = _section("tolerances", lambda: Tolerance(**tolerance_data))

        grid_data = _checked_keys("grids", self.grids, _GRID_KEYS)
        for key, value in (("leader_types", leader_types), ("bids", bids), ("follower_types", follower_types)):
            if value is not None:
                grid_data[key] = value
        grid = _section("grids", lambda: GridSpec(**grid_data))

        return _section("auction", lambda: CommitmentProblem(F1=F1, F2=F2, rule=rule, tol=tolerance, grid=grid))

    def to_json(self) -> dict[str, Any]:
        return {
            "f1": self.f1,
            "f2": self.f2,
            "auction": self.auction,
            "tolerances": self.tolerances,
            "grids": self.grids,
        }


def _checked_keys(section: str, data: dict[str, Any], allowed: set[str]) -> dict[str, Any]:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ProblemSpecError(f"unknown key(s) {unknown}", field=section)
    return dict(data)


def _section(name: str, build: Callable[[], T]) -> T:
    try:
        return build()
    except (ComponentError, TypeError, ValueError) as exc:
        raise ProblemSpecError(str(exc), field=name) from exc


def load_problem(
    path: Path,
    *,
    tol: float | None = None,
    leader_types: int | None = None,
    bids: int | None = None,
    follower_types: int | None = None,
) -> tuple[ProblemSpec, CommitmentProblem]:
    spec = ProblemSpec.read(path)
    problem = spec.to_problem(tol=tol, leader_types=leader_types, bids=bids, follower_types=follower_types)
    return spec, problem


__all__ = ["ProblemSpec", "load_problem"]
