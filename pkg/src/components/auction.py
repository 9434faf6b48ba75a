"""
Rank-and-bid payment rules.

A bidder pays p^p(b) whatever happens and p^w(b) on top when winning. Both
parts are piecewise linear in the bid, zero on negative bids and extended
linearly past the last breakpoint.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np

from src.contracts.artifacts import RuleViolation
from src.contracts.errors import InputValidationError

logger = logging.getLogger(__name__)

type RuleKind = Literal["first_price", "all_pay", "custom"]
type Side = Literal["left", "right"]

_SLOPE_EPS = 1e-12


def _as_output(t: Any, result: np.ndarray) -> float | np.ndarray:
    if np.ndim(t) == 0:
        return float(result)
    return result


@dataclass(frozen=True, slots=True, eq=False)
class PiecewiseLinear:
    """bid -> payment; `slopes[i]` holds on [breakpoints[i], breakpoints[i+1])."""

    breakpoints: np.ndarray
    slopes: np.ndarray
    intercept: float = 0.0
    knot_values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        bp = np.array(self.breakpoints, dtype=float).reshape(-1)
        slopes = np.array(self.slopes, dtype=float).reshape(-1)
        if bp.size == 0 or bp[0] != 0.0:
            raise InputValidationError("payment breakpoints must start at 0")
        if np.any(np.diff(bp) <= 0):
            raise InputValidationError("payment breakpoints must be strictly increasing")
        if slopes.size != bp.size:
            raise InputValidationError(f"expected {bp.size} slopes for {bp.size} breakpoints, got {slopes.size}")
        if not (np.all(np.isfinite(bp)) and np.all(np.isfinite(slopes)) and np.isfinite(self.intercept)):
            raise InputValidationError("payment function data must be finite")
        knots = float(self.intercept) + np.concatenate([[0.0], np.cumsum(slopes[:-1] * np.diff(bp))])
        for name, value in (("breakpoints", bp), ("slopes", slopes), ("knot_values", knots)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "intercept", float(self.intercept))

    @classmethod
    def zero(cls) -> "PiecewiseLinear":
        return cls(breakpoints=np.array([0.0]), slopes=np.array([0.0]))

    @classmethod
    def identity(cls) -> "PiecewiseLinear":
        return cls(breakpoints=np.array([0.0]), slopes=np.array([1.0]))

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "PiecewiseLinear":
        try:
            return cls(
                breakpoints=np.asarray(data["breakpoints"], dtype=float),
                slopes=np.asarray(data["slopes"], dtype=float),
                intercept=float(data.get("intercept", 0.0)),
            )
        except KeyError as exc:
            raise InputValidationError(f"missing key {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise InputValidationError(f"non-numeric payment data: {exc}") from exc

    def to_json(self) -> dict[str, Any]:
        return {
            "breakpoints": self.breakpoints.tolist(),
            "slopes": self.slopes.tolist(),
            "intercept": self.intercept,
        }

    def extended(self, t: float | np.ndarray) -> float | np.ndarray:
        """Value with the first segment continued linearly to negative bids."""
        ts = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.breakpoints, ts, side="right") - 1, 0, None)
        result = self.knot_values[idx] + self.slopes[idx] * (ts - self.breakpoints[idx])
        return _as_output(t, result)

    def __call__(self, t: float | np.ndarray) -> float | np.ndarray:
        ts = np.asarray(t, dtype=float)
        result = np.where(ts < 0.0, 0.0, np.asarray(self.extended(ts)))
        return _as_output(t, result)

    def slope(self, t: float | np.ndarray, side: Side = "right") -> float | np.ndarray:
        ts = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.breakpoints, ts, side="right" if side == "right" else "left") - 1
        result = np.where(idx < 0, 0.0, self.slopes[np.clip(idx, 0, None)])
        return _as_output(t, result)

    def kinks(self) -> list[float]:
        changes = np.abs(np.diff(self.slopes)) > _SLOPE_EPS
        return [float(b) for b in self.breakpoints[1:][changes]]


@dataclass(frozen=True, slots=True, eq=False)
class PaymentRule:
    kind: RuleKind
    participation: PiecewiseLinear
    winning: PiecewiseLinear

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "PaymentRule":
        kind = data.get("kind")
        if kind == "first_price":
            return first_price()
        if kind == "all_pay":
            return all_pay()
        if kind == "custom":
            try:
                participation = PiecewiseLinear.from_json(data["participation"])
                winning = PiecewiseLinear.from_json(data["winning"])
            except KeyError as exc:
                raise InputValidationError(f"custom rule needs {exc.args[0]!r}") from exc
            return custom(participation, winning)
        raise InputValidationError(f"unknown auction kind {kind!r}; expected first_price, all_pay or custom")

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "participation": self.participation.to_json(),
            "winning": self.winning.to_json(),
        }

    def pp(self, t: float | np.ndarray) -> float | np.ndarray:
        return self.participation(t)

    def pw(self, t: float | np.ndarray) -> float | np.ndarray:
        return self.winning(t)

    def total(self, t: float | np.ndarray) -> float | np.ndarray:
        ts = np.asarray(t, dtype=float)
        return _as_output(t, np.asarray(self.participation(ts)) + np.asarray(self.winning(ts)))

    def pp_slope(self, t: float | np.ndarray, side: Side = "right") -> float | np.ndarray:
        return self.participation.slope(t, side)

    def pw_slope(self, t: float | np.ndarray, side: Side = "right") -> float | np.ndarray:
        return self.winning.slope(t, side)

    def knots(self) -> np.ndarray:
        """Union of both parts' breakpoints (always starts at 0)."""
        return np.union1d(self.participation.breakpoints, self.winning.breakpoints)

    def kinks(self) -> list[float]:
        return sorted(set(self.participation.kinks()) | set(self.winning.kinks()))


def first_price() -> PaymentRule:
    return PaymentRule(kind="first_price", participation=PiecewiseLinear.zero(), winning=PiecewiseLinear.identity())


def all_pay() -> PaymentRule:
    return PaymentRule(kind="all_pay", participation=PiecewiseLinear.identity(), winning=PiecewiseLinear.zero())


def custom(participation: PiecewiseLinear, winning: PiecewiseLinear) -> PaymentRule:
    return PaymentRule(kind="custom", participation=participation, winning=winning)


def validate(rule: PaymentRule) -> list[RuleViolation]:
    """Every violated invariant with the offending bid interval; [] means ok."""
    violations: list[RuleViolation] = []
    for name, part in (("participation", rule.participation), ("winning", rule.winning)):
        if part(0.0) != 0.0:
            violations.append(
                RuleViolation(
                    code="nonzero_at_origin",
                    message=f"{name} payment nonzero at origin ({part(0.0):.6g})",
                    lo=0.0,
                    hi=0.0,
                )
            )
        bp = part.breakpoints
        for i, slope in enumerate(part.slopes):
            if slope < 0:
                hi = float(bp[i + 1]) if i + 1 < bp.size else None
                violations.append(
                    RuleViolation(
                        code="decreasing",
                        message=f"{name} payment decreasing (slope {slope:.6g})",
                        lo=float(bp[i]),
                        hi=hi,
                    )
                )

    knots = rule.knots()
    for i, lo in enumerate(knots):
        total_slope = float(rule.pp_slope(lo) + rule.pw_slope(lo))
        if total_slope <= _SLOPE_EPS:
            hi = float(knots[i + 1]) if i + 1 < knots.size else None
            violations.append(
                RuleViolation(
                    code="sum_not_strictly_increasing",
                    message=f"sum not strictly increasing (p^p + p^w slope {total_slope:.6g})",
                    lo=float(lo),
                    hi=hi,
                )
            )
    return violations


__all__ = [
    "PaymentRule",
    "PiecewiseLinear",
    "RuleKind",
    "all_pay",
    "custom",
    "first_price",
    "validate",
]
