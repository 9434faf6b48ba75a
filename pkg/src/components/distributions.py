from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np

from src.components.numerics import DEFAULT_TOLERANCE, integrate
from src.contracts.artifacts import Tolerance
from src.contracts.errors import DomainError, InputValidationError

logger = logging.getLogger(__name__)

MASS_NORMALIZE_SLACK = 1e-6
_SUPPORT_SLACK = 1e-12


def _frozen_array(values: Iterable[float]) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


def _scalar_or_array(x: Any, result: np.ndarray) -> float | np.ndarray:
    if np.ndim(x) == 0:
        return float(result)
    return result


@dataclass(frozen=True, slots=True, eq=False)
class PiecewiseDensity:
    """
    Type distribution with a piecewise-constant density on [x0, xk].

    The CDF is piecewise linear, so cdf/quantile are exact. Queries below the
    support give F=0 and above give F=1.
    """

    breakpoints: np.ndarray
    densities: np.ndarray
    cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        bp = np.array(self.breakpoints, dtype=float)
        dens = np.array(self.densities, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise InputValidationError("breakpoints need at least two values")
        if not np.all(np.isfinite(bp)):
            raise InputValidationError("breakpoints must be finite (bounded support)")
        if np.any(np.diff(bp) <= 0):
            raise InputValidationError("breakpoints must be strictly increasing")
        if dens.ndim != 1 or dens.size != bp.size - 1:
            raise InputValidationError(
                f"expected {bp.size - 1} densities for {bp.size} breakpoints, got {dens.size}"
            )
        if not np.all(np.isfinite(dens)) or np.any(dens <= 0):
            raise InputValidationError("densities must be finite and > 0 on the whole support")

        mass = float(np.sum(dens * np.diff(bp)))
        if abs(mass - 1.0) > MASS_NORMALIZE_SLACK:
            raise InputValidationError(f"densities integrate to {mass:.9g}, expected 1")
        if mass != 1.0:
            dens = dens / mass

        cumulative = np.concatenate([[0.0], np.cumsum(dens * np.diff(bp))])
        cumulative[-1] = 1.0
        object.__setattr__(self, "breakpoints", _frozen_array(bp))
        object.__setattr__(self, "densities", _frozen_array(dens))
        object.__setattr__(self, "cumulative", _frozen_array(cumulative))

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "PiecewiseDensity":
        if not hi > lo:
            raise InputValidationError(f"uniform support needs lo < hi, got [{lo}, {hi}]")
        return cls(breakpoints=np.array([lo, hi]), densities=np.array([1.0 / (hi - lo)]))

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "PiecewiseDensity":
        try:
            return cls(breakpoints=np.asarray(data["breakpoints"]), densities=np.asarray(data["densities"]))
        except KeyError as exc:
            raise InputValidationError(f"missing key {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise InputValidationError(f"non-numeric distribution data: {exc}") from exc

    def to_json(self) -> dict[str, list[float]]:
        return {"breakpoints": self.breakpoints.tolist(), "densities": self.densities.tolist()}

    @property
    def lower(self) -> float:
        return float(self.breakpoints[0])

    @property
    def upper(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def support(self) -> tuple[float, float]:
        return self.lower, self.upper

    @property
    def is_uniform(self) -> bool:
        return bool(np.allclose(self.densities, self.densities[0], rtol=1e-12, atol=0.0))

    @property
    def density_nondecreasing(self) -> bool:
        return bool(np.all(np.diff(self.densities) >= -1e-12 * self.densities[:-1]))

    @property
    def density_nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.densities) <= 1e-12 * self.densities[:-1]))

    def cdf(self, x: float | np.ndarray) -> float | np.ndarray:
        result = np.interp(np.asarray(x, dtype=float), self.breakpoints, self.cumulative)
        return _scalar_or_array(x, result)

    def log_cdf(self, x: float | np.ndarray) -> float | np.ndarray:
        with np.errstate(divide="ignore"):
            result = np.log(np.interp(np.asarray(x, dtype=float), self.breakpoints, self.cumulative))
        return _scalar_or_array(x, result)

    def pdf(self, x: float | np.ndarray) -> float | np.ndarray:
        """Left-continuous density; the lower endpoint takes the first segment's density."""
        xs = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, xs, side="left") - 1
        idx = np.where(xs == self.breakpoints[0], 0, idx)
        inside = (idx >= 0) & (idx < self.densities.size)
        result = np.where(inside, self.densities[np.clip(idx, 0, self.densities.size - 1)], 0.0)
        return _scalar_or_array(x, result)

    def quantile(self, q: float | np.ndarray) -> float | np.ndarray:
        qs = np.asarray(q, dtype=float)
        if np.any(qs < 0.0) or np.any(qs > 1.0) or np.any(np.isnan(qs)):
            raise DomainError("quantile needs 0 <= q <= 1")
        result = np.interp(qs, self.cumulative, self.breakpoints)
        return _scalar_or_array(q, result)

    def mean(self) -> float:
        bp = self.breakpoints
        return float(np.sum(self.densities * (bp[1:] ** 2 - bp[:-1] ** 2)) / 2.0)

    def integrate_density_weighted(
        self,
        w: Callable[[float], float],
        lo: float,
        hi: float,
        *,
        splits: Iterable[float] = (),
        tol: Tolerance = DEFAULT_TOLERANCE,
    ) -> float:
        """Integral of w(t) f(t) over [lo, hi]; `splits` are the breakpoints of w."""
        span = max(1.0, abs(self.lower), abs(self.upper)) * _SUPPORT_SLACK
        if lo < self.lower - span or hi > self.upper + span:
            raise DomainError(f"[{lo}, {hi}] is not inside the support [{self.lower}, {self.upper}]")
        if hi < lo:
            raise DomainError(f"integration bounds reversed: [{lo}, {hi}]")
        splits = tuple(splits)
        total = 0.0
        for a, b, density in zip(self.breakpoints[:-1], self.breakpoints[1:], self.densities):
            left, right = max(lo, float(a)), min(hi, float(b))
            if right <= left:
                continue
            total += float(density) * integrate(w, left, right, tol, splits=splits)
        return total


def cdf(d: PiecewiseDensity, x: float | np.ndarray) -> float | np.ndarray:
    return d.cdf(x)


def quantile(d: PiecewiseDensity, q: float | np.ndarray) -> float | np.ndarray:
    return d.quantile(q)


def integrate_density_weighted(
    d: PiecewiseDensity,
    w: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    splits: Iterable[float] = (),
    tol: Tolerance = DEFAULT_TOLERANCE,
) -> float:
    return d.integrate_density_weighted(w, lo, hi, splits=splits, tol=tol)


__all__ = [
    "PiecewiseDensity",
    "cdf",
    "integrate_density_weighted",
    "quantile",
]
