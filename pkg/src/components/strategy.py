from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from src.components.distributions import PiecewiseDensity
from src.contracts.errors import DomainError, InputValidationError

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 2001
MONOTONE_SLACK = 1e-7
JUMP_FACTOR = 10.0
_DOMAIN_SLACK = 1e-12


def _frozen(values: Iterable[float] | np.ndarray) -> np.ndarray:
    array = np.array(values, dtype=float).reshape(-1)
    array.setflags(write=False)
    return array


def _check_grid(grid: np.ndarray, values: np.ndarray) -> None:
    if grid.size < 2:
        raise InputValidationError("a curve needs at least two samples")
    if grid.size != values.size:
        raise InputValidationError(f"grid has {grid.size} samples but values has {values.size}")
    if not (np.all(np.isfinite(grid)) and np.all(np.isfinite(values))):
        raise InputValidationError("curve samples must be finite")
    if np.any(np.diff(grid) <= 0):
        raise InputValidationError("curve abscissae must be strictly increasing")


def _as_output(x: Any, result: np.ndarray) -> float | np.ndarray:
    if np.ndim(x) == 0:
        return float(result)
    return result


@dataclass(frozen=True, slots=True, eq=False)
class MonotoneCurve:
    """
    Weakly increasing sampled function on [grid[0], grid[-1]].

    Linear interpolation between samples, or with left_continuous_steps the
    value values[i] on the cell (grid[i-1], grid[i]]; a jump at grid[i] then
    takes its left limit there.
    """

    grid: np.ndarray
    values: np.ndarray
    left_continuous_steps: bool = False
    name: str = "value"

    def __post_init__(self) -> None:
        grid = np.array(self.grid, dtype=float).reshape(-1)
        values = np.array(self.values, dtype=float).reshape(-1)
        _check_grid(grid, values)
        slack = MONOTONE_SLACK * max(1.0, float(np.max(np.abs(values))))
        drops = np.diff(values)
        if np.any(drops < -slack):
            at = int(np.argmin(drops))
            raise InputValidationError(
                f"curve '{self.name}' decreases by {-drops[at]:.3g} at x={grid[at + 1]:.6g}"
            )
        object.__setattr__(self, "grid", _frozen(grid))
        object.__setattr__(self, "values", _frozen(np.maximum.accumulate(values)))

    @classmethod
    def from_function(
        cls,
        f: Callable[[np.ndarray], np.ndarray],
        lo: float,
        hi: float,
        *,
        samples: int = DEFAULT_SAMPLES,
        name: str = "value",
    ) -> "MonotoneCurve":
        grid = np.linspace(lo, hi, samples)
        return cls(grid=grid, values=_apply(f, grid), name=name)

    @classmethod
    def constant(cls, value: float, lo: float, hi: float, *, samples: int = DEFAULT_SAMPLES, name: str = "value") -> "MonotoneCurve":
        grid = np.linspace(lo, hi, samples)
        return cls(grid=grid, values=np.full(samples, float(value)), name=name)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.grid[0]), float(self.grid[-1])

    def _check_domain(self, xs: np.ndarray) -> None:
        lo, hi = self.domain
        slack = _DOMAIN_SLACK * max(1.0, abs(lo), abs(hi))
        if np.any(xs < lo - slack) or np.any(xs > hi + slack):
            raise DomainError(f"curve '{self.name}' is defined on [{lo}, {hi}]")

    def eval(self, x: float | np.ndarray) -> float | np.ndarray:
        xs = np.asarray(x, dtype=float)
        self._check_domain(xs)
        if self.left_continuous_steps:
            idx = np.clip(np.searchsorted(self.grid, xs, side="left"), 0, self.grid.size - 1)
            return _as_output(x, self.values[idx])
        return _as_output(x, np.interp(xs, self.grid, self.values))

    __call__ = eval

    def upper_inverse(self, t: float | np.ndarray) -> float | np.ndarray:
        """sup{x : c(x) <= t}; the lower domain end when c(x) > t everywhere."""
        ts = np.asarray(t, dtype=float)
        n = self.grid.size
        j = np.searchsorted(self.values, ts, side="right") - 1
        jc = np.clip(j, 0, n - 2)
        if self.left_continuous_steps:
            inner = self.grid[jc]
        else:
            v_lo, v_hi = self.values[jc], self.values[jc + 1]
            span = np.where(v_hi > v_lo, v_hi - v_lo, 1.0)
            frac = np.clip((ts - v_lo) / span, 0.0, 1.0)
            inner = self.grid[jc] + frac * (self.grid[jc + 1] - self.grid[jc])
        result = np.where(j < 0, self.grid[0], np.where(j >= n - 1, self.grid[-1], inner))
        return _as_output(t, result)

    def to_rows(self) -> list[tuple[float, float]]:
        return list(zip(self.grid.tolist(), self.values.tolist()))

    @classmethod
    def from_rows(
        cls,
        rows: Sequence[tuple[float, float]],
        *,
        name: str = "value",
        left_continuous_steps: bool = False,
    ) -> "MonotoneCurve":
        if not rows:
            raise InputValidationError("no curve samples")
        grid, values = zip(*rows)
        return cls(grid=np.asarray(grid), values=np.asarray(values), left_continuous_steps=left_continuous_steps, name=name)


@dataclass(frozen=True, slots=True, eq=False)
class RawStrategy:
    """Deterministic type -> bid samples, not necessarily monotone."""

    grid: np.ndarray
    bids: np.ndarray

    def __post_init__(self) -> None:
        grid = np.array(self.grid, dtype=float).reshape(-1)
        bids = np.array(self.bids, dtype=float).reshape(-1)
        _check_grid(grid, bids)
        if np.any(bids < 0):
            raise InputValidationError("bids must be >= 0")
        object.__setattr__(self, "grid", _frozen(grid))
        object.__setattr__(self, "bids", _frozen(bids))

    @classmethod
    def from_function(
        cls,
        f: Callable[[np.ndarray], np.ndarray],
        lo: float,
        hi: float,
        *,
        samples: int = DEFAULT_SAMPLES,
    ) -> "RawStrategy":
        grid = np.linspace(lo, hi, samples)
        return cls(grid=grid, bids=_apply(f, grid))

    @classmethod
    def from_rows(cls, rows: Sequence[tuple[float, float]]) -> "RawStrategy":
        if not rows:
            raise InputValidationError("no strategy samples")
        grid, bids = zip(*rows)
        return cls(grid=np.asarray(grid), bids=np.asarray(bids))

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.grid[0]), float(self.grid[-1])

    def eval(self, x: float | np.ndarray) -> float | np.ndarray:
        return _as_output(x, np.interp(np.asarray(x, dtype=float), self.grid, self.bids))

    __call__ = eval


def _apply(f: Callable[[np.ndarray], np.ndarray], grid: np.ndarray) -> np.ndarray:
    values = np.asarray(f(grid), dtype=float)
    if values.shape != grid.shape:
        values = np.array([float(f(x)) for x in grid])
    return values


def upper_inverse(c: MonotoneCurve, t: float | np.ndarray) -> float | np.ndarray:
    return c.upper_inverse(t)


def sample_masses(grid: np.ndarray, F: PiecewiseDensity) -> np.ndarray:
    """F-mass of the cell around each sample (cells split at midpoints)."""
    edges = np.concatenate([[grid[0]], 0.5 * (grid[1:] + grid[:-1]), [grid[-1]]])
    return np.diff(np.asarray(F.cdf(edges)))


def sort_strategy(raw: RawStrategy, F1: PiecewiseDensity, *, name: str = "s") -> MonotoneCurve:
    """
    Quantile rearrangement: the bid in the top q of the bid distribution is
    given to the type in the top q of F1. Keeps the bid distribution under F1.
    """
    lo, hi = raw.domain
    slack = 1e-9 * max(1.0, abs(F1.lower), abs(F1.upper))
    if abs(lo - F1.lower) > slack or abs(hi - F1.upper) > slack:
        raise InputValidationError(
            f"strategy covers [{lo}, {hi}] but the leader support is [{F1.lower}, {F1.upper}]"
        )
    order = np.argsort(raw.bids, kind="stable")
    sorted_bids = raw.bids[order]
    cumulative = np.cumsum(sample_masses(raw.grid, F1)[order])
    ranks = np.searchsorted(cumulative, np.asarray(F1.cdf(raw.grid)), side="left")
    values = sorted_bids[np.clip(ranks, 0, sorted_bids.size - 1)]
    return MonotoneCurve(grid=raw.grid, values=values, name=name)


def step_curve(
    cuts: Sequence[float],
    levels: Sequence[float],
    grid: np.ndarray,
    *,
    name: str = "g",
) -> MonotoneCurve:
    """Left-continuous step function: levels[j] on (cuts[j-1], cuts[j]]; cuts are inserted into the grid."""
    cuts = np.asarray(sorted(cuts), dtype=float)
    levels = np.asarray(levels, dtype=float)
    if levels.size != cuts.size + 1:
        raise InputValidationError(f"{cuts.size} cuts need {cuts.size + 1} levels, got {levels.size}")
    grid = np.asarray(grid, dtype=float)
    if cuts.size:
        # snap onto existing nodes so no two abscissae print alike
        nearest = np.clip(np.searchsorted(grid, cuts), 1, grid.size - 1)
        nearest = np.where(np.abs(grid[nearest - 1] - cuts) < np.abs(grid[nearest] - cuts), nearest - 1, nearest)
        slack = 1e-9 * max(1.0, float(np.max(np.abs(grid))))
        cuts = np.where(np.abs(grid[nearest] - cuts) <= slack, grid[nearest], cuts)
    inside = cuts[(cuts > grid[0]) & (cuts < grid[-1])]
    full = np.union1d(grid, inside)
    values = levels[np.searchsorted(cuts, full, side="left")]
    return MonotoneCurve(grid=full, values=values, left_continuous_steps=True, name=name)


def jump_abscissae(curve: MonotoneCurve, *, factor: float = JUMP_FACTOR) -> np.ndarray:
    """
    Samples where the increment over one cell exceeds `factor` times the
    secant slope two cells away on either side.
    """
    diffs = np.diff(curve.values)
    widths = np.diff(curve.grid)
    slopes = diffs / widths
    floor = 1e-9 * max(1.0, float(np.max(np.abs(curve.values))))
    padded = np.concatenate([[0.0, 0.0], slopes, [0.0, 0.0]])
    reference = np.maximum(padded[:-4], padded[4:])
    jumps = (diffs > floor) & (slopes > factor * reference)
    return curve.grid[1:][jumps]


__all__ = [
    "DEFAULT_SAMPLES",
    "MonotoneCurve",
    "RawStrategy",
    "jump_abscissae",
    "sample_masses",
    "sort_strategy",
    "step_curve",
    "upper_inverse",
]
