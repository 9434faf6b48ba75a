"""
Equal-utility curves, the smoothing transform s -> s*, and the two maps
between smoothed strategies and equal-bid functions g.

Both maps go through Phi(x) = p^w(s*(x))F1[x] + p^p(s*(x)), which equals the
integral of f1*g from a1 to x. equal_bid differentiates it, reconstruct
integrates g and solves Q(F1[x], -Phi(x)) for the bid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from src.components.auction import PaymentRule
from src.components.follower import (
    CommitmentProblem,
    UtilityEnvelope,
    follower_utility,
    response_profile,
    utility_envelope,
)
from src.components.numerics import golden_section_max
from src.components.strategy import MonotoneCurve
from src.contracts.errors import DomainError, InputValidationError
from src.utils.parallel import map_concurrently

logger = logging.getLogger(__name__)

_X_CHUNK = 128
_REFINE_ITERATIONS = 40
_SMOOTH_RATIO = 2.0
DOMINANCE_TOL = 1e-6


def q_root(rule: PaymentRule, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorised root of b + a*p^w(t) + p^p(t) = 0; 0 where a <= 0."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    knots = rule.knots()
    pw_k = np.asarray(rule.winning.extended(knots))
    pp_k = np.asarray(rule.participation.extended(knots))
    pw_s = np.asarray(rule.pw_slope(knots))
    pp_s = np.asarray(rule.pp_slope(knots))

    target = -b
    q = a[..., None] * pw_k + pp_k
    j = np.clip(np.sum(q <= target[..., None], axis=-1) - 1, 0, None)
    q_j = np.take_along_axis(q, j[..., None], axis=-1)[..., 0]
    slope = a * pw_s[j] + pp_s[j]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = knots[j] + (target - q_j) / slope
    return np.where(a > 0, t, 0.0)


def solve_Q(rule: PaymentRule, a: float | np.ndarray, b: float | np.ndarray) -> float | np.ndarray:
    """The unique t with b + a*p^w(t) + p^p(t) = 0 (may be negative)."""
    if np.any(np.asarray(a) <= 0):
        raise DomainError("solve_Q needs a > 0")
    result = q_root(rule, np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return float(result) if np.ndim(a) == 0 and np.ndim(b) == 0 else result


@dataclass(frozen=True, slots=True, eq=False)
class EqualUtilityCurve:
    follower_type: float
    utility: float
    curve: MonotoneCurve

    def to_rows(self) -> list[tuple[float, float, float]]:
        return [(self.follower_type, x, t) for x, t in self.curve.to_rows()]


@dataclass(frozen=True, slots=True, eq=False)
class EqualBid:
    """g on a grid, left-continuous steps: values[i] holds on (grid[i-1], grid[i]]."""

    curve: MonotoneCurve

    def __post_init__(self) -> None:
        if not self.curve.left_continuous_steps:
            raise InputValidationError("an equal-bid curve must use left-continuous step semantics")
        if float(self.curve.values[0]) < -1e-12:
            raise InputValidationError("equal-bid values must be >= 0")

    @classmethod
    def from_values(cls, grid: np.ndarray, values: np.ndarray) -> "EqualBid":
        return cls(MonotoneCurve(grid=grid, values=values, left_continuous_steps=True, name="g"))

    @property
    def grid(self) -> np.ndarray:
        return self.curve.grid

    @property
    def values(self) -> np.ndarray:
        return self.curve.values

    def eval(self, x: float | np.ndarray) -> float | np.ndarray:
        return self.curve.eval(x)

    __call__ = eval

    def jump_points(self, *, tol: float = 1e-9) -> np.ndarray:
        """Grid abscissae after which g jumps by more than tol."""
        jumps = np.diff(self.values) > tol
        return self.grid[:-1][jumps]

    def to_rows(self) -> list[tuple[float, float]]:
        return self.curve.to_rows()


def eu_point(p: CommitmentProblem, uB: float, y: float, x: float | np.ndarray) -> float | np.ndarray:
    """Bid t at leader type x that leaves follower type y exactly at utility uB."""
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= p.a1):
        raise DomainError(f"eu_point needs x > a1 = {p.a1}")
    F = np.asarray(p.F1.cdf(xs))
    result = q_root(p.rule, F, uB - y * F)
    return float(result) if np.ndim(x) == 0 else result


def eu_curve(
    p: CommitmentProblem,
    s: MonotoneCurve,
    y: float,
    xs: np.ndarray | None = None,
) -> EqualUtilityCurve:
    if xs is None:
        xs = s.grid[s.grid > p.a1]
    xs = np.asarray(xs, dtype=float)
    uB = float(follower_utility(p, s, y))
    values = np.asarray(eu_point(p, uB, y, xs))
    return EqualUtilityCurve(
        follower_type=float(y),
        utility=uB,
        curve=MonotoneCurve(grid=xs, values=values, name=f"eu[{y:g}]"),
    )


def _smooth_chunk(
    p: CommitmentProblem,
    envelope: UtilityEnvelope,
    ys: np.ndarray,
    uB: np.ndarray,
    xs: np.ndarray,
) -> np.ndarray:
    F = np.asarray(p.F1.cdf(xs))
    table = q_root(p.rule, F[:, None], uB[None, :] - ys[None, :] * F[:, None])
    j = np.argmax(table, axis=1)
    best = table[np.arange(xs.size), j]

    lo = ys[np.clip(j - 1, 0, ys.size - 1)]
    hi = ys[np.clip(j + 1, 0, ys.size - 1)]

    def eu_of_y(y: np.ndarray) -> np.ndarray:
        return q_root(p.rule, F, envelope(y) - y * F)

    _, refined = golden_section_max(eu_of_y, lo, hi, iterations=_REFINE_ITERATIONS)
    return np.maximum(best, refined)


def smooth(p: CommitmentProblem, s: MonotoneCurve, *, samples: int | None = None) -> MonotoneCurve:
    """s*(x) = sup over follower types y of eu(y, x), on the grid of s."""
    if float(s.values[0]) < 0:
        raise InputValidationError("leader bids must be >= 0")
    ys = p.follower_grid(samples)
    envelope = utility_envelope(p, s)
    uB = response_profile(p, s, samples=ys.size).utility.values

    xs = s.grid
    interior = xs > p.a1
    values = np.zeros(xs.size)
    inner = xs[interior]
    chunks = [inner[i : i + _X_CHUNK] for i in range(0, inner.size, _X_CHUNK)]
    parts = map_concurrently(lambda chunk: _smooth_chunk(p, envelope, ys, uB, chunk), chunks)
    if parts:
        values[interior] = np.concatenate(parts)
    excess = values - s.values
    limit = DOMINANCE_TOL * max(1.0, p.b2)
    if np.any(excess > limit):
        worst = int(np.argmax(excess))
        logger.warning(
            "smoothed bid above the original at %d leader types (worst %.3g at x=%.6g); clamped",
            int(np.sum(excess > limit)),
            float(excess[worst]),
            float(xs[worst]),
        )
    values = np.minimum(values, s.values)
    if not interior[0]:
        values[0] = min(float(s.values[0]), float(values[1]))
    values = np.maximum(values, 0.0)
    logger.info("smoothed strategy on %d leader types (max drop %.3g)", xs.size, float(np.max(s.values - values)))
    return MonotoneCurve(grid=xs, values=np.maximum.accumulate(values), name="s_star")


def _phi(p: CommitmentProblem, s_star: MonotoneCurve) -> tuple[np.ndarray, np.ndarray]:
    F = np.asarray(p.F1.cdf(s_star.grid))
    bids = s_star.values
    return F, np.asarray(p.rule.pw(bids)) * F + np.asarray(p.rule.pp(bids))


def equal_bid(p: CommitmentProblem, s_star: MonotoneCurve) -> EqualBid:
    """
    g from the left derivative of Phi with respect to F1.

    Cell averages dPhi/dF1 are exact for step g whose jumps sit on the grid.
    Where neighbouring averages change smoothly the average is extrapolated
    from the cell midpoint to the right cell end.
    """
    xs = s_star.grid
    F, Phi = _phi(p, s_star)
    dF = np.diff(F)
    if np.any(dF <= 0):
        raise DomainError("leader grid must lie inside the support of F1")
    averages = np.diff(Phi) / dF

    values = averages.copy()
    if averages.size >= 3:
        diffs = np.diff(averages)
        mids = 0.5 * (xs[1:] + xs[:-1])
        floor = 1e-9 * max(1.0, p.b2)
        ahead = np.concatenate([np.abs(diffs[1:]), [0.0]])
        behind = np.concatenate([[0.0], np.abs(diffs[:-1])])
        regular = np.abs(diffs) <= _SMOOTH_RATIO * np.minimum(ahead, behind) + floor
        step = (xs[2:] - mids[1:]) / (mids[1:] - mids[:-1])
        values[1:] = np.where(regular, averages[1:] + diffs * step, averages[1:])

    g = np.concatenate([[values[0]], values])
    g = np.maximum.accumulate(np.clip(g, 0.0, p.b2))
    return EqualBid.from_values(xs, g)


def reconstruct(p: CommitmentProblem, g: EqualBid) -> MonotoneCurve:
    """s* with Phi(x) = integral of f1*g from a1; s*(a1) = 0."""
    xs = g.grid
    slack = 1e-9 * max(1.0, abs(p.a1), abs(p.a2))
    if abs(xs[0] - p.a1) > slack or xs[-1] > p.a2 + slack:
        raise DomainError(f"equal-bid grid must start at a1 = {p.a1} and end by a2 = {p.a2}")
    F = np.asarray(p.F1.cdf(xs))
    Phi = np.concatenate([[0.0], np.cumsum(g.values[1:] * np.diff(F))])
    bids = q_root(p.rule, F, -Phi)
    bids = np.where(F > 0, bids, 0.0)
    return MonotoneCurve(grid=xs, values=np.maximum(bids, 0.0), name="s_star")


__all__ = [
    "EqualBid",
    "EqualUtilityCurve",
    "equal_bid",
    "eu_curve",
    "eu_point",
    "q_root",
    "reconstruct",
    "smooth",
    "solve_Q",
]
