"""
Follower best responses against a committed, weakly increasing leader strategy.

Ties between equal bids go to the follower, and among equally good bids the
follower submits the lowest. For a weakly increasing s every bid strictly
between two leader bid levels is beaten by the lower level (same winning
probability, lower payment), so bids {0} U {s(x_i)} are the whole candidate
set; each candidate is a line y -> F1[c]*y - (p^w(b)F1[c] + p^p(b)) and u_B is
their upper envelope.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from src.components.auction import PaymentRule, validate
from src.components.distributions import PiecewiseDensity
from src.components.numerics import golden_section_max, merge_grid
from src.components.strategy import MonotoneCurve
from src.contracts.artifacts import GridSpec, Tolerance
from src.contracts.errors import DomainError, InputValidationError
from src.utils.parallel import map_concurrently

logger = logging.getLogger(__name__)

_CELLS_PER_CHUNK = 2_000_000
_REFINE_ITERATIONS = 48


@dataclass(frozen=True, slots=True, eq=False)
class CommitmentProblem:
    F1: PiecewiseDensity
    F2: PiecewiseDensity
    rule: PaymentRule
    tol: Tolerance = field(default_factory=Tolerance)
    grid: GridSpec = field(default_factory=GridSpec)

    def __post_init__(self) -> None:
        violations = validate(self.rule)
        if violations:
            details = "; ".join(
                f"{v.message} on [{v.lo}, {'inf' if v.hi is None else v.hi}]" for v in violations
            )
            raise InputValidationError(f"invalid payment rule: {details}")
        if self.F2.lower < 0 or self.F1.lower < 0:
            raise InputValidationError("type supports must be nonnegative")

    @property
    def a1(self) -> float:
        return self.F1.lower

    @property
    def a2(self) -> float:
        return self.F1.upper

    @property
    def b1(self) -> float:
        return self.F2.lower

    @property
    def b2(self) -> float:
        return self.F2.upper

    def follower_grid(self, samples: int | None = None) -> np.ndarray:
        return np.linspace(0.0, self.b2, samples or self.grid.curve_samples)

    def leader_grid(self, samples: int | None = None) -> np.ndarray:
        base = np.linspace(self.a1, self.a2, samples or self.grid.curve_samples)
        return merge_grid(base, self.F1.breakpoints)


@dataclass(frozen=True, slots=True, eq=False)
class UtilityEnvelope:
    """Candidate-bid lines; index 0 is the zero bid, index i the bid s(x_{i-1})."""

    bids: np.ndarray
    cutoffs: np.ndarray
    win: np.ndarray
    cost: np.ndarray
    tie_tol: float

    def evaluate(self, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(u_B(y), index of the lowest maximising candidate) for every y."""
        ys = np.asarray(ys, dtype=float).reshape(-1)
        utility = np.empty(ys.size)
        index = np.empty(ys.size, dtype=int)
        rows = max(1, _CELLS_PER_CHUNK // self.bids.size)
        for start in range(0, ys.size, rows):
            chunk = ys[start : start + rows]
            table = chunk[:, None] * self.win[None, :] - self.cost[None, :]
            best = table.max(axis=1)
            index[start : start + rows] = np.argmax(table >= (best - self.tie_tol)[:, None], axis=1)
            utility[start : start + rows] = best
        return utility, index

    def __call__(self, ys: np.ndarray) -> np.ndarray:
        return self.evaluate(ys)[0]


@dataclass(frozen=True, slots=True, eq=False)
class ResponseProfile:
    utility: MonotoneCurve
    best_bid: np.ndarray
    win_cutoff: np.ndarray

    @property
    def types(self) -> np.ndarray:
        return self.utility.grid

    def best_bid_at(self, y: float | np.ndarray) -> float | np.ndarray:
        result = np.interp(np.asarray(y, dtype=float), self.types, self.best_bid)
        return float(result) if np.ndim(y) == 0 else result

    def win_cutoff_at(self, y: float | np.ndarray) -> float | np.ndarray:
        result = np.interp(np.asarray(y, dtype=float), self.types, self.win_cutoff)
        return float(result) if np.ndim(y) == 0 else result

    def to_rows(self) -> list[tuple[float, float, float, float]]:
        return list(
            zip(
                self.types.tolist(),
                self.utility.values.tolist(),
                self.best_bid.tolist(),
                self.win_cutoff.tolist(),
            )
        )


def utility_envelope(p: CommitmentProblem, s: MonotoneCurve) -> UtilityEnvelope:
    bids = np.concatenate([[0.0], s.values])
    cutoffs = np.asarray(s.upper_inverse(bids))
    win = np.asarray(p.F1.cdf(cutoffs))
    cost = np.asarray(p.rule.pw(bids)) * win + np.asarray(p.rule.pp(bids))
    return UtilityEnvelope(bids=bids, cutoffs=cutoffs, win=win, cost=cost, tie_tol=p.tol.abs_tol)


def win_prob_follower(p: CommitmentProblem, s: MonotoneCurve, t: float | np.ndarray) -> float | np.ndarray:
    """P_B[t]: the follower wins against every leader type bidding <= t."""
    ts = np.asarray(t, dtype=float)
    if np.any(ts < 0):
        raise DomainError("bids must be >= 0")
    result = np.asarray(p.F1.cdf(np.asarray(s.upper_inverse(ts))))
    return float(result) if np.ndim(t) == 0 else result


def _check_types(p: CommitmentProblem, ys: np.ndarray) -> None:
    slack = 1e-12 * max(1.0, p.b2)
    if np.any(ys < -slack) or np.any(ys > p.b2 + slack):
        raise DomainError(f"follower types must lie in [0, {p.b2}]")


def _respond(
    p: CommitmentProblem,
    s: MonotoneCurve,
    ys: np.ndarray,
    envelope: UtilityEnvelope | None = None,
    *,
    refine: bool = True,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ys = np.asarray(ys, dtype=float).reshape(-1)
    _check_types(p, ys)
    envelope = envelope or utility_envelope(p, s)
    _, index = envelope.evaluate(ys)
    bids = envelope.bids[index].copy()

    if refine:
        interior = index >= 1
        if np.any(interior):
            n = s.grid.size
            sample = index[interior] - 1
            lo = s.grid[np.clip(sample - 1, 0, n - 1)]
            hi = s.grid[np.clip(sample + 1, 0, n - 1)]
            y_in = ys[interior]

            def reparametrised(x: np.ndarray) -> np.ndarray:
                bid = np.asarray(s.eval(x))
                return (y_in - np.asarray(p.rule.pw(bid))) * np.asarray(p.F1.cdf(x)) - np.asarray(p.rule.pp(bid))

            x_best, u_best = golden_section_max(reparametrised, lo, hi, iterations=_REFINE_ITERATIONS)
            grid_best = _realised(p, s, y_in, bids[interior])
            better = u_best > grid_best + envelope.tie_tol
            refined_bids = bids[interior]
            refined_bids[better] = np.asarray(s.eval(x_best[better]))
            bids[interior] = refined_bids

    cutoffs = np.asarray(s.upper_inverse(bids))
    utility = _realised(p, s, ys, bids, cutoffs)
    return utility, bids, cutoffs


def _realised(
    p: CommitmentProblem,
    s: MonotoneCurve,
    ys: np.ndarray,
    bids: np.ndarray,
    cutoffs: np.ndarray | None = None,
) -> np.ndarray:
    if cutoffs is None:
        cutoffs = np.asarray(s.upper_inverse(bids))
    win = np.asarray(p.F1.cdf(cutoffs))
    return (ys - np.asarray(p.rule.pw(bids))) * win - np.asarray(p.rule.pp(bids))


def follower_utility(p: CommitmentProblem, s: MonotoneCurve, y: float | np.ndarray) -> float | np.ndarray:
    utility, _, _ = _respond(p, s, np.asarray(y, dtype=float))
    return float(utility[0]) if np.ndim(y) == 0 else utility


def best_response(p: CommitmentProblem, s: MonotoneCurve, y: float | np.ndarray) -> float | np.ndarray:
    """Lowest utility-maximising bid of follower type y."""
    _, bids, _ = _respond(p, s, np.asarray(y, dtype=float))
    return float(bids[0]) if np.ndim(y) == 0 else bids


def response_profile(
    p: CommitmentProblem,
    s: MonotoneCurve,
    *,
    samples: int | None = None,
    refine: bool = True,
) -> ResponseProfile:
    ys = p.follower_grid(samples)
    envelope = utility_envelope(p, s)
    chunks = np.array_split(ys, max(1, min(8, ys.size // 256)))
    parts = map_concurrently(lambda chunk: _respond(p, s, chunk, envelope, refine=refine), chunks)
    utility = np.concatenate([part[0] for part in parts])
    bids = np.concatenate([part[1] for part in parts])
    cutoffs = np.concatenate([part[2] for part in parts])
    logger.info("response profile on %d follower types, max u_B=%.6g", ys.size, float(utility.max()))
    return ResponseProfile(
        utility=MonotoneCurve(grid=ys, values=utility, name="u_B"),
        best_bid=bids,
        win_cutoff=cutoffs,
    )


__all__ = [
    "CommitmentProblem",
    "ResponseProfile",
    "UtilityEnvelope",
    "best_response",
    "follower_utility",
    "response_profile",
    "utility_envelope",
    "win_prob_follower",
]
