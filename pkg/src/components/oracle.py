"""
Brute-force verifier on finite grids.

Leader and follower types are cell midpoints weighted by their distribution
mass; the follower picks the lowest grid bid that maximises its utility against
the leader's bid distribution, wins ties, and the leader wins only with a
strictly higher bid. Sorted scans keep every evaluation O((n + k) log n + k*m).
"""

from __future__ import annotations

import logging
from typing import Callable, Sequence

import numpy as np

from src.components.follower import CommitmentProblem
from src.components.numerics import merge_grid
from src.components.optimizer import (
    Solution,
    cut_point_roots,
    leader_utility,
    overbidding_margin,
    step_equal_bid,
)
from src.components.smoothing import EqualBid, reconstruct
from src.components.strategy import MonotoneCurve
from src.contracts.artifacts import CutPointReport, GridSpec, PerturbationReport, SweepResult
from src.contracts.errors import DomainError, UnsupportedProblemError
from src.utils.parallel import map_concurrently

logger = logging.getLogger(__name__)

type FollowerStrategy = Callable[[np.ndarray], np.ndarray]

TIE_EPS = 1e-12
AUDIT_THRESHOLD = 1e-4
_CUT_SHIFT = 0.05
_LEVEL_SHIFT = 0.05
_BUMP_WIDTH = 0.1
_ROW_CHUNK = 256


def _midpoints(lo: float, hi: float, count: int, cdf: Callable[[np.ndarray], np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(lo, hi, count + 1)
    return 0.5 * (edges[1:] + edges[:-1]), np.diff(np.asarray(cdf(edges)))


def agreement_tolerance(p: CommitmentProblem, grid: GridSpec) -> float:
    """Three grid cells of the combined type/bid scale."""
    return 3.0 * (p.b2 + p.a2) * grid.resolution()


def _follower_bids(
    p: CommitmentProblem,
    leader_bids: np.ndarray,
    leader_mass: np.ndarray,
    ys: np.ndarray,
    grid: GridSpec,
) -> np.ndarray:
    ceiling = grid.bid_ceiling if grid.bid_ceiling is not None else max(p.b2, float(np.max(leader_bids)))
    bids = np.linspace(0.0, ceiling, grid.bids)
    order = np.argsort(leader_bids, kind="stable")
    sorted_bids = leader_bids[order]
    cumulative = np.concatenate([[0.0], np.cumsum(leader_mass[order])])
    win = cumulative[np.searchsorted(sorted_bids, bids, side="right")]
    pw = np.asarray(p.rule.pw(bids))
    pp = np.asarray(p.rule.pp(bids))

    chosen = np.empty(ys.size)
    for start in range(0, ys.size, _ROW_CHUNK):
        y = ys[start : start + _ROW_CHUNK, None]
        table = (y - pw[None, :]) * win[None, :] - pp[None, :]
        best = table.max(axis=1)
        chosen[start : start + _ROW_CHUNK] = bids[np.argmax(table >= (best - TIE_EPS)[:, None], axis=1)]
    return chosen


def _leader_win(leader_bids: np.ndarray, follower_bids: np.ndarray, follower_mass: np.ndarray) -> np.ndarray:
    order = np.argsort(follower_bids, kind="stable")
    cumulative = np.concatenate([[0.0], np.cumsum(follower_mass[order])])
    return cumulative[np.searchsorted(follower_bids[order], leader_bids, side="left")]


def _grid_game(
    p: CommitmentProblem,
    s: MonotoneCurve,
    grid: GridSpec,
    follower: FollowerStrategy | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(leader types, their masses, their bids, follower bids, follower masses)."""
    xs, x_mass = _midpoints(p.a1, p.a2, grid.leader_types, p.F1.cdf)
    ys, y_mass = _midpoints(p.b1, p.b2, grid.follower_types, p.F2.cdf)
    leader_bids = np.asarray(s.eval(xs))
    if follower is None:
        follower_bids = _follower_bids(p, leader_bids, x_mass, ys, grid)
    else:
        follower_bids = np.asarray(follower(ys), dtype=float)
    return xs, x_mass, leader_bids, follower_bids, y_mass


def brute_force_leader_utility(
    p: CommitmentProblem,
    s: MonotoneCurve,
    grid: GridSpec | None = None,
    *,
    follower: FollowerStrategy | None = None,
) -> float:
    """Leader expected utility on the grid; `follower` fixes the follower's bids instead of best responses."""
    grid = grid or p.grid
    xs, x_mass, leader_bids, follower_bids, y_mass = _grid_game(p, s, grid, follower)
    win = _leader_win(leader_bids, follower_bids, y_mass)
    payoff = (xs - np.asarray(p.rule.pw(leader_bids))) * win - np.asarray(p.rule.pp(leader_bids))
    return float(np.sum(payoff * x_mass))


def leader_win_probability(
    p: CommitmentProblem,
    s: MonotoneCurve,
    xs: np.ndarray,
    grid: GridSpec | None = None,
) -> np.ndarray:
    """Probability that leader type x outbids the grid best-responding follower."""
    grid = grid or p.grid
    xs = np.asarray(xs, dtype=float)
    if np.any(xs < p.a1) or np.any(xs > p.a2):
        raise DomainError(f"leader types must lie in [{p.a1}, {p.a2}]")
    _, _, _, follower_bids, y_mass = _grid_game(p, s, grid, None)
    return _leader_win(np.asarray(s.eval(xs)), follower_bids, y_mass)


def sweep_cut_point(p: CommitmentProblem, t_grid: Sequence[float] | None = None) -> SweepResult:
    """Leader utility of the two-level g (0 up to t, b2 after) along t_grid."""
    if t_grid is None:
        t_grid = np.linspace(p.a1, p.a2, 502)[1:-1]
    ts = [float(t) for t in t_grid]
    if any(t <= p.a1 or t >= p.a2 for t in ts):
        raise DomainError(f"sweep points must lie in ({p.a1}, {p.a2})")
    utilities = map_concurrently(lambda t: leader_utility(p, step_equal_bid(p, [t], [0.0, p.b2])), ts)
    curve = list(zip(ts, utilities))
    argmax = max(curve, key=lambda row: row[1])[0]
    logger.info("cut-point sweep over %d points: argmax %.6g", len(ts), argmax)
    return SweepResult(argmax=argmax, curve=curve)


def _shift_cuts(p: CommitmentProblem, g: EqualBid, delta: float) -> EqualBid | None:
    jumps = g.jump_points()
    if jumps.size == 0:
        return None
    moved = np.clip(jumps + delta, p.a1, p.a2)
    grid = merge_grid(g.grid, moved)
    values = np.asarray(g.eval(np.clip(grid - delta, p.a1, p.a2)))
    return EqualBid.from_values(grid, values)


def _shift_levels(p: CommitmentProblem, g: EqualBid, rng: np.random.Generator) -> EqualBid:
    levels, inverse = np.unique(g.values, return_inverse=True)
    moved = levels + rng.uniform(-_LEVEL_SHIFT, _LEVEL_SHIFT, levels.size) * p.b2
    values = np.clip(moved[inverse], 0.0, p.b2)
    return EqualBid.from_values(g.grid, np.maximum.accumulate(values))


def _bump(p: CommitmentProblem, g: EqualBid, rng: np.random.Generator) -> EqualBid:
    span = p.a2 - p.a1
    width = rng.uniform(0.0, _BUMP_WIDTH) * span
    start = rng.uniform(p.a1, p.a2 - width)
    inside = (g.grid > start) & (g.grid <= start + width)
    values = g.values + np.where(inside, rng.uniform(-_LEVEL_SHIFT, _LEVEL_SHIFT) * p.b2, 0.0)
    return EqualBid.from_values(g.grid, np.maximum.accumulate(np.clip(values, 0.0, p.b2)))


def perturbation_audit(
    p: CommitmentProblem,
    sol: Solution,
    trials: int = 200,
    seed: int = 0,
    *,
    threshold: float = AUDIT_THRESHOLD,
) -> PerturbationReport:
    """Largest utility gain over seeded random monotone perturbations of g."""
    rng = np.random.default_rng(seed)
    base = leader_utility(p, sol.g)
    max_gain = float("-inf")
    worst: str | None = None
    span = p.a2 - p.a1
    for _ in range(trials):
        kind = ("cut", "level", "bump")[int(rng.integers(3))]
        if kind == "cut":
            candidate = _shift_cuts(p, sol.g, rng.uniform(-_CUT_SHIFT, _CUT_SHIFT) * span)
            if candidate is None:
                kind, candidate = "level", _shift_levels(p, sol.g, rng)
        elif kind == "level":
            candidate = _shift_levels(p, sol.g, rng)
        else:
            candidate = _bump(p, sol.g, rng)
        gain = leader_utility(p, candidate) - base
        if gain > max_gain:
            max_gain, worst = gain, kind
    max_gain = max(max_gain, 0.0) if trials else 0.0
    report = PerturbationReport(
        trials=trials,
        seed=seed,
        base_utility=base,
        max_gain=max_gain,
        threshold=threshold,
        worst_kind=worst,
    )
    logger.info("perturbation audit: %d trials, max gain %.3g (%s)", trials, max_gain, worst)
    return report


def adjudicate_cut_point(
    p: CommitmentProblem,
    t_grid: Sequence[float] | None = None,
    *,
    sweep: SweepResult | None = None,
) -> CutPointReport:
    """Compare both forms of the cut-point equation against the utility sweep."""
    proof_roots = cut_point_roots(p, p.b2)
    statement_roots = cut_point_roots(p, p.a2)
    if sweep is None:
        sweep = sweep_cut_point(p, t_grid)

    def two_level(t: float) -> EqualBid:
        return step_equal_bid(p, [t], [0.0, p.b2])

    utilities: dict[str, float] = {}
    for label, roots in (("b2", proof_roots), ("a2", statement_roots)):
        for root in roots:
            if p.a1 < root < p.a2:
                utilities[f"{label}:{root:.6g}"] = leader_utility(p, two_level(root))
    best = two_level(sweep.argmax)
    s_star = reconstruct(p, best)
    return CutPointReport(
        proof_form_roots=proof_roots,
        statement_form_roots=statement_roots,
        sweep_argmax=sweep.argmax,
        utility_at_argmax=leader_utility(p, best),
        utilities_at_roots=utilities,
        overbidding_margin=overbidding_margin(s_star),
    )


def bne_first_price_uniform(p: CommitmentProblem, grid: GridSpec | None = None) -> float:
    """Leader utility when both bidders play the symmetric equilibrium bid v/2."""
    same_support = p.F1.support == p.F2.support and p.a1 == 0.0
    if p.rule.kind != "first_price" or not (p.F1.is_uniform and p.F2.is_uniform and same_support):
        raise UnsupportedProblemError("the baseline needs a first-price rule with identical uniform [0, a] types")
    grid = grid or p.grid
    s = MonotoneCurve.from_function(lambda x: x / 2.0, p.a1, p.a2, samples=grid.curve_samples, name="s")
    return brute_force_leader_utility(p, s, grid, follower=lambda y: y / 2.0)


__all__ = [
    "AUDIT_THRESHOLD",
    "adjudicate_cut_point",
    "agreement_tolerance",
    "bne_first_price_uniform",
    "brute_force_leader_utility",
    "leader_win_probability",
    "perturbation_audit",
    "sweep_cut_point",
]
