"""
Leader objective over equal-bid functions g, the stationarity function h, and
the solvers that pick g.

u_A(g) = integral over (a1, a2] of {[x - p^w(s*)]F2[g] - p^p(s*)} f1 dx with
s* = reconstruct(g). Inside a cell (x_{i-1}, x_i] g is constant, so
Phi(z) = Phi(x_{i-1}) + g_i (F1[z] - F1[x_{i-1}]) and s*(z) is exact at every
quadrature node.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Literal, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from src.components.follower import CommitmentProblem
from src.components.numerics import bracket_root, cell_nodes, merge_grid, sign_change_brackets
from src.components.smoothing import EqualBid, q_root, reconstruct
from src.components.strategy import MonotoneCurve, step_curve
from src.contracts.errors import ContractError, DomainError, NoRootError, UnsupportedProblemError
from src.utils.parallel import map_concurrently

logger = logging.getLogger(__name__)

type Method = Literal["first_price_uniform", "all_pay", "general_search"]

RESIDUAL_TOL = 1e-3
ROOT_SCAN_SAMPLES = 4001
DEFAULT_RESTARTS = 16
_MAX_ROUNDS = 25
_ASCENT_STOP = 1e-10


@dataclass(frozen=True, slots=True, eq=False)
class Solution:
    g: EqualBid
    s_star: MonotoneCurve
    cut_points: list[float]
    leader_utility: float
    method: Method
    stationarity_residual: float
    notes: list[str] = field(default_factory=list)

    @property
    def residual_flagged(self) -> bool:
        return self.stationarity_residual > RESIDUAL_TOL

    def to_json(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "cut_points": list(self.cut_points),
            "leader_utility": self.leader_utility,
            "stationarity_residual": self.stationarity_residual,
            "g": [list(row) for row in self.g.to_rows()],
            "s_star": [list(row) for row in self.s_star.to_rows()],
            "notes": list(self.notes),
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Solution":
        try:
            g_rows = data["g"]
            s_rows = data["s_star"]
            return cls(
                g=EqualBid(MonotoneCurve.from_rows([tuple(r) for r in g_rows], name="g", left_continuous_steps=True)),
                s_star=MonotoneCurve.from_rows([tuple(r) for r in s_rows], name="s_star"),
                cut_points=[float(c) for c in data.get("cut_points", [])],
                leader_utility=float(data["leader_utility"]),
                method=data["method"],
                stationarity_residual=float(data.get("stationarity_residual", 0.0)),
                notes=[str(n) for n in data.get("notes", [])],
            )
        except KeyError as exc:
            raise ContractError(f"solution is missing {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise ContractError(f"malformed solution: {exc}") from exc


@dataclass(frozen=True, slots=True, eq=False)
class _Cells:
    edges: np.ndarray
    levels: np.ndarray
    F: np.ndarray
    Phi: np.ndarray


def _cells(p: CommitmentProblem, g: EqualBid) -> _Cells:
    slack = 1e-9 * max(1.0, abs(p.a1), abs(p.a2))
    if abs(g.grid[0] - p.a1) > slack or g.grid[-1] > p.a2 + slack:
        raise DomainError(f"equal-bid grid must start at a1 = {p.a1} and end by a2 = {p.a2}")
    bp = p.F1.breakpoints
    edges = merge_grid(g.grid, bp[(bp > g.grid[0]) & (bp < g.grid[-1])])
    levels = np.asarray(g.eval(edges))
    F = np.asarray(p.F1.cdf(edges))
    Phi = np.concatenate([[0.0], np.cumsum(levels[1:] * np.diff(F))])
    return _Cells(edges=edges, levels=levels, F=F, Phi=Phi)


def _bids_at_nodes(p: CommitmentProblem, cells: _Cells) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    nodes, weights = cell_nodes(cells.edges)
    Fz = np.asarray(p.F1.cdf(nodes))
    Phiz = cells.Phi[:-1, None] + cells.levels[1:, None] * (Fz - cells.F[:-1, None])
    bids = np.maximum(q_root(p.rule, Fz, -Phiz), 0.0)
    return nodes, weights, Fz, bids


def leader_utility(p: CommitmentProblem, g: EqualBid) -> float:
    cells = _cells(p, g)
    nodes, weights, _, bids = _bids_at_nodes(p, cells)
    win = np.asarray(p.F2.cdf(cells.levels[1:]))[:, None]
    integrand = ((nodes - np.asarray(p.rule.pw(bids))) * win - np.asarray(p.rule.pp(bids))) * np.asarray(p.F1.pdf(nodes))
    return float(np.sum(integrand * weights))


def _h_profile(p: CommitmentProblem, g: EqualBid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(x_i, g(x_i), h(x_i)) at every cell's right end."""
    cells = _cells(p, g)
    x = cells.edges[1:]
    v = cells.levels[1:]
    Fx = cells.F[1:]
    f1 = np.asarray(p.F1.pdf(x))
    f2g = np.asarray(p.F2.pdf(v))
    F2g = np.asarray(p.F2.cdf(v))
    bids = np.maximum(q_root(p.rule, Fx, -cells.Phi[1:]), 0.0)

    if p.rule.kind == "all_pay":
        return x, v, f1 * (x * f2g - 1.0 + Fx)

    if p.rule.kind == "first_price":
        with np.errstate(divide="ignore", invalid="ignore"):
            per_cell = F2g * np.diff(np.asarray(p.F1.log_cdf(cells.edges)))
        per_cell[0] = 0.0
    else:
        nodes, weights, Fz, node_bids = _bids_at_nodes(p, cells)
        pw_d = np.asarray(p.rule.pw_slope(node_bids))
        pp_d = np.asarray(p.rule.pp_slope(node_bids))
        multiplier = -np.asarray(p.F1.pdf(nodes)) * (pw_d * F2g[:, None] + pp_d) / (pw_d * Fz + pp_d)
        per_cell = -np.sum(multiplier * weights, axis=1)

    after = np.cumsum(per_cell[::-1])[::-1]
    tail = np.concatenate([after[1:], [0.0]])
    return x, v, f1 * ((x - np.asarray(p.rule.pw(bids))) * f2g - tail)


def stationarity_h(p: CommitmentProblem, g: EqualBid, x: float | np.ndarray) -> float | np.ndarray:
    """h = dL/dg at leader type x, with the multiplier eliminated."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs <= p.a1) or np.any(xs > p.a2):
        raise DomainError(f"stationarity_h needs x in ({p.a1}, {p.a2}]")
    grid = np.union1d(g.grid, xs)
    refined = EqualBid.from_values(grid, np.asarray(g.eval(grid)))
    at, _, h = _h_profile(p, refined)
    result = h[np.searchsorted(at, xs)]
    return float(result[0]) if np.ndim(x) == 0 else result


def stationarity_residual(p: CommitmentProblem, g: EqualBid) -> float:
    """
    Largest violation of the free-variable conditions: |h| just left of each
    jump, and the mean of h over every level strictly between 0 and b2.
    """
    x, v, h = _h_profile(p, g)
    scale = max(1e-12, p.b2)
    terms = [0.0]
    jumps = np.flatnonzero(np.diff(v) > 1e-9 * scale)
    terms.extend(np.abs(h[jumps]).tolist())

    widths = np.diff(np.concatenate([[g.grid[0]], x]))
    free = (v > 1e-9 * scale) & (v < p.b2 - 1e-9 * scale)
    bounds = np.concatenate([[0], jumps + 1, [v.size]])
    for start, stop in zip(bounds[:-1], bounds[1:]):
        if stop > start and free[start]:
            block = slice(start, stop)
            terms.append(abs(float(np.sum(h[block] * widths[block]) / np.sum(widths[block]))))
    return float(max(terms))


def sign_structure(p: CommitmentProblem, g: EqualBid, *, tol: float = 1e-6) -> int:
    """Cells with h > 0 where g = 0, or h < 0 where g = b2."""
    _, v, h = _h_profile(p, g)
    bound = tol * max(1.0, float(np.max(np.abs(h))))
    at_zero = (v <= 1e-12) & (h > bound)
    at_top = (v >= p.b2 - 1e-12) & (h < -bound)
    return int(np.sum(at_zero) + np.sum(at_top))


def step_equal_bid(
    p: CommitmentProblem,
    cuts: Sequence[float],
    levels: Sequence[float],
    *,
    samples: int | None = None,
) -> EqualBid:
    levels = np.asarray(levels, dtype=float)
    if np.any(levels < 0) or np.any(levels > p.b2 + 1e-12):
        raise DomainError(f"levels must lie in [0, {p.b2}]")
    if any(c < p.a1 or c > p.a2 for c in cuts):
        raise DomainError(f"cut points must lie in [{p.a1}, {p.a2}]")
    return EqualBid(step_curve(cuts, np.minimum(levels, p.b2), p.leader_grid(samples), name="g"))


def cut_point_roots(p: CommitmentProblem, coefficient: float) -> list[float]:
    """All roots of phi(t) = t + c*ln F1[t] on (a1, a2]."""
    ts = np.linspace(p.a1, p.a2, ROOT_SCAN_SAMPLES)[1:]

    def phi(t: float) -> float:
        return t + coefficient * float(p.F1.log_cdf(t))

    roots: list[float] = []
    for lo, hi in sign_change_brackets(phi, ts):
        root = lo if lo == hi else bracket_root(phi, lo, hi, p.tol).root
        if not roots or abs(root - roots[-1]) > p.tol.abs_tol:
            roots.append(root)
    return roots


def overbidding_margin(solution: Solution | MonotoneCurve) -> float:
    """max of s*(x) - x over leader types above a1; positive means bids above value."""
    s_star = solution.s_star if isinstance(solution, Solution) else solution
    return float(np.max(s_star.values[1:] - s_star.grid[1:]))


def _density_nonincreasing_note(p: CommitmentProblem) -> str:
    holds = p.F1.density_nonincreasing
    return f"three-level regime condition 2f1^2 - F1 f1' >= 0 {'holds' if holds else 'fails'} for F1"


def _finish(
    p: CommitmentProblem,
    g: EqualBid,
    method: Method,
    cut_points: list[float],
    notes: list[str],
) -> Solution:
    s_star = reconstruct(p, g)
    utility = leader_utility(p, g)
    residual = stationarity_residual(p, g)
    notes = list(notes)
    if residual > RESIDUAL_TOL:
        notes.append(f"stationarity residual {residual:.3g} exceeds {RESIDUAL_TOL}")
    kinks = p.rule.kinks()
    if kinks:
        notes.append(f"payment rule kinks at bids {kinks}")
    margin = overbidding_margin(s_star)
    notes.append(f"overbidding margin max(s*(x) - x) = {margin:.6g}")
    logger.info("%s: cut points %s, leader utility %.6g, residual %.3g", method, cut_points, utility, residual)
    return Solution(
        g=g,
        s_star=s_star,
        cut_points=cut_points,
        leader_utility=utility,
        method=method,
        stationarity_residual=residual,
        notes=notes,
    )


def solve_first_price_uniform_F2(p: CommitmentProblem) -> Solution:
    if p.rule.kind != "first_price":
        raise UnsupportedProblemError("closed form needs a first-price rule")
    if not p.F2.is_uniform or p.b1 != 0.0:
        raise UnsupportedProblemError("closed form needs F2 uniform on [0, b2]")

    roots = cut_point_roots(p, p.b2)
    statement_roots = cut_point_roots(p, p.a2)
    notes = [f"a2-coefficient roots: {statement_roots}"]
    if not roots:
        notes.append("cut-point equation has no root; g = b2 everywhere")
        return _finish(p, step_equal_bid(p, [], [p.b2]), "first_price_uniform", [], notes)

    candidates = [(leader_utility(p, step_equal_bid(p, [t], [0.0, p.b2])), t) for t in roots]
    utility, t0 = max(candidates)
    if len(roots) > 1:
        notes.append(f"cut-point equation has {len(roots)} roots {roots}; kept the best")
    return _finish(p, step_equal_bid(p, [t0], [0.0, p.b2]), "first_price_uniform", [t0], notes)


def solve_all_pay(p: CommitmentProblem) -> Solution:
    if p.rule.kind != "all_pay":
        raise UnsupportedProblemError("closed form needs an all-pay rule")
    if not p.F2.density_nondecreasing:
        raise UnsupportedProblemError("closed form needs a weakly increasing f2")

    def psi(t: float) -> float:
        return p.b2 - t - p.b2 * float(p.F1.cdf(t))

    notes: list[str] = []
    try:
        t0 = bracket_root(psi, p.a1, p.a2, p.tol).root
    except NoRootError:
        t0 = p.a1
        notes.append("b2 - t - b2 F1[t] has no root in the support; g = b2 everywhere")
    if t0 <= p.a1:
        return _finish(p, step_equal_bid(p, [], [p.b2]), "all_pay", [], notes)
    return _finish(p, step_equal_bid(p, [t0], [0.0, p.b2]), "all_pay", [t0], notes)


@dataclass(slots=True)
class _Candidate:
    cuts: np.ndarray
    levels: np.ndarray
    utility: float = float("-inf")


def _evaluate(p: CommitmentProblem, cuts: np.ndarray, levels: np.ndarray, samples: int) -> float:
    return leader_utility(p, step_equal_bid(p, np.sort(cuts), np.maximum.accumulate(levels), samples=samples))


def _best_level(
    p: CommitmentProblem,
    objective: Callable[[float], float],
    lo: float,
    hi: float,
    allow_zero: bool,
    xatol: float,
) -> tuple[float, float]:
    options: list[tuple[float, float]] = []
    if allow_zero:
        options.append((objective(0.0), 0.0))
    lo = max(lo, p.b1)
    if hi > lo:
        found = minimize_scalar(lambda v: -objective(v), bounds=(lo, hi), method="bounded", options={"xatol": xatol})
        options.append((-float(found.fun), float(found.x)))
        options.append((objective(hi), hi))
    elif hi >= lo:
        options.append((objective(lo), lo))
    return max(options)


def _ascend(p: CommitmentProblem, start: _Candidate, samples: int) -> _Candidate:
    cuts = start.cuts.copy()
    levels = start.levels.copy()
    best = _evaluate(p, cuts, levels, samples)
    xatol = 1e-6 * max(1.0, p.a2 - p.a1, p.b2)
    for _ in range(_MAX_ROUNDS):
        before = best
        for j in range(cuts.size):
            lo = p.a1 if j == 0 else cuts[j - 1]
            hi = p.a2 if j == cuts.size - 1 else cuts[j + 1]
            if hi - lo <= xatol:
                continue

            def cut_objective(c: float, j: int = j) -> float:
                trial = cuts.copy()
                trial[j] = c
                return _evaluate(p, trial, levels, samples)

            found = minimize_scalar(lambda c: -cut_objective(c), bounds=(lo, hi), method="bounded", options={"xatol": xatol})
            if -found.fun > best:
                best = -float(found.fun)
                cuts[j] = float(found.x)

        for j in range(levels.size):
            lo = 0.0 if j == 0 else levels[j - 1]
            hi = p.b2 if j == levels.size - 1 else levels[j + 1]

            def level_objective(v: float, j: int = j) -> float:
                trial = levels.copy()
                trial[j] = v
                return _evaluate(p, cuts, trial, samples)

            value, level = _best_level(p, level_objective, lo, hi, allow_zero=lo == 0.0, xatol=xatol)
            if value > best:
                best = value
                levels[j] = level
        if best - before <= _ASCENT_STOP:
            break
    return _Candidate(cuts=cuts, levels=levels, utility=best)


def _starts(p: CommitmentProblem, max_steps: int, restarts: int, seed: int) -> list[_Candidate]:
    rng = np.random.default_rng(seed)
    span = p.a2 - p.a1
    cuts = p.a1 + span * np.arange(1, max_steps) / max_steps
    if max_steps > 1:
        upper = np.linspace(p.b2, max(p.b1, p.b2 / max_steps), max_steps - 1)[::-1]
        levels = np.concatenate([[0.0], upper])
    else:
        levels = np.array([p.b2])
    starts = [_Candidate(cuts=cuts, levels=levels)]
    for _ in range(restarts - 1):
        cuts = np.sort(rng.uniform(p.a1, p.a2, max_steps - 1))
        raw = rng.uniform(p.b1, p.b2, max_steps)
        raw[rng.random(max_steps) < 0.3] = 0.0
        starts.append(_Candidate(cuts=cuts, levels=np.maximum.accumulate(np.sort(raw))))
    return starts


def solve_general(
    p: CommitmentProblem,
    max_steps: int,
    *,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    search_samples: int | None = None,
) -> Solution:
    """Coordinate ascent over monotone step functions with levels in {0} U [b1, b2]."""
    if max_steps < 1:
        raise DomainError("max_steps must be >= 1")
    samples = search_samples or min(p.grid.curve_samples, 801)
    starts = _starts(p, max_steps, max(1, restarts), seed)
    found = map_concurrently(lambda start: _ascend(p, start, samples), starts)
    best = max(found, key=lambda c: c.utility)
    polished = _ascend(p, best, p.grid.curve_samples)

    cuts = np.sort(polished.cuts)
    levels = np.maximum.accumulate(polished.levels)
    changes = [float(c) for c, lo, hi in zip(cuts, levels[:-1], levels[1:]) if hi - lo > 1e-9 * max(1.0, p.b2)]
    notes = [f"{len(starts)} restarts (seed {seed}), levels {levels.tolist()}"]
    if p.rule.kind == "first_price" and p.F2.is_uniform:
        notes.append(_density_nonincreasing_note(p))
    g = step_equal_bid(p, cuts, levels)
    return _finish(p, g, "general_search", changes, notes)


__all__ = [
    "Method",
    "RESIDUAL_TOL",
    "Solution",
    "cut_point_roots",
    "leader_utility",
    "overbidding_margin",
    "sign_structure",
    "solve_all_pay",
    "solve_first_price_uniform_F2",
    "solve_general",
    "stationarity_h",
    "stationarity_residual",
    "step_equal_bid",
]
