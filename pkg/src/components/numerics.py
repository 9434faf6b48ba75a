"""
Shared numeric kernels: adaptive Simpson quadrature with caller-supplied split
points, bracketed root finding (Illinois regula falsi with forced bisection
steps), a vectorised golden-section maximiser and Gauss-Legendre cell nodes.

All functions are pure and safe to call from several threads.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from numpy.polynomial.legendre import leggauss

from src.contracts.artifacts import Tolerance
from src.contracts.errors import ConvergenceError, DomainError, NoRootError

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = Tolerance()

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

type ScalarFn = Callable[[float], float]


def integrate(
    f: ScalarFn,
    lo: float,
    hi: float,
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    splits: Iterable[float] = (),
) -> float:
    """
    Adaptive Simpson estimate of the integral of f over [lo, hi].

    `splits` are interior breakpoints of f; each piece between consecutive
    breakpoints gets its own subdivision budget of tol.max_iter.
    """
    if hi < lo:
        raise DomainError(f"integrate needs lo <= hi, got [{lo}, {hi}]")
    if hi == lo:
        return 0.0

    edges = [lo, *sorted(s for s in splits if lo < s < hi), hi]
    total = 0.0
    residual = 0.0
    failed = False
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        estimate, piece_residual, ok = _adaptive_simpson(f, a, b, tol)
        total += estimate
        residual += piece_residual
        failed = failed or not ok

    if failed:
        raise ConvergenceError(
            f"adaptive Simpson did not converge on [{lo}, {hi}] within {tol.max_iter} subdivisions",
            estimate=total,
            residual=residual,
        )
    return total


def _simpson(f: ScalarFn, a: float, fa: float, b: float, fb: float) -> tuple[float, float, float]:
    m = 0.5 * (a + b)
    fm = f(m)
    return m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive_simpson(f: ScalarFn, lo: float, hi: float, tol: Tolerance) -> tuple[float, float, bool]:
    f_lo, f_hi = f(lo), f(hi)
    mid, f_mid, whole = _simpson(f, lo, f_lo, hi, f_hi)
    eps = tol.bound(whole)

    stack = [(lo, f_lo, hi, f_hi, mid, f_mid, whole, eps)]
    total = 0.0
    residual = 0.0
    subdivisions = 0
    ok = True
    while stack:
        a, fa, b, fb, m, fm, whole, eps = stack.pop()
        lm, flm, left = _simpson(f, a, fa, m, fm)
        rm, frm, right = _simpson(f, m, fm, b, fb)
        delta = left + right - whole
        if abs(delta) <= 15.0 * eps or b - a <= 4.0 * np.finfo(float).eps * max(1.0, abs(a), abs(b)):
            total += left + right + delta / 15.0
            continue
        if subdivisions >= tol.max_iter:
            total += left + right + delta / 15.0
            residual += abs(delta) / 15.0
            ok = False
            continue
        subdivisions += 1
        stack.append((a, fa, m, fm, lm, flm, left, 0.5 * eps))
        stack.append((m, fm, b, fb, rm, frm, right, 0.5 * eps))
    return total, residual, ok


@dataclass(frozen=True, slots=True)
class RootBracket:
    root: float
    lo: float
    hi: float
    f_lo: float
    f_hi: float
    iterations: int


def bracket_root(f: ScalarFn, lo: float, hi: float, tol: Tolerance = DEFAULT_TOLERANCE) -> RootBracket:
    """
    Shrink a sign-change bracket of f to width <= tol.abs_tol.

    Illinois regula falsi, with every other step forced to bisection so the
    width halves at least every two iterations.
    """
    if hi < lo:
        lo, hi = hi, lo
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return RootBracket(lo, lo, lo, f_lo, f_lo, 0)
    if f_hi == 0.0:
        return RootBracket(hi, hi, hi, f_hi, f_hi, 0)
    if f_lo * f_hi > 0.0:
        raise NoRootError(
            f"no sign change on [{lo}, {hi}]: f(lo)={f_lo:.6g}, f(hi)={f_hi:.6g}",
            lo=lo,
            hi=hi,
            f_lo=f_lo,
            f_hi=f_hi,
        )

    # damped copies of f_lo / f_hi drive the secant; the true values are reported
    g_lo, g_hi = f_lo, f_hi
    kept = 0
    for iteration in range(1, tol.max_iter + 1):
        if hi - lo <= tol.abs_tol:
            return RootBracket(0.5 * (lo + hi), lo, hi, f_lo, f_hi, iteration - 1)

        mid = 0.5 * (lo + hi)
        if iteration % 2 == 1:
            secant = (lo * g_hi - hi * g_lo) / (g_hi - g_lo)
            if lo < secant < hi:
                mid = secant
        f_mid = f(mid)
        if f_mid == 0.0:
            return RootBracket(mid, mid, mid, f_mid, f_mid, iteration)

        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo, g_lo = mid, f_mid, f_mid
            if kept == 1:
                g_hi *= 0.5
            kept = 1
        else:
            hi, f_hi, g_hi = mid, f_mid, f_mid
            if kept == -1:
                g_lo *= 0.5
            kept = -1

    if hi - lo <= tol.abs_tol:
        return RootBracket(0.5 * (lo + hi), lo, hi, f_lo, f_hi, tol.max_iter)
    raise ConvergenceError(
        f"root bracket [{lo}, {hi}] still wider than {tol.abs_tol} after {tol.max_iter} iterations",
        estimate=0.5 * (lo + hi),
        residual=hi - lo,
    )


def find_root(f: ScalarFn, lo: float, hi: float, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    return bracket_root(f, lo, hi, tol).root


def sign_change_brackets(f: ScalarFn, grid: Iterable[float]) -> list[tuple[float, float]]:
    """Consecutive grid pairs on which f changes sign (or hits zero)."""
    points = list(grid)
    values = [f(x) for x in points]
    brackets: list[tuple[float, float]] = []
    for (a, fa), (b, fb) in zip(zip(points[:-1], values[:-1]), zip(points[1:], values[1:])):
        if fa == 0.0:
            brackets.append((a, a))
        elif fa * fb < 0.0:
            brackets.append((a, b))
    if values and values[-1] == 0.0:
        brackets.append((points[-1], points[-1]))
    return brackets


def golden_section_max(
    f: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    *,
    iterations: int = 60,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Elementwise golden-section maximisation of f on [lo[i], hi[i]].

    f takes an array of abscissae (same shape as lo) and returns the values.
    Returns (argmax, max) arrays.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1 = f(x1)
    f2 = f(x2)
    for _ in range(iterations):
        move_right = f1 < f2
        lo = np.where(move_right, x1, lo)
        hi = np.where(move_right, hi, x2)
        new_x1 = np.where(move_right, x2, hi - _INV_PHI * (hi - lo))
        new_x2 = np.where(move_right, lo + _INV_PHI * (hi - lo), x1)
        fresh = np.where(move_right, new_x2, new_x1)
        f_fresh = f(fresh)
        f1, f2 = np.where(move_right, f2, f_fresh), np.where(move_right, f_fresh, f1)
        x1, x2 = new_x1, new_x2
    best_x = np.where(f1 >= f2, x1, x2)
    best_f = np.maximum(f1, f2)
    return best_x, best_f


def cell_nodes(edges: np.ndarray, order: int = 5) -> tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre nodes and weights for every cell [edges[i], edges[i+1]].
    Shapes are (cells, order); weights already include the half-width factor.
    """
    edges = np.asarray(edges, dtype=float)
    ref_nodes, ref_weights = leggauss(order)
    left = edges[:-1, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    nodes = left + half * (ref_nodes[None, :] + 1.0)
    weights = half * ref_weights[None, :]
    return nodes, weights


def merge_grid(base: np.ndarray, extra: Iterable[float] | np.ndarray, *, rel_slack: float = 1e-9) -> np.ndarray:
    """Sorted union of base and extra; extra points within slack of a base node are dropped."""
    base = np.unique(np.asarray(base, dtype=float))
    extra = np.unique(np.asarray(list(extra), dtype=float))
    if extra.size == 0 or base.size == 0:
        return np.union1d(base, extra)
    slack = rel_slack * max(1.0, float(np.max(np.abs(base))))
    idx = np.clip(np.searchsorted(base, extra), 1, max(1, base.size - 1))
    gap = np.minimum(np.abs(base[idx - 1] - extra), np.abs(base[np.minimum(idx, base.size - 1)] - extra))
    return np.union1d(base, extra[gap > slack])


__all__ = [
    "DEFAULT_TOLERANCE",
    "RootBracket",
    "bracket_root",
    "cell_nodes",
    "find_root",
    "golden_section_max",
    "integrate",
    "merge_grid",
    "sign_change_brackets",
]
