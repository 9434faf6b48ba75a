from __future__ import annotations

import math
import unittest

import numpy as np
import pytest

from src.components.numerics import (
    bracket_root,
    cell_nodes,
    find_root,
    golden_section_max,
    integrate,
    merge_grid,
    sign_change_brackets,
)
from src.contracts.artifacts import Tolerance
from src.contracts.errors import ConvergenceError, DomainError, NoRootError


class IntegrateTests(unittest.TestCase):
    def test_polynomial(self) -> None:
        self.assertAlmostEqual(integrate(lambda x: x * x, 0.0, 1.0), 1.0 / 3.0, places=9)

    def test_kink_with_split_point(self) -> None:
        value = integrate(lambda x: abs(x - 0.3), 0.0, 1.0, splits=[0.3])
        self.assertAlmostEqual(value, 0.5 * 0.3**2 + 0.5 * 0.7**2, places=9)

    def test_empty_interval_is_zero(self) -> None:
        self.assertEqual(integrate(math.exp, 2.0, 2.0), 0.0)

    def test_reversed_bounds_raise(self) -> None:
        with self.assertRaises(DomainError):
            integrate(math.exp, 1.0, 0.0)

    def test_budget_exhaustion_reports_estimate(self) -> None:
        with self.assertRaises(ConvergenceError) as ctx:
            integrate(lambda x: math.sin(1.0 / x), 1e-4, 1.0, Tolerance(abs_tol=1e-12, rel_tol=0.0, max_iter=5))
        self.assertTrue(math.isfinite(ctx.exception.estimate))
        self.assertGreater(ctx.exception.residual, 0.0)


def test_bracket_root_finds_fixed_point_of_cos() -> None:
    bracket = bracket_root(lambda x: math.cos(x) - x, 0.0, 1.0)
    assert bracket.root == pytest.approx(0.7390851332151607, abs=1e-8)
    assert bracket.hi - bracket.lo <= 1e-9 or bracket.lo == bracket.hi


def test_find_root_accepts_reversed_bracket() -> None:
    assert find_root(lambda t: t + math.log(t), 1.0, 0.1) == pytest.approx(0.5671432904, abs=1e-8)


def test_bracket_root_without_sign_change_carries_bracket() -> None:
    with pytest.raises(NoRootError) as excinfo:
        bracket_root(lambda x: x * x + 1.0, -1.0, 1.0)
    err = excinfo.value
    assert (err.lo, err.hi) == (-1.0, 1.0)
    assert err.f_lo == pytest.approx(2.0)
    assert err.f_hi == pytest.approx(2.0)


def test_bracket_root_out_of_iterations() -> None:
    with pytest.raises(ConvergenceError):
        bracket_root(lambda x: x**3 - 0.2, 0.0, 1.0, Tolerance(abs_tol=1e-15, max_iter=3))


def test_sign_change_brackets_locates_every_root() -> None:
    grid = np.linspace(0.5, 7.0, 66)
    brackets = sign_change_brackets(math.sin, grid)
    assert len(brackets) == 2
    for (lo, hi), root in zip(brackets, (math.pi, 2.0 * math.pi)):
        assert lo <= root <= hi


def test_golden_section_max_is_elementwise() -> None:
    centres = np.array([0.1, 0.5, 0.93])
    x, f = golden_section_max(lambda z: -((z - centres) ** 2), np.zeros(3), np.ones(3))
    np.testing.assert_allclose(x, centres, atol=1e-8)
    np.testing.assert_allclose(f, 0.0, atol=1e-12)


def test_cell_nodes_integrate_cubics_exactly() -> None:
    edges = np.array([0.0, 0.2, 0.7, 1.0])
    nodes, weights = cell_nodes(edges, order=3)
    assert nodes.shape == (3, 3)
    assert float(np.sum(nodes**3 * weights)) == pytest.approx(0.25, abs=1e-14)


def test_merge_grid_drops_near_duplicates() -> None:
    base = np.linspace(0.0, 1.0, 11)
    merged = merge_grid(base, [0.3 + 1e-14, 0.35, 1.0])
    assert merged.size == 12
    assert 0.35 in merged
    assert np.all(np.diff(merged) > 1e-9)


if __name__ == "__main__":
    unittest.main()
