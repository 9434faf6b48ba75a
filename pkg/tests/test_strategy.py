from __future__ import annotations

import unittest

import numpy as np
import pytest

from src.components.distributions import PiecewiseDensity
from src.components.strategy import (
    MonotoneCurve,
    RawStrategy,
    jump_abscissae,
    sort_strategy,
    step_curve,
    upper_inverse,
)
from src.contracts.errors import DomainError, InputValidationError


class MonotoneCurveTests(unittest.TestCase):
    def test_linear_interpolation(self) -> None:
        c = MonotoneCurve(grid=np.array([0.0, 0.5, 1.0]), values=np.array([0.0, 0.2, 0.6]))
        self.assertAlmostEqual(c.eval(0.25), 0.1)
        self.assertAlmostEqual(c(0.75), 0.4)

    def test_step_semantics_are_left_continuous(self) -> None:
        c = MonotoneCurve(grid=np.array([0.0, 0.5, 1.0]), values=np.array([0.0, 0.0, 1.0]), left_continuous_steps=True)
        self.assertEqual(c.eval(0.5), 0.0)
        self.assertEqual(c.eval(0.5001), 1.0)
        self.assertEqual(c.eval(0.0), 0.0)

    def test_rejects_decreasing_samples(self) -> None:
        with self.assertRaises(InputValidationError):
            MonotoneCurve(grid=np.array([0.0, 0.5, 1.0]), values=np.array([0.0, 0.5, 0.4]))

    def test_tiny_dips_are_repaired(self) -> None:
        c = MonotoneCurve(grid=np.array([0.0, 0.5, 1.0]), values=np.array([0.0, 0.5, 0.5 - 1e-10]))
        self.assertTrue(np.all(np.diff(c.values) >= 0))

    def test_eval_outside_domain(self) -> None:
        c = MonotoneCurve.constant(0.0, 0.0, 1.0, samples=5)
        with self.assertRaises(DomainError):
            c.eval(1.5)

    def test_upper_inverse_on_flat_part(self) -> None:
        c = MonotoneCurve(grid=np.array([0.0, 0.5, 1.0]), values=np.array([0.0, 0.2, 0.2]))
        self.assertAlmostEqual(c.upper_inverse(0.1), 0.25)
        self.assertEqual(c.upper_inverse(0.2), 1.0)
        self.assertEqual(upper_inverse(c, -0.1), 0.0)

    def test_upper_inverse_of_step(self) -> None:
        c = MonotoneCurve(grid=np.array([0.0, 0.5, 1.0]), values=np.array([0.0, 0.0, 1.0]), left_continuous_steps=True)
        self.assertEqual(c.upper_inverse(0.5), 0.5)
        self.assertEqual(c.upper_inverse(1.0), 1.0)

    def test_rows_round_trip(self) -> None:
        c = MonotoneCurve.from_function(lambda x: x**2, 0.0, 1.0, samples=11)
        again = MonotoneCurve.from_rows(c.to_rows())
        np.testing.assert_allclose(again.values, c.values)


def test_sort_strategy_reverses_a_decreasing_strategy() -> None:
    grid = np.linspace(0.0, 1.0, 101)
    raw = RawStrategy(grid=grid, bids=1.0 - grid)
    sorted_curve = sort_strategy(raw, PiecewiseDensity.uniform(0.0, 1.0))
    np.testing.assert_allclose(sorted_curve.values, grid, atol=1e-12)


def test_sort_strategy_keeps_a_monotone_strategy() -> None:
    raw = RawStrategy.from_function(lambda x: x**2 / 2.0, 0.0, 1.0, samples=201)
    sorted_curve = sort_strategy(raw, PiecewiseDensity.uniform(0.0, 1.0))
    np.testing.assert_allclose(sorted_curve.values, raw.bids, atol=1e-12)


def test_sort_strategy_folds_a_v_shape() -> None:
    grid = np.linspace(0.0, 1.0, 10001)
    raw = RawStrategy(grid=grid, bids=np.abs(grid - 0.5))
    sorted_curve = sort_strategy(raw, PiecewiseDensity.uniform(0.0, 1.0))
    np.testing.assert_allclose(sorted_curve.values, grid / 2.0, atol=1e-3)


def test_sort_strategy_needs_the_leader_support() -> None:
    raw = RawStrategy.from_function(lambda x: x, 0.0, 0.5, samples=11)
    with pytest.raises(InputValidationError):
        sort_strategy(raw, PiecewiseDensity.uniform(0.0, 1.0))


def test_raw_strategy_rejects_negative_bids() -> None:
    with pytest.raises(InputValidationError):
        RawStrategy(grid=np.array([0.0, 1.0]), bids=np.array([0.0, -0.1]))


def test_step_curve_inserts_cut() -> None:
    cut = 0.5671432904
    g = step_curve([cut], [0.0, 1.0], np.linspace(0.0, 1.0, 11))
    assert g.grid.size == 12
    assert g.eval(cut) == 0.0
    assert g.eval(0.5672) == 1.0


def test_step_curve_snaps_onto_nearby_node() -> None:
    g = step_curve([0.5 + 1e-12], [0.0, 1.0], np.linspace(0.0, 1.0, 11))
    assert g.grid.size == 11
    assert g.eval(0.5) == 0.0
    assert g.eval(0.6) == 1.0


def test_step_curve_level_count() -> None:
    with pytest.raises(InputValidationError):
        step_curve([0.3, 0.6], [0.0, 1.0], np.linspace(0.0, 1.0, 11))


def test_jump_abscissae() -> None:
    grid = np.linspace(0.0, 1.0, 101)
    curve = MonotoneCurve(grid=grid, values=grid + (grid > 0.5))
    np.testing.assert_allclose(jump_abscissae(curve), [0.51])
    assert jump_abscissae(MonotoneCurve(grid=grid, values=grid)).size == 0


if __name__ == "__main__":
    unittest.main()
