from __future__ import annotations

import logging
import unittest

import numpy as np
import pytest

from problems import kinked_strategy, random_problem, uniform_problem
from src.components import smoothing
from src.components.auction import all_pay, first_price
from src.components.smoothing import EqualBid, equal_bid, eu_curve, eu_point, reconstruct, smooth, solve_Q
from src.components.strategy import MonotoneCurve, step_curve
from src.contracts.artifacts import GridSpec
from src.contracts.errors import DomainError, InputValidationError


def smoothed_kinked(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    upper = 1.0 - 0.4225 / np.maximum(x, 1e-12)
    return np.where(x <= 0.4, x / 4.0, np.where(x <= 0.65, x - 0.3, upper))


def equal_bid_kinked(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.where(x <= 0.4, x / 2.0, np.where(x <= 0.65, 2.0 * x - 0.3, 1.0))


class SolveQTests(unittest.TestCase):
    def test_first_price(self) -> None:
        self.assertAlmostEqual(solve_Q(first_price(), 2.0, -1.0), 0.5)
        self.assertAlmostEqual(solve_Q(first_price(), 1.0, 0.5), -0.5)

    def test_all_pay(self) -> None:
        self.assertAlmostEqual(solve_Q(all_pay(), 0.5, -0.3), 0.3)

    def test_vectorised(self) -> None:
        np.testing.assert_allclose(solve_Q(first_price(), np.array([1.0, 4.0]), np.array([-0.5, -1.0])), [0.5, 0.25])

    def test_needs_positive_a(self) -> None:
        with self.assertRaises(DomainError):
            solve_Q(first_price(), 0.0, -1.0)


class EqualUtilityTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.p = uniform_problem()
        cls.s = kinked_strategy()

    def test_point_values(self) -> None:
        self.assertAlmostEqual(eu_point(self.p, 0.16, 0.5, 0.8), 0.3)
        self.assertAlmostEqual(eu_point(self.p, 0.16, 0.5, 0.32), 0.0)

    def test_point_needs_positive_mass(self) -> None:
        with self.assertRaises(DomainError):
            eu_point(self.p, 0.16, 0.5, 0.0)

    def test_curve_passes_through_best_response(self) -> None:
        curve = eu_curve(self.p, self.s, 0.5, xs=np.linspace(0.05, 1.0, 96))
        self.assertAlmostEqual(curve.utility, 0.16, places=5)
        self.assertAlmostEqual(curve.curve.eval(0.4), 0.1, places=5)
        self.assertAlmostEqual(curve.curve.eval(0.8), 0.3, places=5)
        rows = curve.to_rows()
        self.assertEqual(len(rows), 96)
        self.assertEqual(rows[0][0], 0.5)


class SmoothTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.p = uniform_problem()
        cls.s_star = smooth(cls.p, kinked_strategy())

    def test_matches_closed_form(self) -> None:
        xs = np.linspace(0.0, 1.0, 100)
        np.testing.assert_allclose(self.s_star.eval(xs), smoothed_kinked(xs), atol=1e-4)

    def test_never_raises_bids(self) -> None:
        s = kinked_strategy()
        self.assertTrue(np.all(self.s_star.values <= s.values + 1e-12))

    def test_equal_bid_of_smoothed_strategy(self) -> None:
        g = equal_bid(self.p, self.s_star)
        self.assertAlmostEqual(g.eval(0.45), 0.6, delta=1e-3)
        self.assertAlmostEqual(g.eval(0.2), 0.1, delta=1e-3)
        self.assertAlmostEqual(g.eval(0.9), 1.0, delta=1e-3)


def test_smooth_is_idempotent() -> None:
    p = uniform_problem(grid=GridSpec(curve_samples=501))
    once = smooth(p, kinked_strategy(501))
    twice = smooth(p, once)
    np.testing.assert_allclose(twice.values, once.values, atol=1e-4)


def test_smoothing_reports_bids_raised_above_the_original(
    monkeypatch: pytest.MonkeyPatch, caplog: pytest.LogCaptureFixture
) -> None:
    p = uniform_problem(grid=GridSpec(curve_samples=101))
    s = kinked_strategy(101)
    monkeypatch.setattr(smoothing, "_smooth_chunk", lambda p, envelope, ys, uB, chunk: np.asarray(chunk) + 1.0)
    with caplog.at_level(logging.WARNING, logger="src.components.smoothing"):
        s_star = smooth(p, s)
    assert "smoothed bid above the original" in caplog.text
    np.testing.assert_allclose(s_star.values, s.values)


def test_zero_strategy_stays_zero() -> None:
    p = uniform_problem(grid=GridSpec(curve_samples=201))
    s = MonotoneCurve.constant(0.0, 0.0, 1.0, samples=201, name="s")
    np.testing.assert_allclose(smooth(p, s).values, 0.0, atol=1e-12)


def test_equal_bid_from_closed_form_strategy() -> None:
    p = uniform_problem()
    s_star = MonotoneCurve.from_function(smoothed_kinked, 0.0, 1.0, name="s_star")
    g = equal_bid(p, s_star)
    xs = np.array([0.1, 0.3, 0.45, 0.6, 0.8, 1.0])
    np.testing.assert_allclose(g.eval(xs), equal_bid_kinked(xs), atol=1e-3)
    jumps = g.jump_points(tol=0.1)
    assert jumps.size == 1
    assert jumps[0] == pytest.approx(0.4, abs=1e-3)
    # left-continuous: the node at the jump keeps the lower branch
    cut = float(g.grid[np.argmin(np.abs(g.grid - 0.4))])
    assert float(g.eval(cut)) == pytest.approx(0.2, abs=1e-3)
    assert float(g.eval(cut + 2e-4)) == pytest.approx(0.5, abs=2e-3)


def test_reconstruct_inverts_equal_bid_on_smooth_g() -> None:
    p = uniform_problem()
    s_star = MonotoneCurve.from_function(smoothed_kinked, 0.0, 1.0, name="s_star")
    again = reconstruct(p, equal_bid(p, s_star))
    np.testing.assert_allclose(again.values, s_star.values, atol=1e-3)


def test_reconstruct_of_two_level_step() -> None:
    p = uniform_problem()
    t0 = 0.5671432904
    g = EqualBid(step_curve([t0], [0.0, 1.0], np.linspace(0.0, 1.0, 1001)))
    s_star = reconstruct(p, g)
    xs = s_star.grid
    np.testing.assert_allclose(s_star.values, np.where(xs > t0, 1.0 - t0 / np.maximum(xs, 1e-12), 0.0), atol=1e-9)


def test_reconstruct_point_values() -> None:
    p = uniform_problem()
    g = EqualBid(step_curve([0.567143], [0.0, 1.0], np.linspace(0.0, 1.0, 2001)))
    assert float(reconstruct(p, g).eval(0.8)) == pytest.approx(0.291071, abs=1e-6)
    p_all_pay = uniform_problem(all_pay())
    g_half = EqualBid(step_curve([0.5], [0.0, 1.0], np.linspace(0.0, 1.0, 2001)))
    assert float(reconstruct(p_all_pay, g_half).eval(0.75)) == pytest.approx(0.25, abs=1e-9)
    zero = EqualBid(step_curve([], [0.0], np.linspace(0.0, 1.0, 11)))
    np.testing.assert_allclose(reconstruct(p, zero).values, 0.0)


def test_reconstruct_all_pay_is_the_integral() -> None:
    p = uniform_problem(all_pay())
    g = EqualBid(step_curve([0.5], [0.0, 1.0], np.linspace(0.0, 1.0, 101)))
    s_star = reconstruct(p, g)
    xs = s_star.grid
    np.testing.assert_allclose(s_star.values, np.maximum(xs - 0.5, 0.0), atol=1e-12)


def test_equal_bid_needs_step_semantics() -> None:
    with pytest.raises(InputValidationError):
        EqualBid(MonotoneCurve(grid=np.array([0.0, 1.0]), values=np.array([0.0, 1.0])))


def test_step_functions_survive_the_round_trip(rng: np.random.Generator) -> None:
    for _ in range(50):
        p = random_problem(rng)
        grid = np.linspace(p.a1, p.a2, 201)
        count = int(rng.integers(1, 4))
        cuts = np.sort(rng.uniform(p.a1, p.a2, count))
        levels = np.sort(rng.uniform(0.0, p.b2, count + 1))
        g = EqualBid(step_curve(cuts, levels, grid))
        back = equal_bid(p, reconstruct(p, g))
        np.testing.assert_allclose(back.grid, g.grid)
        np.testing.assert_allclose(back.values, g.values, atol=1e-7)


if __name__ == "__main__":
    unittest.main()
