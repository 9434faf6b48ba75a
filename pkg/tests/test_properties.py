"""Structural properties checked on randomly drawn problems with reduced grids."""

from __future__ import annotations

import numpy as np
import pytest

from problems import random_problem
from src.components.follower import CommitmentProblem, response_profile, win_prob_follower
from src.components.oracle import agreement_tolerance, brute_force_leader_utility, leader_win_probability
from src.components.optimizer import leader_utility, step_equal_bid
from src.components.smoothing import equal_bid, reconstruct, smooth
from src.components.strategy import MonotoneCurve, RawStrategy, jump_abscissae, sample_masses, sort_strategy
from src.contracts.artifacts import GridSpec

REDUCED = GridSpec(leader_types=200, follower_types=200, bids=200, curve_samples=401)
CASES = range(20)


def _instance(case: int) -> tuple[CommitmentProblem, MonotoneCurve, np.random.Generator]:
    rng = np.random.default_rng(5000 + case)
    p = random_problem(rng, REDUCED)
    xs = p.leader_grid()
    steps = rng.exponential(size=xs.size - 1) * (rng.random(xs.size - 1) < 0.6)
    bids = np.concatenate([[0.0], np.cumsum(steps)])
    top = float(rng.uniform(0.3, 0.9)) * p.b2
    bids = bids * (top / bids[-1]) if bids[-1] > 0 else bids
    return p, MonotoneCurve(grid=xs, values=bids, name="s"), rng


@pytest.mark.parametrize("case", CASES)
def test_follower_utility_is_increasing_and_one_lipschitz(case: int) -> None:
    p, s, _ = _instance(case)
    profile = response_profile(p, s, samples=201)
    du = np.diff(profile.utility.values)
    dy = np.diff(profile.types)
    assert np.all(du >= -1e-12)
    assert np.all(du <= dy + 1e-7)


@pytest.mark.parametrize("case", CASES)
def test_best_responses_are_sorted(case: int) -> None:
    p, s, _ = _instance(case)
    profile = response_profile(p, s, samples=201)
    positive = profile.utility.values[:-1] > 1e-6
    assert np.all(np.diff(profile.best_bid)[positive] >= -1e-6)


@pytest.mark.parametrize("case", CASES)
def test_utility_is_realised_by_the_best_response(case: int) -> None:
    p, s, _ = _instance(case)
    profile = response_profile(p, s, samples=51)
    bids = profile.best_bid
    win = np.asarray(win_prob_follower(p, s, bids))
    realised = (profile.types - np.asarray(p.rule.pw(bids))) * win - np.asarray(p.rule.pp(bids))
    np.testing.assert_allclose(profile.utility.values, realised, atol=1e-9)


@pytest.mark.parametrize("case", CASES)
def test_smoothing_keeps_follower_utility_and_helps_the_leader(case: int) -> None:
    p, s, _ = _instance(case)
    s_star = smooth(p, s)
    assert np.all(s_star.values <= s.values + 1e-12)

    before = response_profile(p, s, samples=101).utility.values
    after = response_profile(p, s_star, samples=101).utility.values
    np.testing.assert_allclose(after, before, atol=1e-3 * max(1.0, p.b2))

    tol = agreement_tolerance(p, REDUCED)
    assert brute_force_leader_utility(p, s_star) >= brute_force_leader_utility(p, s) - tol


@pytest.mark.parametrize("case", CASES)
def test_equal_bid_utility_matches_brute_force(case: int) -> None:
    p, s, _ = _instance(case)
    s_star = smooth(p, s)
    expected = leader_utility(p, equal_bid(p, s_star))
    assert abs(brute_force_leader_utility(p, s_star) - expected) <= agreement_tolerance(p, REDUCED)


@pytest.mark.parametrize("case", CASES)
def test_sorting_keeps_the_bid_distribution(case: int) -> None:
    p, _, rng = _instance(case)
    xs = np.linspace(p.a1, p.a2, 401)
    phase = float(rng.uniform(0.0, 2.0 * np.pi))
    raw = RawStrategy(grid=xs, bids=0.4 * p.b2 * (1.0 + np.sin(6.0 * xs + phase)))
    sorted_curve = sort_strategy(raw, p.F1)
    masses = sample_masses(xs, p.F1)
    for level in np.linspace(0.0, 0.8 * p.b2, 17):
        below_sorted = float(np.sum(masses[sorted_curve.values <= level]))
        below_raw = float(np.sum(masses[raw.bids <= level]))
        assert below_sorted == pytest.approx(below_raw, abs=2.0 * float(masses.max()))

    tol = agreement_tolerance(p, REDUCED)
    assert brute_force_leader_utility(p, sorted_curve) >= brute_force_leader_utility(p, raw) - tol


@pytest.mark.parametrize("case", CASES)
def test_winning_probability_is_the_follower_mass_below_g(case: int) -> None:
    rng = np.random.default_rng(7000 + case)
    p = random_problem(rng, GridSpec(leader_types=2000, follower_types=2000, bids=2000, curve_samples=1001))
    cut = float(p.F1.quantile(rng.uniform(0.3, 0.7)))
    s_star = reconstruct(p, step_equal_bid(p, [cut], [0.0, float(rng.uniform(0.5, 1.0)) * p.b2]))
    g = equal_bid(p, s_star)
    jumps = jump_abscissae(g.curve)
    assert jumps.size >= 1

    span = p.a2 - p.a1
    xs = rng.uniform(p.a1, p.a2 - 0.02 * span, 1000)
    xs = xs[np.all(np.abs(xs[:, None] - jumps[None, :]) > 0.02 * span, axis=1)]
    win = leader_win_probability(p, s_star, xs)
    np.testing.assert_allclose(win, np.asarray(p.F2.cdf(np.asarray(g.eval(xs)))), atol=2e-2)
