"""Tests for quadratic scoring and the Simple Max winner rule."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from forecast_lab.config.settings import MechanismSettings
from forecast_lab.data.beliefs import Reflection, apply_reflection, reflect_bits
from forecast_lab.exceptions import ScenarioError
from forecast_lab.mechanism.scoring import (
    WinnerShare,
    batch_shares,
    batch_total_scores,
    quadratic_score,
    share_of,
    simple_max,
    total_score,
    winner_set,
)


class TestQuadraticScore:
    def test_perfect_report_scores_one(self):
        assert quadratic_score(1.0, 1) == 1.0
        assert quadratic_score(0.0, 0) == 1.0

    def test_worst_report_scores_zero(self):
        assert quadratic_score(0.0, 1) == 0.0

    def test_fraction_is_exact(self):
        assert quadratic_score(Fraction(1, 4), 1) == Fraction(7, 16)

    @pytest.mark.parametrize("r", [-0.1, 1.5])
    def test_report_out_of_range(self, r):
        with pytest.raises(ScenarioError):
            quadratic_score(r, 1)

    def test_outcome_must_be_bit(self):
        with pytest.raises(ScenarioError):
            quadratic_score(0.5, 2)

    def test_truthful_report_maximizes_expected_score(self):
        q = 0.3
        grid = np.linspace(0, 1, 101)
        expected = [q * quadratic_score(r, 1) + (1 - q) * quadratic_score(r, 0) for r in grid]
        assert grid[int(np.argmax(expected))] == pytest.approx(q)


class TestTotalScore:
    def test_sums_events(self):
        assert total_score([1.0, 0.5], [1, 0]) == pytest.approx(1.75)

    def test_length_mismatch(self):
        with pytest.raises(ScenarioError):
            total_score([0.5], [1, 0])


class TestSimpleMax:
    def test_single_winner(self):
        share = simple_max([[0.9], [0.1]], [1])
        assert share.probabilities == (1.0, 0.0)
        assert share.winners == frozenset({0})

    def test_tie_splits_uniformly(self):
        share = simple_max([[0.5], [0.5], [0.0]], [1])
        assert share.probabilities == pytest.approx((0.5, 0.5, 0.0))

    def test_exact_tie_with_fractions(self):
        reports = [[Fraction(1, 4), Fraction(3, 4)], [Fraction(3, 4), Fraction(1, 4)]]
        assert winner_set(reports, [1, 1]) == frozenset({0, 1})
        assert winner_set(reports, [0, 1]) == frozenset({0})

    def test_float_tie_within_tolerance(self):
        assert winner_set([[0.1 + 0.2], [0.3]], [1]) == frozenset({0, 1})

    def test_empty_reports_rejected(self):
        with pytest.raises(ScenarioError):
            winner_set([], [1])

    def test_shares_must_sum_to_one(self):
        with pytest.raises(ScenarioError):
            WinnerShare((0.5, 0.4))


class TestBatchScoring:
    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(0)
        reports = rng.random((3, 5))
        outcomes = (rng.random((7, 5)) < 0.5).astype(int)
        batch = batch_total_scores(reports, outcomes)
        for k, y in enumerate(outcomes):
            for i, r in enumerate(reports):
                assert batch[k, i] == pytest.approx(total_score(list(r), list(y)), abs=1e-12)

    def test_batch_shares_rows_sum_to_one(self):
        scores = np.array([[1.0, 1.0, 0.0], [0.2, 0.9, 0.9], [0.5, 0.1, 0.2]])
        shares = batch_shares(scores)
        np.testing.assert_allclose(shares.sum(axis=1), 1.0)
        np.testing.assert_allclose(shares[1], [0.0, 0.5, 0.5])

    def test_share_of_agrees_with_batch_shares(self):
        scores = np.array([[1.0, 1.0, 0.0], [0.2, 0.9, 0.9], [0.5, 0.1, 0.2]])
        np.testing.assert_allclose(share_of(scores[:, 0], scores[:, 1:]), batch_shares(scores)[:, 0])

    def test_share_of_without_rivals(self):
        np.testing.assert_allclose(share_of(np.array([0.3, 0.1]), np.zeros((2, 0))), 1.0)


def _random_instance(rng: np.random.Generator, max_m: int = 8, max_n: int = 5) -> tuple[np.ndarray, np.ndarray]:
    m = int(rng.integers(1, max_m + 1))
    n = int(rng.integers(1, max_n + 1))
    return rng.random((n, m)), rng.integers(0, 2, size=m)


class TestWinnerSetInvariants:
    def test_highest_score_is_closest_report(self):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            reports, y = _random_instance(rng)
            sq_dist = ((reports - y) ** 2).sum(axis=1)
            closest = frozenset(np.flatnonzero(sq_dist <= sq_dist.min() + 1e-12).tolist())
            assert winner_set(reports.tolist(), y.tolist()) == closest

    def test_three_player_example(self):
        reports = [(0.9, 0.9), (0.1, 0.1), (0.5, 0.5)]
        assert winner_set(reports, [1, 1]) == frozenset({0})
        assert simple_max(reports, [1, 1]).probabilities == (1.0, 0.0, 0.0)

    def test_permuting_players_permutes_shares(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            reports, y = _random_instance(rng)
            perm = rng.permutation(len(reports))
            base = simple_max(reports.tolist(), y.tolist()).probabilities
            permuted = simple_max(reports[perm].tolist(), y.tolist()).probabilities
            assert permuted == tuple(base[k] for k in perm)

    def test_reflection_keeps_winner_set(self):
        rng = np.random.default_rng(2)
        quarters = [Fraction(k, 4) for k in range(5)]
        for _ in range(500):
            m = int(rng.integers(1, 6))
            n = int(rng.integers(2, 5))
            reports = [tuple(quarters[k] for k in rng.integers(0, 5, size=m)) for _ in range(n)]
            y = rng.integers(0, 2, size=m).tolist()
            ref = Reflection(frozenset(np.flatnonzero(rng.random(m) < 0.5).tolist()))
            reflected = [apply_reflection(ref, r) for r in reports]
            assert winner_set(reflected, reflect_bits(ref, y)) == winner_set(reports, y)


class TestTieToleranceSettings:
    def test_exact_tolerance_from_settings(self):
        reports = [[Fraction(1, 2)], [Fraction(1, 2) + Fraction(1, 10**6)]]
        assert winner_set(reports, [1]) == frozenset({1})
        loose = MechanismSettings(exact_tie_tolerance=1e-3)
        assert winner_set(reports, [1], mechanism=loose) == frozenset({0, 1})

    def test_float_tolerance_from_settings(self):
        reports = [[0.5], [0.5 + 1e-9]]
        assert winner_set(reports, [1]) == frozenset({1})
        loose = MechanismSettings(float_tie_tolerance=1e-6)
        assert simple_max(reports, [1], mechanism=loose).probabilities == (0.5, 0.5)

    def test_explicit_tolerance_wins_over_settings(self):
        reports = [[0.5], [0.5 + 1e-9]]
        loose = MechanismSettings(float_tie_tolerance=1e-6)
        assert winner_set(reports, [1], tolerance=0.0, mechanism=loose) == frozenset({1})
