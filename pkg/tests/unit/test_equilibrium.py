"""Tests for the closed-form equilibria and the deviation checks."""

from __future__ import annotations

import math
from fractions import Fraction

import pytest

from forecast_lab.analysis.equilibrium import (
    average_report,
    best_response_gain,
    classify_average_report,
    derived_n_forecaster_formula,
    displayed_n_forecaster_formula,
    hedging_threshold,
    m1_n2_equilibrium,
    m1_n_informed_utility,
    m2_average_coordinate,
    m2_equilibrium,
    n_forecaster_formula_audit,
    report_grid,
    support_indifference,
    verify_equilibrium,
)
from forecast_lab.config.settings import EquilibriumSettings
from forecast_lab.data.beliefs import CoinScenario
from forecast_lab.data.strategies import MixedStrategy
from forecast_lab.exceptions import PropertyViolation, ScenarioError


class TestM1:
    def test_profile_shape(self):
        profile = m1_n2_equilibrium(0.2)
        assert profile.n == 2
        assert profile[0].reports == ((0,),)
        assert sorted(profile[1].reports) == [(0,), (1,)]

    @pytest.mark.parametrize("p", [0.0, 0.5])
    def test_bias_checked(self, p):
        with pytest.raises(ScenarioError):
            m1_n2_equilibrium(p)

    def test_no_profitable_deviation(self):
        p = 0.3
        settings = EquilibriumSettings(grid_resolution=0.01)
        report = verify_equilibrium(m1_n2_equilibrium(p), CoinScenario(m=1, p=p), settings)
        assert report.utilities[0] == pytest.approx(0.75 - p / 2, abs=1e-12)
        assert max(report.max_gain) <= 1e-12

    def test_non_equilibrium_flagged(self):
        scenario = CoinScenario(m=1, p=0.3)
        profile = m1_n2_equilibrium(0.3).replace(0, MixedStrategy.pure((0.5,)))
        with pytest.raises(PropertyViolation):
            verify_equilibrium(profile, scenario, EquilibriumSettings(grid_resolution=0.1))

    def test_grid_is_exact_at_quarters(self):
        grid = report_grid(0.05)
        assert 0.25 in grid and 0.5 in grid and 0.75 in grid
        with pytest.raises(ScenarioError):
            report_grid(2.0)


class TestFormulaAudit:
    @pytest.mark.parametrize("p", [0.1, 0.3])
    def test_two_forecasters(self, p):
        audit = n_forecaster_formula_audit(p, 2)
        assert audit.enumerated == pytest.approx(0.75 - p / 2, abs=1e-12)
        assert audit.matches_derived

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_derived_form_matches_enumeration(self, n):
        assert m1_n_informed_utility(0.1, n) == pytest.approx(float(derived_n_forecaster_formula(0.1, n)), abs=1e-12)

    def test_displayed_form_is_recorded(self):
        left, right = displayed_n_forecaster_formula(Fraction(1, 10), 3)
        audit = n_forecaster_formula_audit(0.1, 3)
        assert audit.displayed_left == pytest.approx(float(left))
        assert audit.displayed_right == pytest.approx(float(right))
        assert audit.to_dict()["n"] == 3


class TestM2:
    @pytest.mark.parametrize("p", [0.35, 0.40, 0.45])
    def test_weights_are_exact(self, p):
        profile = m2_equilibrium(p)
        for strategy in profile.strategies:
            assert sum(strategy.weights) == 1

    def test_outside_range(self):
        with pytest.raises(ScenarioError):
            m2_equilibrium(0.3)

    def test_average_coordinate_exact(self):
        q = Fraction(2, 5)
        assert m2_average_coordinate(q) == Fraction(11, 32)
        assert average_report(m2_equilibrium(q)[0]) == (Fraction(11, 32), Fraction(11, 32))

    @pytest.mark.parametrize("p", [0.40])
    def test_support_indifference(self, p):
        profile = m2_equilibrium(p)
        scenario = CoinScenario(m=2, p=p)
        for player in range(2):
            assert support_indifference(profile, player, scenario).spread <= 1e-9

    def test_grid_best_response(self):
        p = 0.4
        profile = m2_equilibrium(p)
        scenario = CoinScenario(m=2, p=p)
        for player in range(2):
            assert best_response_gain(profile, player, scenario, grid_resolution=0.05).gain <= 1e-6

    def test_threshold(self):
        threshold = hedging_threshold()
        assert threshold == pytest.approx((5 - math.sqrt(13)) / 4, abs=1e-15)
        assert float(m2_average_coordinate(threshold)) == pytest.approx(threshold, abs=1e-12)

    def test_classification_flips_at_threshold(self):
        threshold = hedging_threshold()
        assert classify_average_report(threshold - 1e-9) == "hedged"
        assert classify_average_report(threshold + 1e-9) == "extremized"
        assert classify_average_report(0.4) == "extremized"
