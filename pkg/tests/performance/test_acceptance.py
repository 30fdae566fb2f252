"""Acceptance-scale checks of the equilibria, hedging dominance and truthfulness bounds."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from forecast_lab.analysis.distributions import ScoreDiffDistribution, convolve
from forecast_lab.analysis.edgeworth import (
    EdgeworthParams,
    affine_fit,
    berry_esseen_gap,
    bounded_ratio_bound,
    edgeworth_cdf,
    empirical_sup_distance,
    lemma5_check,
)
from forecast_lab.analysis.equilibrium import (
    average_report,
    best_response_gain,
    classify_average_report,
    hedging_threshold,
    m1_n2_equilibrium,
    m2_average_coordinate,
    m2_equilibrium,
    n_forecaster_formula_audit,
    support_indifference,
    verify_equilibrium,
)
from forecast_lab.analysis.hedging import HedgingParams, dominance_check, feasible_triples, lemma1_margin, lemma2_margin
from forecast_lab.analysis.truthfulness import certify_truthfulness
from forecast_lab.analysis.utility import exact_shares, score_difference, win_probability
from forecast_lab.config.settings import EquilibriumSettings, HedgingSettings
from forecast_lab.data.beliefs import CoinScenario, EventBelief
from forecast_lab.data.templates import random_belief, symmetric_template
from forecast_lab.experiments.sweep import gamma_sweep, loglog_slope, sigma_sweep

pytestmark = pytest.mark.slow

M1_BIASES = [0.1, 0.2, 0.3, 0.4, 0.45]


class TestEquilibria:
    @pytest.mark.parametrize("p", M1_BIASES)
    def test_m1_utilities(self, p):
        shares = exact_shares(m1_n2_equilibrium(p), CoinScenario(m=1, p=p))
        assert abs(shares[0] - (0.75 - p / 2)) <= 1e-12
        assert abs(shares[1] - (0.25 + p / 2)) <= 1e-12

    @pytest.mark.parametrize("p", M1_BIASES)
    def test_m1_deviation_grid(self, p):
        report = verify_equilibrium(
            m1_n2_equilibrium(p), CoinScenario(m=1, p=p), EquilibriumSettings(grid_resolution=0.001), gain_tolerance=1e-12
        )
        assert max(report.max_gain) <= 1e-12

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    @pytest.mark.parametrize("p", [0.1, 0.3])
    def test_formula_audit(self, n, p):
        audit = n_forecaster_formula_audit(p, n)
        if n == 2:
            assert abs(audit.enumerated - (0.75 - p / 2)) <= 1e-12
        assert audit.matches_derived
        assert isinstance(audit.matches_display, bool)

    @pytest.mark.parametrize("p", [0.35, 0.40, 0.45])
    def test_m2_equilibrium(self, p):
        profile = m2_equilibrium(p)
        scenario = CoinScenario(m=2, p=p)
        for player in range(2):
            assert support_indifference(profile, player, scenario).spread <= 1e-9
            assert best_response_gain(profile, player, scenario, grid_resolution=0.005).gain <= 1e-6
        q = Fraction(p).limit_denominator(1000)
        assert average_report(m2_equilibrium(q)[0])[0] == (3 - 2 * q) / (4 * (2 - q))
        assert float(m2_average_coordinate(q)) == pytest.approx((3 - 2 * p) / (4 * (2 - p)), abs=1e-15)

    def test_classification_flip(self):
        threshold = hedging_threshold()
        assert threshold == pytest.approx((5 - math.sqrt(13)) / 4, abs=1e-15)
        assert classify_average_report(threshold - 1e-9) == "hedged"
        assert classify_average_report(threshold + 1e-9) == "extremized"


class TestHedging:
    def test_lemmas_over_feasible_scan(self):
        triples = feasible_triples(20)
        assert len(triples) == 20
        for t in triples:
            assert lemma1_margin(t.m, t.p, t.epsilon).margin > 0
            assert lemma2_margin(t.m, t.p, t.epsilon).margin > 0

    def test_dominance_at_default_triple(self):
        params = HedgingParams(m=4000, p=0.1, epsilon=0.008)
        first = dominance_check(params, n=2, trials=100_000, seed=20240601, settings=HedgingSettings())
        assert first.violations == 0
        assert first.strict_count > 0
        assert first.stratified.estimate > 0
        assert first.stratified.ci_excludes_zero


class TestEdgeworth:
    def test_expansion_beats_normal_on_skewed_sum(self):
        term = ScoreDiffDistribution.from_atoms([0.04, -0.36], [0.8, 0.2])
        exact = convolve([term] * 200)
        params = EdgeworthParams.from_distribution(exact)
        rng = np.random.default_rng(7)
        samples = 0.04 * 200 - 0.4 * rng.binomial(200, 0.2, size=1_000_000)
        expansion = empirical_sup_distance(samples, lambda x: edgeworth_cdf(params, x, 1.0))
        normal = empirical_sup_distance(samples, lambda x: stats.norm.cdf((x - params.mu) / params.sigma))
        assert expansion <= normal

    def test_expansion_without_higher_cumulants_is_normal(self):
        params = EdgeworthParams(mu=0.2, sigma=3.0)
        xs = np.linspace(-10, 10, 201)
        assert np.max(np.abs(edgeworth_cdf(params, xs) - stats.norm.cdf((xs - 0.2) / 3.0))) <= 1e-12

    def test_affine_G_best_response_is_belief(self):
        event = EventBelief.independent(0.37, [0.1, 0.5, 0.8], [0.2, 0.5, 0.3])
        result = lemma5_check(lambda x: 0.5 + 0.2 * x, event, beta=0.2, epsilon=1e-9)
        assert abs(result.best_report - 0.37) <= 1e-3
        assert result.holds

    def test_perturbed_G_respects_gamma(self):
        params = EdgeworthParams(mu=0.3, sigma=2.0, kappa3=0.8, kappa4=-0.5)
        fit = affine_fit(params)
        event = EventBelief.independent(0.3, [0.2, 0.6])
        result = lemma5_check(lambda x: edgeworth_cdf(params, x), event, fit.beta, max(fit.epsilon, fit.sup_error))
        assert result.holds

    def test_theorem2_scaling(self):
        frame = sigma_sweep([1e4, 1e5, 1e6, 1e7, 1e8], C3=0.0, C4=-2.0)
        assert loglog_slope(frame["sigma_i"], frame["gamma_theorem2"]) == pytest.approx(-0.5, abs=0.02)

    def test_per_event_scaling(self):
        frame = gamma_sweep(symmetric_template(), [1_000, 3_000, 10_000, 30_000, 100_000])
        assert loglog_slope(frame["m"], frame["gamma_per_event_max"]) == pytest.approx(-0.25, abs=0.05)

    def test_bounded_ratio_cap(self):
        assert bounded_ratio_bound(0.33) <= 1.0

    def test_small_scenarios(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            m = int(rng.integers(2, 7))
            belief, report = random_belief(m, rng)
            cert = certify_truthfulness(report, belief)
            # per-event differences lie in [-1, 1], so sigma <= sqrt(6) < 4
            assert not cert.condition3.holds
            dist = score_difference(report, belief)
            if dist.std > 0:
                gap = berry_esseen_gap(dist, win_probability(dist))
                assert gap.gap <= gap.bound
