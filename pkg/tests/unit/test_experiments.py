"""Tests for figure data, gamma sweeps and artifact writers."""

from __future__ import annotations

import json
import math
from fractions import Fraction

import numpy as np
import pandas as pd
import pytest

from forecast_lab.data.beliefs import CoinScenario
from forecast_lab.data.strategies import MixedStrategy
from forecast_lab.data.templates import skill_gap_template
from forecast_lab.exceptions import ScenarioError
from forecast_lab.experiments.figures import (
    default_figure1_strategies,
    figure1_data,
    figure2_data,
    figure2_frame,
    total_score_distribution,
)
from forecast_lab.experiments.reporting import RunReport, dumps, emit, jsonable, sha256_file, sidecar_path
from forecast_lab.experiments.sweep import gamma_sweep, loglog_slope, sigma_sweep, sweep_summary


class TestFigure1:
    @pytest.fixture(scope="class")
    def data(self):
        return figure1_data(CoinScenario(m=4, p=0.3), bins=10)

    def test_means_match_expected_scores(self, data):
        assert data.means["informed_truthful"] == pytest.approx(4 * 0.79)
        assert data.means["informed_hedged"] == pytest.approx(4 * 0.78)

    def test_hedging_shrinks_variance(self, data):
        assert data.variances["informed_hedged"] == pytest.approx(4 * 0.21 * 0.04)
        assert data.variances["informed_hedged"] < data.variances["informed_truthful"]
        assert data.variances["uninformed_truthful"] == pytest.approx(0.0)
        assert data.variances["uninformed_extremized"] > 0

    def test_histogram_mass_per_strategy(self, data):
        sums = data.histogram.groupby("strategy")["mass"].sum()
        np.testing.assert_allclose(sums.to_numpy(), 1.0)
        assert len(data.histogram) == 4 * 10

    def test_pairwise_shares_sum_to_one(self, data):
        assert len(data.win_shares) == 4
        for shares in data.win_shares.values():
            assert sum(shares) == pytest.approx(1.0)

    def test_override(self):
        scenario = CoinScenario(m=2, p=0.2)
        data = figure1_data(scenario, {"informed_hedged": MixedStrategy.pure([0.3, 0.3])}, bins=5)
        assert data.means["informed_hedged"] == pytest.approx(2 * (1 - (0.2 * 0.49 + 0.8 * 0.09)))

    def test_two_forecasters_only(self):
        with pytest.raises(ScenarioError):
            figure1_data(CoinScenario(m=2, p=0.2, n=3))

    def test_defaults(self):
        strategies = default_figure1_strategies(CoinScenario(m=3, p=0.1))
        assert strategies["informed_hedged"].reports[0] == pytest.approx((0.3, 0.3, 0.3))
        assert strategies["uninformed_extremized"].size == 8

    def test_total_score_of_vertex(self):
        dist = total_score_distribution(np.array([[1.0]]), np.array([1.0]), np.array([0.25]))
        np.testing.assert_allclose(dist.values, [0.0, 1.0])
        np.testing.assert_allclose(dist.weights, [0.75, 0.25])


class TestFigure2:
    def test_supports_and_averages(self):
        data = figure2_data(0.4)
        assert data["classification"] == "extremized"
        informed = data["players"][0]
        assert informed["average"] == pytest.approx([11 / 32, 11 / 32])
        assert [len(player["support"]) for player in data["players"]] == [3, 5]
        assert all(sum(player["weights"]) == pytest.approx(1.0) for player in data["players"])
        frame = figure2_frame(data)
        np.testing.assert_allclose(frame.groupby("role")["weight"].sum().to_numpy(), 1.0)

    def test_hedged_regime(self):
        assert figure2_data(0.34)["classification"] == "hedged"


class TestSweep:
    def test_loglog_slope(self):
        x = np.array([1.0, 10.0, 100.0])
        assert loglog_slope(x, 3 * x**-0.5) == pytest.approx(-0.5)
        with pytest.raises(ScenarioError):
            loglog_slope([1.0, 2.0], [np.nan, 1.0])

    def test_sigma_sweep_slope(self):
        frame = sigma_sweep([1e4, 1e5, 1e6, 1e7, 1e8])
        assert loglog_slope(frame["sigma_i"], frame["gamma_theorem2"]) == pytest.approx(-0.5, abs=0.03)

    def test_gamma_sweep_per_event_decay(self, symmetric):
        frame = gamma_sweep(symmetric, [1000, 3000, 10000])
        assert list(frame["m"]) == [1000, 3000, 10000]
        assert frame["condition3"].all()
        summary = sweep_summary(frame, sigma_sweep([1e4, 1e6, 1e8]))
        assert summary["gamma_non_increasing"]
        assert summary["slope_per_event_vs_m"] == pytest.approx(-0.25, abs=0.03)
        assert summary["condition3_pass"] == 3

    def test_skill_gap_fails_condition3(self):
        frame = gamma_sweep(skill_gap_template(), [1000])
        # mean lead of 0.08 per event puts the truthful utility far above 1/2
        assert frame["utility_truthful"].iloc[0] > 0.99
        assert not frame["condition3"].iloc[0]


class TestReporting:
    def test_jsonable(self):
        value = {"a": np.float64(0.5), "b": np.arange(2), "c": Fraction(1, 4), "d": math.inf, 1: np.bool_(True)}
        assert jsonable(value) == {"a": 0.5, "b": [0, 1], "c": 0.25, "d": "inf", "1": True}

    def test_dumps_is_sorted(self):
        assert dumps({"b": 1, "a": 2}).index('"a"') < dumps({"b": 1, "a": 2}).index('"b"')

    def test_emit_csv_with_sidecar(self, tmp_path):
        out = tmp_path / "table.csv"
        report = RunReport(command="demo", args={"x": 1}, seed=5)
        emit(report, out, "csv", table=pd.DataFrame({"value": [0.1, 0.2]}))
        assert out.read_text().splitlines() == ["value", "0.1", "0.2"]
        sidecar = json.loads(sidecar_path(out).read_text())
        assert sidecar["seed"] == 5
        assert sidecar["outputs"][0]["sha256"] == sha256_file(out)
        assert sidecar["outputs"][0]["rows"] == 2

    def test_emit_json_fallbacks(self, tmp_path):
        out = tmp_path / "payload.csv"
        emit(RunReport(command="demo", args={}, seed=None), out, "csv", payload={"k": 1})
        assert json.loads(out.read_text()) == {"k": 1}
        rows = tmp_path / "rows.json"
        emit(RunReport(command="demo", args={}, seed=None), rows, "json", table=pd.DataFrame({"v": [1]}))
        assert json.loads(rows.read_text()) == {"rows": [{"v": 1}]}
