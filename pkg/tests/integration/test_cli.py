"""End-to-end tests for every forecast-lab command and its exit codes."""

from __future__ import annotations

import json

import pandas as pd
import pytest

from forecast_lab.analysis.utility import belief_tie_probability
from forecast_lab.cli import EXIT_INPUT, EXIT_OK, EXIT_PROPERTY
from forecast_lab.data.templates import lattice_template
from forecast_lab.experiments.reporting import sha256_file, sidecar_path


def _load(path):
    return json.loads(path.read_text())


class TestMechanismEval:
    def test_m1_equilibrium(self, cli, scenarios_dir, tmp_path):
        out = tmp_path / "m1.json"
        scenario = str(scenarios_dir / "m1_equilibrium.json")
        assert cli("mechanism-eval", "--scenario", scenario, "--out", str(out)) == EXIT_OK
        payload = _load(out)
        assert payload["exact"]
        assert payload["utilities"] == pytest.approx([0.6, 0.4])
        assert payload["tie_probability"] == pytest.approx(0.5)
        sidecar = _load(sidecar_path(out))
        assert sidecar["command"] == "mechanism-eval"
        assert sidecar["outputs"][0]["sha256"] == sha256_file(out)

    def test_identical_strategies_csv(self, cli, scenarios_dir, tmp_path):
        out = tmp_path / "same.csv"
        scenario = str(scenarios_dir / "identical_strategies.json")
        assert cli("mechanism-eval", "--scenario", scenario, "--out", str(out)) == EXIT_OK
        table = pd.read_csv(out)
        assert list(table.columns) == ["value", "mass", "cdf"]
        assert table["value"].tolist() == [0.0]
        assert _load(sidecar_path(out))["results"]["utilities"] == pytest.approx([0.5, 0.5])

    def test_monte_carlo_fallback(self, cli, scenarios_dir, tmp_path):
        out = tmp_path / "mc.json"
        scenario = str(scenarios_dir / "coin_monte_carlo.json")
        assert cli("mechanism-eval", "--scenario", scenario, "--trials", "2000", "--out", str(out)) == EXIT_OK
        payload = _load(out)
        assert not payload["exact"]
        assert payload["seed"] == 20240601
        assert sum(payload["utilities"]) == pytest.approx(1.0, abs=0.05)

    def test_belief_scenario(self, cli, scenarios_dir, tmp_path):
        out = tmp_path / "belief.json"
        scenario = str(scenarios_dir / "belief_example.json")
        assert cli("mechanism-eval", "--scenario", scenario, "--out", str(out)) == EXIT_OK
        payload = _load(out)
        assert 0.0 <= payload["utilities"][0] <= 1.0
        assert payload["cdf"][-1]["cdf"] == pytest.approx(1.0)

    def test_mixed_belief_strategy_reports_one_distribution(self, cli, write_scenario, tmp_path):
        support = [{"report": [0.4] * 4, "weight": 0.5}, {"report": [0.5] * 4, "weight": 0.5}]
        path = write_scenario(
            "mixed_belief",
            {"kind": "belief", "belief": {"template": "lattice", "m": 4}, "strategies": [{"support": support}]},
        )
        out = tmp_path / "mixed.json"
        assert cli("mechanism-eval", "--scenario", str(path), "--out", str(out), "--format", "json") == EXIT_OK
        payload = _load(out)
        lattice = lattice_template()
        pure_ties = [belief_tie_probability([r] * 4, lattice.belief(4)) for r in (0.4, 0.5)]
        assert payload["tie_probability"] == pytest.approx(0.5 * sum(pure_ties))
        assert payload["tie_probability"] == pytest.approx(0.13671875)
        rows = payload["cdf"]
        below = sum(r["mass"] for r in rows if r["value"] < -1e-9)
        at_zero = sum(r["mass"] for r in rows if abs(r["value"]) <= 1e-9)
        assert payload["utilities"][0] == pytest.approx(below + 0.5 * at_zero)
        assert payload["support_size"] == 2

    def test_default_output_location(self, cli, scenarios_dir, config_dir, capsys):
        assert cli("mechanism-eval", "--scenario", str(scenarios_dir / "identical_strategies.json")) == EXIT_OK
        expected = config_dir.parent / "results" / "mechanism-eval.csv"
        assert expected.exists()
        assert str(expected) in capsys.readouterr().out


class TestInputErrors:
    def test_invalid_scenario_reports_field(self, cli, write_scenario, capsys):
        path = write_scenario("bad", {"kind": "coin", "coin": {"m": 2, "p": 0.7}})
        assert cli("mechanism-eval", "--scenario", str(path)) == EXIT_INPUT
        assert "coin.p" in capsys.readouterr().err

    def test_missing_scenario(self, cli):
        assert cli("mechanism-eval") == EXIT_INPUT

    def test_negative_seed(self, cli, scenarios_dir):
        scenario = str(scenarios_dir / "m1_equilibrium.json")
        assert cli("mechanism-eval", "--scenario", scenario, "--seed", "-1") == EXIT_INPUT

    def test_zero_trials(self, cli, scenarios_dir):
        scenario = str(scenarios_dir / "m1_equilibrium.json")
        assert cli("mechanism-eval", "--scenario", scenario, "--trials", "0") == EXIT_INPUT

    def test_stochastic_run_needs_seed(self, cli, write_scenario, capsys):
        path = write_scenario(
            "unseeded",
            {"kind": "coin", "coin": {"m": 24, "p": 0.2}, "strategies": [{"pure": [0.2] * 24}, {"pure": [0.5] * 24}]},
        )
        assert cli("mechanism-eval", "--scenario", str(path), "--trials", "100") == EXIT_INPUT
        assert "stochastic" in capsys.readouterr().err

    def test_wrong_scenario_kind(self, cli, scenarios_dir):
        assert cli("edgeworth-gamma", "--scenario", str(scenarios_dir / "m1_equilibrium.json")) == EXIT_INPUT


class TestEquilibriumVerify:
    def test_closed_forms(self, cli, tmp_path):
        out = tmp_path / "eq.json"
        assert cli("equilibrium-verify", "--out", str(out)) == EXIT_OK
        payload = _load(out)
        labels = [e["label"] for e in payload["equilibria"]]
        assert labels == ["m1_p0.3", "m2_p0.4"]
        assert payload["equilibria"][1]["classification"] == "extremized"
        assert payload["hedging_threshold"] == pytest.approx(0.3486, abs=1e-4)
        assert {a["n"] for a in payload["formula_audit"]} == {2, 3}

    def test_scenario_profile(self, cli, scenarios_dir, tmp_path):
        out = tmp_path / "eq.csv"
        scenario = str(scenarios_dir / "m1_equilibrium.json")
        assert cli("equilibrium-verify", "--scenario", scenario, "--out", str(out), "--format", "csv") == EXIT_OK
        table = pd.read_csv(out)
        assert table["utility"].tolist() == pytest.approx([0.6, 0.4])

    def test_non_equilibrium_exits_3(self, cli, write_scenario):
        path = write_scenario(
            "off_equilibrium",
            {
                "kind": "coin",
                "coin": {"m": 1, "p": 0.3},
                "strategies": [
                    {"pure": [0.5]},
                    {"support": [{"report": [0.0], "weight": 0.5}, {"report": [1.0], "weight": 0.5}]},
                ],
            },
        )
        assert cli("equilibrium-verify", "--scenario", str(path)) == EXIT_PROPERTY

    def test_m2_p_values(self, cli, scenarios_dir, tmp_path):
        out = tmp_path / "m2.json"
        scenario = str(scenarios_dir / "m2_equilibrium.json")
        assert cli("equilibrium-verify", "--scenario", scenario, "--out", str(out)) == EXIT_OK
        assert len(_load(out)["equilibria"]) == 3


class TestHedgingVerify:
    def test_illustrative(self, cli, scenarios_dir, tmp_path):
        out = tmp_path / "hedge.json"
        scenario = str(scenarios_dir / "hedging_illustrative.json")
        assert cli("hedging-verify", "--scenario", scenario, "--trials", "500", "--out", str(out)) == EXIT_OK
        payload = _load(out)
        assert payload["p_bound_frontier"] == 892
        assert len(payload["lemma_scan"]) == 20
        assert payload["dominance"]["illustrative"]

    def test_condition_refused(self, cli, write_scenario):
        path = write_scenario(
            "infeasible",
            {"kind": "coin", "seed": 1, "coin": {"m": 32, "p": 0.1}, "hedging": {"m": 32, "p": 0.1, "epsilon": 0.04}},
        )
        assert cli("hedging-verify", "--scenario", str(path)) == EXIT_INPUT

    def test_needs_seed(self, cli):
        assert cli("hedging-verify") == EXIT_INPUT


class TestEdgeworthGamma:
    def test_peer_template(self, cli, scenarios_dir, tmp_path):
        out = tmp_path / "gamma.json"
        scenario = str(scenarios_dir / "peer_edgeworth.json")
        assert cli("edgeworth-gamma", "--scenario", scenario, "--out", str(out)) == EXIT_OK
        payload = _load(out)
        assert payload["exact"]
        assert len(payload["gamma_per_event"]) == 6
        composed = payload["composed_affine_error_event0"]
        assert composed["measured"] <= composed["budget"] + 1e-3
        assert payload["berry_esseen"]["gap"] <= payload["berry_esseen"]["bound"]
        assert "bridging" in payload
        slope = payload["slope_check_event0"]
        assert slope["beta"] == pytest.approx(slope["finite_difference"], rel=1e-6)
        assert slope["printed_slope_gap"] >= 0

    def test_table_view(self, cli, scenarios_dir, tmp_path):
        out = tmp_path / "gamma.csv"
        scenario = str(scenarios_dir / "belief_example.json")
        assert cli("edgeworth-gamma", "--scenario", scenario, "--out", str(out), "--format", "csv") == EXIT_OK
        assert list(pd.read_csv(out).columns) == ["event", "gamma", "A_it", "B_it"]


class TestFigures:
    def test_figure1(self, cli, write_scenario, tmp_path):
        path = write_scenario("fig1", {"kind": "coin", "coin": {"m": 4, "p": 0.3}})
        out = tmp_path / "fig1.csv"
        assert cli("figure1", "--scenario", str(path), "--out", str(out)) == EXIT_OK
        table = pd.read_csv(out)
        assert set(table["strategy"]) == {
            "informed_truthful",
            "informed_hedged",
            "uninformed_truthful",
            "uninformed_extremized",
        }
        assert len(table) == 40

    def test_figure2(self, cli, tmp_path):
        out = tmp_path / "fig2.json"
        assert cli("figure2", "--p", "0.4", "--out", str(out)) == EXIT_OK
        assert _load(out)["classification"] == "extremized"

    def test_figure2_outside_range(self, cli):
        assert cli("figure2", "--p", "0.2") == EXIT_INPUT


def test_gamma_sweep(cli, tmp_path):
    out = tmp_path / "sweep.json"
    assert cli("gamma-sweep", "--out", str(out), "--format", "json") == EXIT_OK
    payload = _load(out)
    assert [r["m"] for r in payload["rows"]] == [1000, 3000]
    assert payload["summary"]["gamma_non_increasing"]
    assert payload["summary"]["slope_theorem2_vs_sigma"] == pytest.approx(-0.5, abs=0.05)
