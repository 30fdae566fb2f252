"""Shared test fixtures for forecast-lab tests."""

from __future__ import annotations

from pathlib import Path

import pytest

from forecast_lab.config.settings import (
    EquilibriumSettings,
    HedgingSettings,
    MonteCarloSettings,
    OutputSettings,
    Settings,
)
from forecast_lab.data.beliefs import BeliefModel, CoinScenario, EventBelief
from forecast_lab.data.strategies import MixedStrategy, StrategyProfile
from forecast_lab.data.templates import lattice_template, peer_template, symmetric_template

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


@pytest.fixture(scope="session")
def small_settings() -> Settings:
    """Settings tuned for fast test runs."""
    settings = Settings()
    settings.monte_carlo = MonteCarloSettings(block_size=512, default_trials=4000)
    settings.equilibrium = EquilibriumSettings(
        grid_resolution=0.05,
        m1_grid_resolution=0.01,
        m2_grid_resolution=0.05,
        refinement_sweeps=1,
        m1_p_values=[0.1, 0.3],
        m2_p_values=[0.4],
        audit_n_values=[2, 3],
        audit_p_values=[0.1],
    )
    settings.hedging = HedgingSettings(trials=2000, block_size=128, samples_per_weight_class=2)
    return settings


@pytest.fixture
def tmp_settings(small_settings, tmp_path) -> Settings:
    """Small settings writing into a per-test directory."""
    settings = small_settings.model_copy(deep=True)
    settings.output = OutputSettings(output_dir=tmp_path)
    return settings


@pytest.fixture(scope="session")
def scenarios_dir() -> Path:
    return SCENARIOS


@pytest.fixture(scope="session")
def coin_m1() -> CoinScenario:
    return CoinScenario(m=1, p=0.3)


@pytest.fixture(scope="session")
def vertex_m1() -> MixedStrategy:
    return MixedStrategy(((0.0,), (1.0,)), (0.5, 0.5))


@pytest.fixture(scope="session")
def m1_profile(vertex_m1) -> StrategyProfile:
    return StrategyProfile((MixedStrategy.pure((0.0,)), vertex_m1))


@pytest.fixture(scope="session")
def two_atom_event() -> EventBelief:
    """Opponent always says 1/2 on a fair coin; i's report sets the score difference."""
    return EventBelief.independent(0.5, [0.5])


@pytest.fixture(scope="session")
def small_belief() -> BeliefModel:
    events = (
        EventBelief.from_rows([(0.6, 1, 0.42), (0.6, 0, 0.28), (0.3, 1, 0.18), (0.3, 0, 0.12)]),
        EventBelief.from_rows([(0.8, 1, 0.3), (0.2, 0, 0.5), (0.5, 1, 0.1), (0.5, 0, 0.1)]),
        EventBelief.from_rows([(0.5, 1, 0.25), (0.5, 0, 0.25), (0.9, 1, 0.25), (0.1, 0, 0.25)]),
    )
    return BeliefModel(events)


@pytest.fixture(scope="session")
def peer():
    return peer_template()


@pytest.fixture(scope="session")
def symmetric():
    return symmetric_template()


@pytest.fixture(scope="session")
def lattice():
    return lattice_template()
