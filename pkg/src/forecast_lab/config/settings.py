from __future__ import annotations

from pathlib import Path
from typing import Any

import yaml
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

PROJECT_ROOT = Path(__file__).resolve().parents[3]


class MechanismSettings(BaseSettings):
    float_tie_tolerance: float = 1e-12
    exact_tie_tolerance: float = 0.0
    enumeration_cap_m: int = 20
    max_enumeration_cells: int = 50_000_000
    direct_bayes_cap_m: int = 8


class ConvolutionSettings(BaseSettings):
    atom_cap: int = 2_000_000
    resolution: float = 1e-4
    merge_decimals: int = 12
    zero_tolerance: float = 1e-9


class MonteCarloSettings(BaseSettings):
    block_size: int = 4096
    default_trials: int = 100_000
    ci_z: float = 1.96


class EquilibriumSettings(BaseSettings):
    grid_resolution: float = 0.01
    m1_grid_resolution: float = 0.001
    m2_grid_resolution: float = 0.005
    refinement_sweeps: int = 3
    m1_p_values: list[float] = Field(default=[0.1, 0.2, 0.3, 0.4, 0.45])
    m2_p_values: list[float] = Field(default=[0.35, 0.40, 0.45])
    audit_n_values: list[int] = Field(default=[2, 3, 4, 5])
    audit_p_values: list[float] = Field(default=[0.1, 0.3])


class HedgingSettings(BaseSettings):
    m: int = 4000
    p: float = 0.1
    epsilon: float = 0.008
    n: int = 2
    trials: int = 100_000
    samples_per_weight_class: int = 16
    block_size: int = 256
    illustrative_m: int = 32
    illustrative_p: float = 0.1
    illustrative_epsilon: float = 0.04


class EdgeworthSettings(BaseSettings):
    D: float = 1.0
    delta: float = 0.05
    affine_grid_points: int = 2001
    golden_tolerance: float = 1e-10
    min_event_variance: float = 1e-6


class SweepSettings(BaseSettings):
    template: str = "symmetric"
    m_values: list[int] = Field(default=[1_000, 3_000, 10_000, 30_000, 100_000])
    sigma_values: list[float] = Field(default=[1e4, 1e5, 1e6, 1e7, 1e8])


class OutputSettings(BaseSettings):
    histogram_bins: int = 40
    output_dir: Path = PROJECT_ROOT / "results"
    float_format: str = "%.12g"


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="FORECAST_LAB_")

    mechanism: MechanismSettings = Field(default_factory=MechanismSettings)
    convolution: ConvolutionSettings = Field(default_factory=ConvolutionSettings)
    monte_carlo: MonteCarloSettings = Field(default_factory=MonteCarloSettings)
    equilibrium: EquilibriumSettings = Field(default_factory=EquilibriumSettings)
    hedging: HedgingSettings = Field(default_factory=HedgingSettings)
    edgeworth: EdgeworthSettings = Field(default_factory=EdgeworthSettings)
    sweep: SweepSettings = Field(default_factory=SweepSettings)
    output: OutputSettings = Field(default_factory=OutputSettings)
    workers: int = 1
    log_level: str = "INFO"


_SECTIONS: dict[str, type[BaseSettings]] = {
    "mechanism": MechanismSettings,
    "convolution": ConvolutionSettings,
    "monte_carlo": MonteCarloSettings,
    "equilibrium": EquilibriumSettings,
    "hedging": HedgingSettings,
    "edgeworth": EdgeworthSettings,
    "sweep": SweepSettings,
    "output": OutputSettings,
}


def _deep_merge(base: dict, override: dict) -> dict:
    result = base.copy()
    for key, value in override.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = _deep_merge(result[key], value)
        else:
            result[key] = value
    return result


def load_settings(config_dir: Path | None = None) -> Settings:
    """Load settings from YAML config files; workers and log level still come from the environment."""
    if config_dir is None:
        config_dir = PROJECT_ROOT / "configs"

    merged: dict[str, Any] = {}
    for config_file in ["mechanism.yaml", "analysis.yaml", "experiments.yaml"]:
        path = config_dir / config_file
        if path.exists():
            with open(path) as f:
                data = yaml.safe_load(f)
                if data:
                    merged = _deep_merge(merged, data)

    settings_kwargs: dict[str, Any] = {}
    for name, section in _SECTIONS.items():
        if name in merged:
            settings_kwargs[name] = section(**merged[name])

    return Settings(**settings_kwargs)
