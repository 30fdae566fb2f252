"""Fixtures for end-to-end CLI runs with small configs."""

from __future__ import annotations

import json
from pathlib import Path

import pytest
import yaml

from forecast_lab.cli import run

SMALL_CONFIG = {
    "mechanism.yaml": {"monte_carlo": {"block_size": 512, "default_trials": 2000}},
    "analysis.yaml": {
        "equilibrium": {
            "grid_resolution": 0.05,
            "m1_grid_resolution": 0.01,
            "m2_grid_resolution": 0.05,
            "refinement_sweeps": 1,
            "m1_p_values": [0.3],
            "m2_p_values": [0.4],
            "audit_n_values": [2, 3],
            "audit_p_values": [0.1],
        },
        "hedging": {"trials": 500, "samples_per_weight_class": 1, "block_size": 128},
    },
    "experiments.yaml": {
        "sweep": {"m_values": [1000, 3000], "sigma_values": [1.0e4, 1.0e6, 1.0e8]},
        "output": {"histogram_bins": 10},
    },
}


@pytest.fixture
def config_dir(tmp_path) -> Path:
    path = tmp_path / "configs"
    path.mkdir()
    config = json.loads(json.dumps(SMALL_CONFIG))
    config["experiments.yaml"]["output"]["output_dir"] = str(tmp_path / "results")
    for name, body in config.items():
        (path / name).write_text(yaml.safe_dump(body))
    return path


@pytest.fixture
def cli(config_dir):
    """Run the CLI against the small configs and return its exit code."""

    def invoke(*argv: str) -> int:
        return run([*argv, "--config-dir", str(config_dir)])

    return invoke


@pytest.fixture
def write_scenario(tmp_path):
    def write(name: str, body: dict) -> Path:
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps({"name": name, **body}))
        return path

    return write
