"""Simulation and analysis lab for forecasting competitions scored by Simple Max."""

__version__ = "0.1.0"
