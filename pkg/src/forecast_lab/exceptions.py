"""Exception hierarchy; the CLI maps these onto exit codes."""

from __future__ import annotations

from typing import Any


class LabError(Exception):
    """Base class for every error raised by forecast_lab."""


class ScenarioError(LabError, ValueError):
    """Invalid domain input or scenario file (exit code 2)."""

    def __init__(self, message: str, diagnostics: list[dict[str, Any]] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class EnumerationCapError(LabError, ValueError):
    """Exact enumeration refused; use the Monte Carlo estimator instead."""


class ConditionNotMetError(LabError, ValueError):
    """A check was refused because its precondition does not hold."""


class VacuousBoundError(LabError, ValueError):
    """A bound was requested outside the regime where it says anything."""


class PropertyViolation(LabError, AssertionError):
    """A verified property failed (exit code 3)."""

    def __init__(self, message: str, witness: dict[str, Any] | None = None):
        super().__init__(message)
        self.witness = witness or {}
