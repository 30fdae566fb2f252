"""Validation checks for scenarios and emitted tables."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import pandas as pd

from forecast_lab.data.beliefs import CoinScenario
from forecast_lab.data.strategies import StrategyProfile
from forecast_lab.exceptions import PropertyViolation


@dataclass
class ValidationResult:
    passed: bool
    checks: list[dict] = field(default_factory=list)

    def add_check(self, name: str, passed: bool, details: str = ""):
        self.checks.append({"name": name, "passed": bool(passed), "details": details})
        if not passed:
            self.passed = False

    def failures(self) -> list[dict]:
        return [c for c in self.checks if not c["passed"]]

    def raise_for_failures(self, what: str) -> None:
        if not self.passed:
            raise PropertyViolation(f"{what} failed validation", {"failures": self.failures()})


class OutputValidator:
    """Probability ranges and weight normalisation of emitted tables."""

    def __init__(self, weight_tolerance: float = 1e-9):
        self.weight_tolerance = weight_tolerance

    def validate_frame(
        self,
        df: pd.DataFrame,
        probability_columns: Sequence[str] = (),
        weight_column: str | None = None,
        group_by: str | None = None,
    ) -> ValidationResult:
        result = ValidationResult(passed=True)

        missing = set(probability_columns) - set(df.columns)
        if weight_column is not None and weight_column not in df.columns:
            missing.add(weight_column)
        result.add_check("schema", len(missing) == 0, f"Missing columns: {missing}")
        if missing:
            return result

        for col in probability_columns:
            values = df[col].dropna()
            result.add_check(
                f"range_{col}",
                bool(values.between(0.0, 1.0).all()),
                f"{col}: {int((~values.between(0.0, 1.0)).sum())} values outside [0, 1]",
            )

        if weight_column is not None:
            sums = df.groupby(group_by)[weight_column].sum() if group_by else pd.Series([df[weight_column].sum()])
            worst = float((sums - 1.0).abs().max())
            result.add_check("weights_sum_to_one", worst <= self.weight_tolerance, f"max |sum - 1| = {worst:.3g}")

        return result


def validate_profile(profile: StrategyProfile, scenario: CoinScenario) -> ValidationResult:
    result = ValidationResult(passed=True)
    result.add_check(
        "players", profile.n == scenario.n, f"profile has {profile.n} players, scenario has n={scenario.n}"
    )
    result.add_check("events", profile.m == scenario.m, f"profile has m={profile.m}, scenario has m={scenario.m}")
    for player, strategy in enumerate(profile.strategies):
        total = float(sum(strategy.weights))
        result.add_check(f"weights_{player}", abs(total - 1.0) <= 1e-9, f"player {player} weights sum to {total}")
    return result
