"""Finite-support mixed strategies and strategy profiles."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from numbers import Real

import numpy as np

from forecast_lab.data.beliefs import reflection_masks
from forecast_lab.exceptions import ScenarioError

WEIGHT_TOLERANCE = 1e-12
MERGE_DECIMALS = 12


def _merge_key(report: Sequence[Real]) -> tuple[float, ...]:
    return tuple(round(float(v), MERGE_DECIMALS) for v in report)


@dataclass(frozen=True)
class MixedStrategy:
    """Distribution over report vectors; entries may be floats or Fractions."""

    reports: tuple[tuple[Real, ...], ...]
    weights: tuple[Real, ...]

    def __post_init__(self):
        reports = tuple(tuple(r) for r in self.reports)
        weights = tuple(self.weights)
        object.__setattr__(self, "reports", reports)
        object.__setattr__(self, "weights", weights)
        if len(reports) == 0 or len(reports) != len(weights):
            raise ScenarioError("Strategy needs one positive weight per support point")
        m = len(reports[0])
        if m == 0 or any(len(r) != m for r in reports):
            raise ScenarioError("Support points must share one non-zero dimension")
        if any(not 0 <= v <= 1 for r in reports for v in r):
            raise ScenarioError("Reports must lie in [0, 1]")
        if any(w <= 0 for w in weights):
            raise ScenarioError("Support weights must be positive")
        if abs(float(sum(weights)) - 1.0) > WEIGHT_TOLERANCE:
            raise ScenarioError(f"Support weights sum to {float(sum(weights))}, expected 1")

    @classmethod
    def pure(cls, report: Sequence[Real]) -> MixedStrategy:
        return cls((tuple(report),), (1,))

    @classmethod
    def uniform(cls, reports: Sequence[Sequence[Real]]) -> MixedStrategy:
        return cls(tuple(tuple(r) for r in reports), tuple(1 / len(reports) for _ in reports))

    @property
    def m(self) -> int:
        return len(self.reports[0])

    @property
    def size(self) -> int:
        return len(self.reports)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(k, m) float reports and (k,) float weights."""
        return np.array(self.reports, dtype=float), np.array([float(w) for w in self.weights])

    def merged(self) -> MixedStrategy:
        """Combine support points that agree to MERGE_DECIMALS places."""
        seen: dict[tuple[float, ...], int] = {}
        reports: list[tuple[Real, ...]] = []
        weights: list[Real] = []
        for r, w in zip(self.reports, self.weights):
            key = _merge_key(r)
            if key in seen:
                weights[seen[key]] += w
            else:
                seen[key] = len(reports)
                reports.append(r)
                weights.append(w)
        return MixedStrategy(tuple(reports), tuple(weights))


@dataclass(frozen=True)
class StrategyProfile:
    """One mixed strategy per player."""

    strategies: tuple[MixedStrategy, ...]

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if len(self.strategies) == 0:
            raise ScenarioError("A profile needs at least one player")
        if len({s.m for s in self.strategies}) != 1:
            raise ScenarioError("All strategies in a profile must share m")

    @property
    def n(self) -> int:
        return len(self.strategies)

    @property
    def m(self) -> int:
        return self.strategies[0].m

    def __getitem__(self, player: int) -> MixedStrategy:
        return self.strategies[player]

    def replace(self, player: int, strategy: MixedStrategy) -> StrategyProfile:
        strategies = list(self.strategies)
        strategies[player] = strategy
        return StrategyProfile(tuple(strategies))


def symmetrize_arrays(reports: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Average a float support over all 2^m reflections, merging duplicates."""
    k, m = reports.shape
    masks = reflection_masks(m)
    reflected = np.where(masks[None, :, :], 1.0 - reports[:, None, :], reports[:, None, :]).reshape(-1, m)
    w = np.repeat(weights / masks.shape[0], masks.shape[0])
    keys = np.round(reflected, MERGE_DECIMALS)
    unique, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    merged = np.bincount(inverse.ravel(), weights=w, minlength=len(unique))
    return reflected[first], merged


def symmetrize(strategy: MixedStrategy) -> MixedStrategy:
    """The reflection-averaged strategy an uninformed player induces in the canonical frame."""
    masks = reflection_masks(strategy.m)
    reports: list[tuple[Real, ...]] = []
    weights: list[Real] = []
    for r, w in zip(strategy.reports, strategy.weights):
        for mask in masks:
            reports.append(tuple(1 - v if flip else v for v, flip in zip(r, mask)))
            weights.append(w / len(masks))
    return MixedStrategy(tuple(reports), tuple(weights)).merged()
