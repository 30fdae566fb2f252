"""Quadratic scoring and the Simple Max winner rule."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real

import numpy as np

from forecast_lab.config.settings import MechanismSettings
from forecast_lab.exceptions import ScenarioError

FLOAT_TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class WinnerShare:
    """Per-player win probabilities for one outcome vector."""

    probabilities: tuple[float, ...]

    def __post_init__(self):
        total = sum(self.probabilities)
        if abs(total - 1.0) > 1e-12:
            raise ScenarioError(f"Win shares sum to {total}, expected 1")

    @property
    def winners(self) -> frozenset[int]:
        return frozenset(i for i, share in enumerate(self.probabilities) if share > 0)


def _check_probability(r: Real) -> None:
    if not 0 <= r <= 1:
        raise ScenarioError(f"Report {r} outside [0, 1]")


def _check_bit(y: int) -> None:
    if y not in (0, 1):
        raise ScenarioError(f"Outcome {y} is not a bit")


def _is_exact(values: Sequence) -> bool:
    return all(isinstance(v, Fraction | int) and not isinstance(v, bool) for v in values)


def quadratic_score(r: Real, y: int) -> Real:
    """Quadratic (Brier) score 1 - (r - y)^2; exact for Fraction reports."""
    _check_probability(r)
    _check_bit(y)
    return 1 - (r - y) ** 2


def total_score(r: Sequence[Real], y: Sequence[int]) -> Real:
    """Sum of per-event quadratic scores, accumulated left to right."""
    if len(r) != len(y):
        raise ScenarioError(f"Report has {len(r)} entries, outcome has {len(y)}")
    total: Real = 0
    for r_t, y_t in zip(r, y):
        total = total + quadratic_score(r_t, y_t)
    return total


def tie_tolerance(
    reports: Sequence[Sequence[Real]],
    float_tolerance: float = FLOAT_TIE_TOLERANCE,
    exact_tolerance: float = 0.0,
) -> float:
    """exact_tolerance for exact-rational inputs, float_tolerance otherwise."""
    if all(_is_exact(r) for r in reports):
        return exact_tolerance
    return float_tolerance


def winner_set(
    reports: Sequence[Sequence[Real]],
    y: Sequence[int],
    tolerance: float | None = None,
    mechanism: MechanismSettings | None = None,
) -> frozenset[int]:
    """Indices of the forecasters with the maximal total score.

    Without an explicit tolerance the mechanism settings pick the exact or
    float tie tolerance from the report types.
    """
    if len(reports) == 0:
        raise ScenarioError("winner_set needs at least one report")
    if tolerance is None:
        mechanism = mechanism or MechanismSettings()
        tolerance = tie_tolerance(reports, mechanism.float_tie_tolerance, mechanism.exact_tie_tolerance)
    scores = [total_score(r, y) for r in reports]
    best = max(scores)
    # subtracting a float from a Fraction would drop exactness
    threshold = best - tolerance if tolerance else best
    return frozenset(i for i, s in enumerate(scores) if s >= threshold)


def simple_max(
    reports: Sequence[Sequence[Real]],
    y: Sequence[int],
    tolerance: float | None = None,
    mechanism: MechanismSettings | None = None,
) -> WinnerShare:
    """Simple Max: the winning set splits the prize uniformly."""
    winners = winner_set(reports, y, tolerance, mechanism)
    share = 1.0 / len(winners)
    return WinnerShare(tuple(share if i in winners else 0.0 for i in range(len(reports))))


def batch_total_scores(reports: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
    """Total scores for every (outcome row, report row) pair.

    reports: (n, m) or (k, n, m) paired with outcomes; outcomes: (k, m).
    Returns (k, n). Accumulation runs left to right over events, matching
    total_score on float inputs.
    """
    outcomes = np.asarray(outcomes, dtype=float)
    reports = np.asarray(reports, dtype=float)
    if reports.ndim == 2:
        reports = np.broadcast_to(reports, (outcomes.shape[0], *reports.shape))
    if reports.shape[-1] != outcomes.shape[-1]:
        raise ScenarioError(f"Reports have {reports.shape[-1]} events, outcomes have {outcomes.shape[-1]}")
    k, n, m = reports.shape
    acc = np.zeros((k, n))
    for t in range(m):
        acc += 1.0 - (reports[:, :, t] - outcomes[:, t, None]) ** 2
    return acc


def batch_shares(scores: np.ndarray, tolerance: float = FLOAT_TIE_TOLERANCE) -> np.ndarray:
    """Simple Max shares for each row of a (k, n) score matrix."""
    scores = np.asarray(scores, dtype=float)
    best = scores.max(axis=-1, keepdims=True)
    in_set = scores >= best - tolerance
    return in_set / in_set.sum(axis=-1, keepdims=True)


def share_of(player_scores: np.ndarray, rival_scores: np.ndarray, tolerance: float = FLOAT_TIE_TOLERANCE) -> np.ndarray:
    """Share of one player against rivals, broadcasting over leading axes.

    player_scores: (...,); rival_scores: (..., n_rivals).
    """
    if rival_scores.shape[-1] == 0:
        return np.ones_like(player_scores, dtype=float)
    best = np.maximum(player_scores, rival_scores.max(axis=-1))
    wins = player_scores >= best - tolerance
    tied_rivals = (rival_scores >= best[..., None] - tolerance).sum(axis=-1)
    return np.where(wins, 1.0 / (1 + tied_rivals), 0.0)
