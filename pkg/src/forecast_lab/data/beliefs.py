"""Belief models: the p-biased coin world, hypercube reflections and per-event joint beliefs."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real

import numpy as np

from forecast_lab.exceptions import ScenarioError

WEIGHT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CoinScenario:
    """m events with bias p or 1 - p; one informed forecaster knows the biases."""

    m: int
    p: Real
    n: int = 2
    informed_index: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ScenarioError(f"m must be >= 1, got {self.m}")
        if not 0 < self.p < Fraction(1, 2):
            raise ScenarioError(f"p must lie in (0, 1/2), got {self.p}")
        if self.n < 1:
            raise ScenarioError(f"n must be >= 1, got {self.n}")
        if not 0 <= self.informed_index < self.n:
            raise ScenarioError(f"informed_index {self.informed_index} outside [0, {self.n})")

    @property
    def canonical_theta(self) -> np.ndarray:
        return np.full(self.m, float(self.p))

    def is_informed(self, player: int) -> bool:
        return player == self.informed_index


@dataclass(frozen=True)
class Reflection:
    """Reflection of the hypercube flipping the (0-based) coordinates in flip_set."""

    flip_set: frozenset[int] = field(default_factory=frozenset)

    def mask(self, m: int) -> np.ndarray:
        if any(t < 0 or t >= m for t in self.flip_set):
            raise ScenarioError(f"Flip set {sorted(self.flip_set)} not inside 0..{m - 1}")
        out = np.zeros(m, dtype=bool)
        out[list(self.flip_set)] = True
        return out


def apply_reflection(ref: Reflection, r: Sequence[Real]) -> tuple:
    """Map r_t to 1 - r_t for every t in the flip set."""
    ref.mask(len(r))
    return tuple(1 - r_t if t in ref.flip_set else r_t for t, r_t in enumerate(r))


def reflect_bits(ref: Reflection, y: Sequence[int]) -> tuple[int, ...]:
    ref.mask(len(y))
    return tuple(1 - y_t if t in ref.flip_set else y_t for t, y_t in enumerate(y))


def reflection_masks(m: int) -> np.ndarray:
    """All 2^m flip masks as a (2^m, m) boolean array, ordered by bit pattern."""
    codes = np.arange(2**m)[:, None]
    return ((codes >> np.arange(m)) & 1).astype(bool)


def outcome_space(m: int) -> np.ndarray:
    """Every outcome vector in {0,1}^m as a (2^m, m) integer array."""
    return reflection_masks(m).astype(np.int8)


def canonical_inversion(
    theta: Sequence[Real],
    reports: Sequence[Sequence[Real]],
    y: Sequence[int],
    p: Real | None = None,
) -> tuple[tuple, list[tuple], tuple[int, ...]]:
    """Reflect every coordinate with bias 1 - p so the ground truth becomes (p, ..., p)."""
    if p is None:
        p = min(min(th, 1 - th) for th in theta)
    flips = set()
    for t, th in enumerate(theta):
        if np.isclose(float(th), float(p), rtol=0, atol=1e-15):
            continue
        if np.isclose(float(th), float(1 - p), rtol=0, atol=1e-15):
            flips.add(t)
        else:
            raise ScenarioError(f"theta[{t}] = {th} is neither p nor 1 - p")
    ref = Reflection(frozenset(flips))
    theta_out = tuple(p for _ in theta)
    return theta_out, [apply_reflection(ref, r) for r in reports], reflect_bits(ref, y)


def sample_coin_world(scenario: CoinScenario, seed: int | np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw theta uniformly from {p, 1-p}^m, then y_t ~ Bernoulli(theta_t)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p = float(scenario.p)
    flips = rng.random(scenario.m) < 0.5
    theta = np.where(flips, 1.0 - p, p)
    y = (rng.random(scenario.m) < theta).astype(np.int8)
    return theta, y


@dataclass(frozen=True)
class SignalModel:
    """Posterior reports implied by the coin world's signals."""

    scenario: CoinScenario
    theta: np.ndarray

    def __post_init__(self):
        p = float(self.scenario.p)
        theta = np.asarray(self.theta, dtype=float)
        if theta.shape != (self.scenario.m,):
            raise ScenarioError(f"theta has shape {theta.shape}, expected ({self.scenario.m},)")
        ok = np.isclose(theta, p) | np.isclose(theta, 1.0 - p)
        if not ok.all():
            raise ScenarioError("theta entries must be p or 1 - p")

    def posterior(self, player: int) -> np.ndarray:
        if self.scenario.is_informed(player):
            return np.asarray(self.theta, dtype=float).copy()
        return np.full(self.scenario.m, 0.5)


@dataclass(frozen=True)
class EventBelief:
    """Joint finite distribution over (opponent report, outcome) for one event."""

    reports: np.ndarray
    outcomes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        reports = np.asarray(self.reports, dtype=float)
        outcomes = np.asarray(self.outcomes, dtype=np.int8)
        weights = np.asarray(self.weights, dtype=float)
        if not (reports.shape == outcomes.shape == weights.shape) or reports.ndim != 1:
            raise ScenarioError("Event table columns must be 1-d and of equal length")
        if len(weights) == 0:
            raise ScenarioError("Event table is empty")
        if ((reports < 0) | (reports > 1)).any():
            raise ScenarioError("Opponent reports must lie in [0, 1]")
        if not np.isin(outcomes, (0, 1)).all():
            raise ScenarioError("Outcomes must be bits")
        if (weights < 0).any() or abs(weights.sum() - 1.0) > WEIGHT_TOLERANCE:
            raise ScenarioError(f"Event weights must be non-negative and sum to 1, got {weights.sum()}")
        object.__setattr__(self, "reports", reports)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_rows(cls, rows: Sequence[tuple[float, int, float]]) -> EventBelief:
        reports, outcomes, weights = zip(*rows)
        return cls(np.array(reports), np.array(outcomes), np.array(weights))

    @classmethod
    def independent(
        cls,
        outcome_probability: float,
        report_values: Sequence[float],
        report_weights: Sequence[float] | None = None,
    ) -> EventBelief:
        """Opponent report independent of the outcome."""
        values = np.asarray(report_values, dtype=float)
        if report_weights is None:
            report_weights = np.full(len(values), 1.0 / len(values))
        rw = np.asarray(report_weights, dtype=float)
        q = float(outcome_probability)
        reports = np.concatenate([values, values])
        outcomes = np.concatenate([np.ones(len(values)), np.zeros(len(values))])
        weights = np.concatenate([q * rw, (1.0 - q) * rw])
        keep = weights > 0
        return cls(reports[keep], outcomes[keep], weights[keep])

    @classmethod
    def discretized(cls, outcome_probability: float, report_cdf, resolution: float = 0.01) -> EventBelief:
        """Grid discretization of a continuous opponent-report law on [0, 1].

        Each grid point k*resolution receives the CDF mass of its cell
        [k - 1/2, k + 1/2) * resolution, with the end cells closed at 0 and 1.
        """
        n_cells = int(round(1.0 / resolution))
        grid = np.arange(n_cells + 1) * resolution
        edges = np.concatenate([[0.0], (grid[:-1] + grid[1:]) / 2, [1.0]])
        mass = np.diff(np.clip(report_cdf(edges), 0.0, 1.0))
        mass[0] += float(np.clip(report_cdf(0.0), 0.0, 1.0))
        mass = mass / mass.sum()
        return cls.independent(outcome_probability, np.clip(grid, 0.0, 1.0), mass)

    @property
    def outcome_probability(self) -> float:
        return float(self.weights[self.outcomes == 1].sum())


@dataclass(frozen=True)
class BeliefModel:
    """Forecaster i's belief: independent per-event joints over (R_jt, Y_t)."""

    events: tuple[EventBelief, ...]

    def __post_init__(self):
        if len(self.events) == 0:
            raise ScenarioError("A belief model needs at least one event")
        object.__setattr__(self, "events", tuple(self.events))

    @classmethod
    def iid(cls, event: EventBelief, m: int) -> BeliefModel:
        return cls(tuple(event for _ in range(m)))

    @property
    def m(self) -> int:
        return len(self.events)


def belief_marginal(belief: BeliefModel) -> np.ndarray:
    """p_it = Pr[Y_t = 1] under each event's joint."""
    return np.array([event.outcome_probability for event in belief.events])


@dataclass(frozen=True)
class ScenarioFlags:
    """Hypotheses declared on a scenario rather than measured from it."""

    smooth_density: bool = False
    subsequence_lambda: float | None = None
    subsequence_m_star: int | None = None

    def __post_init__(self):
        if self.subsequence_lambda is not None and not 0 < self.subsequence_lambda <= 1:
            raise ScenarioError(f"lambda must lie in (0, 1], got {self.subsequence_lambda}")
        if self.subsequence_m_star is not None and self.subsequence_m_star < 1:
            raise ScenarioError("m_star must be positive")
