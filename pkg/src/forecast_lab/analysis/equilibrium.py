"""Exact small-case equilibria of the p-biased coin game and grid best-response checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real

import numpy as np
import structlog

from forecast_lab.analysis.utility import exact_shares, pure_report_utilities
from forecast_lab.config.settings import EquilibriumSettings, MechanismSettings
from forecast_lab.data.beliefs import CoinScenario
from forecast_lab.data.strategies import MixedStrategy, StrategyProfile
from forecast_lab.exceptions import PropertyViolation, ScenarioError
from forecast_lab.utils.parallel import run_chunks

logger = structlog.get_logger(__name__)

HALF = Fraction(1, 2)
QUARTER = Fraction(1, 4)
ARGMAX_TOLERANCE = 1e-12
GRID_CHUNK = 8192


def as_fraction(p: Real) -> Fraction:
    """Exact rational view of p; floats go through their shortest repr."""
    if isinstance(p, Fraction):
        return p
    if isinstance(p, int):
        return Fraction(p)
    return Fraction(str(p))


def _check_bias(p: Real) -> None:
    if not 0 < p < HALF:
        raise ScenarioError(f"p must lie in (0, 1/2), got {p}")


# ---------------------------------------------------------------------------
# m = 1
# ---------------------------------------------------------------------------


def m1_n2_equilibrium(p: Real) -> StrategyProfile:
    """Informed reports 0; uninformed picks a vertex uniformly."""
    _check_bias(p)
    return m1_n_profile(2)


def m1_n_profile(n: int) -> StrategyProfile:
    if n < 2:
        raise ScenarioError(f"n must be >= 2, got {n}")
    informed = MixedStrategy.pure((Fraction(0),))
    vertex = MixedStrategy(((Fraction(0),), (Fraction(1),)), (HALF, HALF))
    return StrategyProfile((informed, *[vertex] * (n - 1)))


def m1_n_informed_utility(p: Real, n: int, mechanism: MechanismSettings | None = None) -> float:
    """Informed win probability at (r_i = 0; every j uniform on {0, 1}), by enumeration."""
    _check_bias(p)
    scenario = CoinScenario(m=1, p=p, n=n, informed_index=0)
    return float(exact_shares(m1_n_profile(n), scenario, mechanism)[0])


def displayed_n_forecaster_formula(p: Real, n: int) -> tuple[Fraction, Fraction]:
    """Both sides of the published closed form for the informed player's win probability."""
    p = as_fraction(p)
    scale = Fraction(1, 2 ** (n - 1))
    left = scale * (sum(Fraction(math.comb(n - 1, k), k + 1) for k in range(n)) + p / (n + 1))
    right = Fraction(2, n) - scale * (Fraction(1, n) - p / (n + 1))
    return left, right


def derived_n_forecaster_formula(p: Real, n: int) -> Fraction:
    """((1-p)(2^n - 1) + p) / (n 2^(n-1)).

    y = 0: i scores 1 and splits with the k rivals who also said 0.
    y = 1: i scores 0 and only ties when every rival said 0.
    """
    p = as_fraction(p)
    return ((1 - p) * (2**n - 1) + p) / (n * 2 ** (n - 1))


@dataclass
class FormulaAudit:
    p: float
    n: int
    enumerated: float
    displayed_left: float
    displayed_right: float
    derived: float
    displayed_sides_agree: bool
    matches_display: bool
    matches_derived: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def n_forecaster_formula_audit(p: Real, n: int, tolerance: float = 1e-12) -> FormulaAudit:
    """Enumerate the n-forecaster m = 1 profile and compare with both closed forms."""
    enumerated = m1_n_informed_utility(p, n)
    left, right = displayed_n_forecaster_formula(p, n)
    derived = derived_n_forecaster_formula(p, n)
    audit = FormulaAudit(
        p=float(p),
        n=n,
        enumerated=enumerated,
        displayed_left=float(left),
        displayed_right=float(right),
        derived=float(derived),
        displayed_sides_agree=left == right,
        matches_display=abs(enumerated - float(left)) <= tolerance,
        matches_derived=abs(enumerated - float(derived)) <= tolerance,
    )
    logger.info("formula_audit", n=n, p=float(p), enumerated=enumerated, matches_display=audit.matches_display)
    return audit


# ---------------------------------------------------------------------------
# m = 2
# ---------------------------------------------------------------------------


def m2_equilibrium(p: Real) -> StrategyProfile:
    """Mixed equilibrium for m = 2 and 1/3 < p < 1/2, with exact rational weights.

    Informed (canonical frame): c w.p. (1-p)/(2-p), (0, 1/2) and (1/2, 0) w.p.
    1/(2(2-p)) each. Uninformed: c w.p. 3p/(2-p), each point of {1/4, 3/4}^2
    w.p. (1/2 - p)/(2-p).
    """
    q = as_fraction(p)
    if not Fraction(1, 3) < q < HALF:
        raise ScenarioError(f"The m = 2 equilibrium needs 1/3 < p < 1/2, got {p}")
    center = (HALF, HALF)
    informed = MixedStrategy(
        (center, (Fraction(0), HALF), (HALF, Fraction(0))),
        ((1 - q) / (2 - q), 1 / (2 * (2 - q)), 1 / (2 * (2 - q))),
    )
    corners = [(a, b) for a in (QUARTER, 1 - QUARTER) for b in (QUARTER, 1 - QUARTER)]
    corner_weight = (HALF - q) / (2 - q)
    uninformed = MixedStrategy(
        (center, *corners),
        (3 * q / (2 - q), *[corner_weight] * 4),
    )
    return StrategyProfile((informed, uninformed))


def average_report(strategy: MixedStrategy) -> tuple:
    """Support-weighted mean report; exact when the strategy is rational."""
    m = strategy.m
    return tuple(sum(w * r[t] for r, w in zip(strategy.reports, strategy.weights)) for t in range(m))


def m2_average_coordinate(p: Real) -> Fraction:
    """(3 - 2p) / (4 (2 - p))."""
    q = as_fraction(p)
    return (3 - 2 * q) / (4 * (2 - q))


def hedging_threshold() -> float:
    """Bias at which the informed m = 2 average report equals the belief: (5 - sqrt 13) / 4."""
    threshold = (5.0 - math.sqrt(13.0)) / 4.0
    residual = (3 - 2 * threshold) / (4 * (2 - threshold)) - threshold
    quadratic = 4 * threshold**2 - 10 * threshold + 3
    if abs(residual) > 1e-12 or abs(quadratic) > 1e-12 or not 0 < threshold < 0.5:
        raise PropertyViolation(
            "Hedging threshold is not a root of the average-report equation",
            {"threshold": threshold, "residual": residual},
        )
    return threshold


def classify_average_report(p: Real) -> str:
    """'hedged' if the informed average sits between p and 1/2, 'extremized' if below p."""
    q = as_fraction(p)
    gap = m2_average_coordinate(q) - q
    if gap > 0:
        return "hedged"
    if gap < 0:
        return "extremized"
    return "truthful"


# ---------------------------------------------------------------------------
# Best responses
# ---------------------------------------------------------------------------


@dataclass
class BestResponse:
    player: int
    gain: float
    deviation: tuple[float, ...]
    best_utility: float
    current_utility: float
    grid_resolution: float


@dataclass
class SupportIndifference:
    player: int
    utilities: list[float]
    spread: float


@dataclass
class EquilibriumReport:
    profile: StrategyProfile
    utilities: list[float]
    max_gain: list[float]
    deviations: list[tuple[float, ...]]
    grid_resolution: float
    indifference_spread: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "profile": [
                {"reports": [[float(v) for v in r] for r in s.reports], "weights": [float(w) for w in s.weights]}
                for s in self.profile.strategies
            ],
            "utilities": self.utilities,
            "max_gain": self.max_gain,
            "deviations": [list(d) for d in self.deviations],
            "grid_resolution": self.grid_resolution,
            "indifference_spread": self.indifference_spread,
        }


def report_grid(resolution: float) -> np.ndarray:
    """Points k / K on [0, 1]; exact at 0, 1/2 and the quarters when K allows."""
    steps = int(round(1.0 / resolution))
    if steps < 1:
        raise ScenarioError(f"Grid resolution {resolution} is coarser than [0, 1]")
    return np.arange(steps + 1) / steps


def _first_argmax(values: np.ndarray) -> int:
    best = values.max()
    return int(np.flatnonzero(values >= best - ARGMAX_TOLERANCE)[0])


def _utilities(player, candidates, profile, scenario, mechanism, workers) -> np.ndarray:
    chunks = run_chunks(
        lambda chunk: pure_report_utilities(player, np.asarray(chunk), profile, scenario, mechanism),
        candidates,
        GRID_CHUNK,
        workers,
    )
    return np.concatenate(chunks)


def best_response_gain(
    profile: StrategyProfile,
    player: int,
    scenario: CoinScenario,
    grid_resolution: float = 0.01,
    refinement_sweeps: int = 3,
    include_support: bool = False,
    workers: int = 1,
    mechanism: MechanismSettings | None = None,
) -> BestResponse:
    """Largest utility gain over pure deviations on a per-coordinate grid.

    m <= 2 searches the full product grid; larger m runs coordinate-wise
    sweeps from the best support point. Ties go to the lexicographically
    smallest deviation.
    """
    mechanism = mechanism or MechanismSettings()
    grid = report_grid(grid_resolution)
    m = scenario.m
    current = float(exact_shares(profile, scenario, mechanism)[player])
    support = np.array(profile[player].reports, dtype=float)

    if m <= 2:
        candidates = np.array(list(itertools.product(grid, repeat=m)))
        if include_support:
            candidates = np.vstack([candidates, support])
        utilities = _utilities(player, candidates, profile, scenario, mechanism, workers)
        best_idx = _first_argmax(utilities)
        best_report, best_utility = candidates[best_idx], float(utilities[best_idx])
    else:
        start = pure_report_utilities(player, support, profile, scenario, mechanism)
        best_report = np.round(support[_first_argmax(start)] * (len(grid) - 1)) / (len(grid) - 1)
        best_utility = float(pure_report_utilities(player, best_report[None, :], profile, scenario, mechanism)[0])
        for sweep in range(refinement_sweeps):
            improved = False
            for t in range(m):
                candidates = np.repeat(best_report[None, :], len(grid), axis=0)
                candidates[:, t] = grid
                utilities = _utilities(player, candidates, profile, scenario, mechanism, workers)
                idx = _first_argmax(utilities)
                if utilities[idx] > best_utility + ARGMAX_TOLERANCE:
                    best_report, best_utility, improved = candidates[idx].copy(), float(utilities[idx]), True
            logger.debug("refinement_sweep", player=player, sweep=sweep, utility=best_utility)
            if not improved:
                break
        if include_support and start.max() > best_utility + ARGMAX_TOLERANCE:
            best_report, best_utility = support[_first_argmax(start)], float(start.max())

    return BestResponse(
        player=player,
        gain=best_utility - current,
        deviation=tuple(float(v) for v in best_report),
        best_utility=best_utility,
        current_utility=current,
        grid_resolution=grid_resolution,
    )


def support_indifference(
    profile: StrategyProfile,
    player: int,
    scenario: CoinScenario,
    mechanism: MechanismSettings | None = None,
) -> SupportIndifference:
    """Utility of each of the player's support points against the rest of the profile."""
    support = np.array(profile[player].reports, dtype=float)
    utilities = pure_report_utilities(player, support, profile, scenario, mechanism)
    return SupportIndifference(
        player=player,
        utilities=[float(u) for u in utilities],
        spread=float(utilities.max() - utilities.min()),
    )


def verify_equilibrium(
    profile: StrategyProfile,
    scenario: CoinScenario,
    settings: EquilibriumSettings | None = None,
    gain_tolerance: float = 1e-6,
    indifference_tolerance: float = 1e-9,
    workers: int = 1,
    mechanism: MechanismSettings | None = None,
) -> EquilibriumReport:
    """Best-response gains and support indifference for every player.

    Raises PropertyViolation when a gain or an indifference spread exceeds
    its tolerance.
    """
    settings = settings or EquilibriumSettings()
    utilities = [float(u) for u in exact_shares(profile, scenario, mechanism)]
    gains, deviations, spreads = [], [], []
    for player in range(profile.n):
        response = best_response_gain(
            profile,
            player,
            scenario,
            grid_resolution=settings.grid_resolution,
            refinement_sweeps=settings.refinement_sweeps,
            workers=workers,
            mechanism=mechanism,
        )
        gains.append(response.gain)
        deviations.append(response.deviation)
        spreads.append(support_indifference(profile, player, scenario, mechanism).spread)

    report = EquilibriumReport(
        profile=profile,
        utilities=utilities,
        max_gain=gains,
        deviations=deviations,
        grid_resolution=settings.grid_resolution,
        indifference_spread=spreads,
    )
    logger.info("equilibrium_verified", p=float(scenario.p), m=scenario.m, max_gain=max(gains), spread=max(spreads))
    for player, (gain, spread) in enumerate(zip(gains, spreads)):
        if gain > gain_tolerance:
            raise PropertyViolation(
                f"Player {player} gains {gain:.3g} by deviating",
                {"player": player, "gain": gain, "deviation": list(deviations[player])},
            )
        if spread > indifference_tolerance:
            raise PropertyViolation(
                f"Player {player} is not indifferent across the support (spread {spread:.3g})",
                {"player": player, "spread": spread},
            )
    return report
