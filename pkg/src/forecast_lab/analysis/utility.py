"""Expected utilities under Simple Max: exact enumeration, Monte Carlo and tie-aware convolution."""

from __future__ import annotations

import dataclasses
import itertools
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import structlog

from forecast_lab.analysis.distributions import (
    ScoreDiffDistribution,
    score_diff_event,
    sum_of_events,
)
from forecast_lab.config.settings import ConvolutionSettings, MechanismSettings, MonteCarloSettings
from forecast_lab.data.beliefs import BeliefModel, CoinScenario, outcome_space, reflection_masks
from forecast_lab.data.strategies import MixedStrategy, StrategyProfile, symmetrize_arrays
from forecast_lab.exceptions import EnumerationCapError, ScenarioError
from forecast_lab.mechanism.scoring import batch_shares, batch_total_scores, share_of
from forecast_lab.utils.parallel import run_seeded_blocks

logger = structlog.get_logger(__name__)

World = CoinScenario | BeliefModel

CANDIDATE_CHUNK = 16_384


@dataclass(frozen=True)
class UtilityEstimate:
    mean: float
    half_width: float
    trials: int
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.mean <= 1.0:
            raise ScenarioError(f"Utility estimate {self.mean} outside [0, 1]")
        if self.half_width < 0:
            raise ScenarioError("half_width must be non-negative")

    @property
    def interval(self) -> tuple[float, float]:
        return self.mean - self.half_width, self.mean + self.half_width


@dataclass(frozen=True)
class LeaveOneOutStats:
    """Cumulants of the score difference summed over every event except t."""

    mu: float
    sigma: float
    kappa3: float
    kappa4: float
    abs_third: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.mu, self.sigma, self.kappa3, self.kappa4


# ---------------------------------------------------------------------------
# Coin worlds (canonical frame)
# ---------------------------------------------------------------------------


def _check_cap(m: int, mechanism: MechanismSettings, cap: int | None = None) -> None:
    cap = mechanism.enumeration_cap_m if cap is None else cap
    if m > cap:
        raise EnumerationCapError(
            f"Exact enumeration refused for m={m} (cap {cap}); use monte_carlo_utility instead"
        )


def _check_profile(profile: StrategyProfile, scenario: CoinScenario) -> None:
    if profile.n != scenario.n:
        raise ScenarioError(f"Profile has {profile.n} players, scenario has {scenario.n}")
    if profile.m != scenario.m:
        raise ScenarioError(f"Profile has m={profile.m}, scenario has m={scenario.m}")


def outcome_probabilities(theta: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
    """Pr[y | theta] for each row of outcomes under independent Bernoulli(theta_t)."""
    theta = np.asarray(theta, dtype=float)
    return np.prod(np.where(outcomes == 1, theta, 1.0 - theta), axis=1)


def canonical_supports(profile: StrategyProfile, scenario: CoinScenario) -> list[tuple[np.ndarray, np.ndarray]]:
    """Float supports in the canonical frame theta = (p, ..., p).

    The informed player's strategy is taken as given (it already conditions on
    theta); every uninformed strategy is averaged over all reflections.
    """
    supports = []
    for k, strategy in enumerate(profile.strategies):
        reports, weights = strategy.as_arrays()
        if not scenario.is_informed(k):
            reports, weights = symmetrize_arrays(reports, weights)
        supports.append((reports, weights))
    return supports


def _check_cells(n_outcomes: int, supports: Sequence[tuple[np.ndarray, np.ndarray]], mechanism: MechanismSettings):
    cells = n_outcomes * int(np.prod([len(w) for _, w in supports]))
    if cells > mechanism.max_enumeration_cells:
        raise EnumerationCapError(
            f"Enumeration would visit {cells} cells (cap {mechanism.max_enumeration_cells}); use monte_carlo_utility"
        )


def _enumerate_shares(
    supports: Sequence[tuple[np.ndarray, np.ndarray]],
    outcomes: np.ndarray,
    probs: np.ndarray,
    tolerance: float,
) -> tuple[np.ndarray, float]:
    """Expected share per player and the probability of a multi-member winning set."""
    n = len(supports)
    expected = np.zeros(n)
    tie_mass = 0.0
    for combo in itertools.product(*[range(len(w)) for _, w in supports]):
        weight = float(np.prod([supports[k][1][j] for k, j in enumerate(combo)]))
        reports = np.stack([supports[k][0][j] for k, j in enumerate(combo)])
        scores = batch_total_scores(reports, outcomes)
        shares = batch_shares(scores, tolerance)
        expected += weight * (probs @ shares)
        tied = (shares > 0).sum(axis=1) > 1
        tie_mass += weight * float(probs @ tied)
    return expected, tie_mass


def exact_shares(
    profile: StrategyProfile,
    scenario: CoinScenario,
    mechanism: MechanismSettings | None = None,
) -> np.ndarray:
    """Exact expected Simple Max share of every player in the coin world."""
    mechanism = mechanism or MechanismSettings()
    _check_profile(profile, scenario)
    _check_cap(scenario.m, mechanism)
    supports = canonical_supports(profile, scenario)
    outcomes = outcome_space(scenario.m)
    _check_cells(len(outcomes), supports, mechanism)
    probs = outcome_probabilities(scenario.canonical_theta, outcomes)
    expected, _ = _enumerate_shares(supports, outcomes, probs, mechanism.float_tie_tolerance)
    return expected


def tie_probability(
    profile: StrategyProfile,
    scenario: CoinScenario,
    mechanism: MechanismSettings | None = None,
) -> float:
    """Probability that more than one forecaster shares the maximal score."""
    mechanism = mechanism or MechanismSettings()
    _check_profile(profile, scenario)
    _check_cap(scenario.m, mechanism)
    supports = canonical_supports(profile, scenario)
    outcomes = outcome_space(scenario.m)
    _check_cells(len(outcomes), supports, mechanism)
    probs = outcome_probabilities(scenario.canonical_theta, outcomes)
    _, tie_mass = _enumerate_shares(supports, outcomes, probs, mechanism.float_tie_tolerance)
    return tie_mass


def coin_score_difference(
    profile: StrategyProfile,
    scenario: CoinScenario,
    player: int = 0,
    mechanism: MechanismSettings | None = None,
) -> ScoreDiffDistribution:
    """Exact law of (best rival total) - (own total) for `player` in the coin world."""
    mechanism = mechanism or MechanismSettings()
    _check_profile(profile, scenario)
    _check_cap(scenario.m, mechanism)
    if profile.n < 2:
        raise ScenarioError("A score difference needs at least one rival")
    supports = canonical_supports(profile, scenario)
    outcomes = outcome_space(scenario.m)
    _check_cells(len(outcomes), supports, mechanism)
    probs = outcome_probabilities(scenario.canonical_theta, outcomes)
    values, weights = [], []
    for combo in itertools.product(*[range(len(w)) for _, w in supports]):
        weight = float(np.prod([supports[k][1][j] for k, j in enumerate(combo)]))
        scores = batch_total_scores(np.stack([supports[k][0][j] for k, j in enumerate(combo)]), outcomes)
        values.append(np.delete(scores, player, axis=1).max(axis=1) - scores[:, player])
        weights.append(weight * probs)
    return ScoreDiffDistribution.from_atoms(np.concatenate(values), np.concatenate(weights))


def _candidate_utilities(
    candidates: np.ndarray,
    rivals: Sequence[tuple[np.ndarray, np.ndarray]],
    outcomes: np.ndarray,
    probs: np.ndarray,
    tolerance: float,
) -> np.ndarray:
    """Expected share of each candidate report (rows) against mixed rivals."""
    out = np.empty(len(candidates))
    rival_scores = [batch_total_scores(reports, outcomes) for reports, _ in rivals]
    for start in range(0, len(candidates), CANDIDATE_CHUNK):
        chunk = candidates[start : start + CANDIDATE_CHUNK]
        own = batch_total_scores(chunk, outcomes)  # (2^m, K)
        acc = np.zeros_like(own)
        if not rivals:
            out[start : start + len(chunk)] = probs @ np.ones_like(own)
            continue
        for combo in itertools.product(*[range(len(w)) for _, w in rivals]):
            weight = float(np.prod([rivals[k][1][j] for k, j in enumerate(combo)]))
            rs = np.stack([rival_scores[k][:, j] for k, j in enumerate(combo)], axis=-1)  # (2^m, n-1)
            acc += weight * share_of(own, np.broadcast_to(rs[:, None, :], (*own.shape, rs.shape[-1])), tolerance)
        out[start : start + len(chunk)] = probs @ acc
    return out


def pure_report_utilities(
    player: int,
    candidates: np.ndarray,
    profile: StrategyProfile,
    scenario: CoinScenario,
    mechanism: MechanismSettings | None = None,
) -> np.ndarray:
    """Exact utility of each pure deviation for `player`, others held at the profile.

    An uninformed player cannot condition on theta, so a pure report r is
    evaluated as its reflection average in the canonical frame.
    """
    mechanism = mechanism or MechanismSettings()
    _check_profile(profile, scenario)
    _check_cap(scenario.m, mechanism)
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if candidates.shape[1] != scenario.m:
        raise ScenarioError(f"Candidates have {candidates.shape[1]} events, scenario has {scenario.m}")
    supports = canonical_supports(profile, scenario)
    rivals = [s for k, s in enumerate(supports) if k != player]
    outcomes = outcome_space(scenario.m)
    probs = outcome_probabilities(scenario.canonical_theta, outcomes)
    tol = mechanism.float_tie_tolerance
    if scenario.is_informed(player):
        return _candidate_utilities(candidates, rivals, outcomes, probs, tol)
    masks = reflection_masks(scenario.m)
    expanded = np.where(masks[None, :, :], 1.0 - candidates[:, None, :], candidates[:, None, :])
    utilities = _candidate_utilities(expanded.reshape(-1, scenario.m), rivals, outcomes, probs, tol)
    return utilities.reshape(len(candidates), len(masks)).mean(axis=1)


def direct_bayes_utility(
    player: int,
    profile: StrategyProfile,
    scenario: CoinScenario,
    mechanism: MechanismSettings | None = None,
) -> float:
    """Expected share in the un-reduced game: theta drawn from {p, 1-p}^m.

    The informed strategy is read in the canonical frame and reflected onto
    each theta; uninformed strategies are used as given.
    """
    mechanism = mechanism or MechanismSettings()
    _check_profile(profile, scenario)
    _check_cap(scenario.m, mechanism, mechanism.direct_bayes_cap_m)
    p = float(scenario.p)
    outcomes = outcome_space(scenario.m)
    masks = reflection_masks(scenario.m)
    base = [s.as_arrays() for s in profile.strategies]
    total = 0.0
    for mask in masks:
        theta = np.where(mask, 1.0 - p, p)
        supports = []
        for k, (reports, weights) in enumerate(base):
            if scenario.is_informed(k):
                reports = np.where(mask, 1.0 - reports, reports)
            supports.append((reports, weights))
        probs = outcome_probabilities(theta, outcomes)
        expected, _ = _enumerate_shares(supports, outcomes, probs, mechanism.float_tie_tolerance)
        total += expected[player]
    return total / len(masks)


# ---------------------------------------------------------------------------
# Belief worlds (two forecasters, per-event joint beliefs)
# ---------------------------------------------------------------------------


def _tie_tolerance(dist: ScoreDiffDistribution, convolution: ConvolutionSettings) -> float:
    return dist.lattice / 2 if dist.lattice else convolution.zero_tolerance


def tie_mass(dist: ScoreDiffDistribution, convolution: ConvolutionSettings | None = None) -> float:
    """Pr[sum = 0] at the tolerance that matches how the distribution was built."""
    convolution = convolution or ConvolutionSettings()
    return dist.mass_near(0.0, _tie_tolerance(dist, convolution))


def win_probability(dist: ScoreDiffDistribution, convolution: ConvolutionSettings | None = None) -> float:
    """Pr[sum < 0] + 1/2 Pr[sum = 0] for an opponent-minus-own score difference."""
    convolution = convolution or ConvolutionSettings()
    tol = _tie_tolerance(dist, convolution)
    return dist.mass_below(0.0, tol) + 0.5 * dist.mass_near(0.0, tol)


def score_difference(
    r_i: Sequence[float],
    belief: BeliefModel,
    convolution: ConvolutionSettings | None = None,
) -> ScoreDiffDistribution:
    convolution = convolution or ConvolutionSettings()
    if len(r_i) != belief.m:
        raise ScenarioError(f"Report has {len(r_i)} entries, belief has m={belief.m}")
    return sum_of_events(
        r_i,
        belief.events,
        resolution=convolution.resolution,
        atom_cap=convolution.atom_cap,
        merge_decimals=convolution.merge_decimals,
    )


def tie_aware_utility(
    r_i: Sequence[float],
    belief: BeliefModel,
    convolution: ConvolutionSettings | None = None,
) -> float:
    """Two-forecaster win probability with ties split evenly."""
    convolution = convolution or ConvolutionSettings()
    return win_probability(score_difference(r_i, belief, convolution), convolution)


def belief_tie_probability(
    r_i: Sequence[float],
    belief: BeliefModel,
    convolution: ConvolutionSettings | None = None,
) -> float:
    convolution = convolution or ConvolutionSettings()
    return tie_mass(score_difference(r_i, belief, convolution), convolution)


def mixed_score_difference(
    strategy: MixedStrategy,
    belief: BeliefModel,
    convolution: ConvolutionSettings | None = None,
) -> ScoreDiffDistribution:
    """Score difference when the own report is drawn from a mixed strategy.

    A shared lattice spacing survives the mixture so ties keep the same
    tolerance as the per-report laws.
    """
    convolution = convolution or ConvolutionSettings()
    if strategy.m != belief.m:
        raise ScenarioError(f"Strategy has m={strategy.m}, belief has m={belief.m}")
    reports, weights = strategy.as_arrays()
    parts = [score_difference(r, belief, convolution) for r in reports]
    if len(parts) == 1:
        return parts[0]
    mixed = ScoreDiffDistribution.from_atoms(
        np.concatenate([d.values for d in parts]),
        np.concatenate([w * d.weights for d, w in zip(parts, weights)]),
        convolution.merge_decimals,
    )
    lattices = {d.lattice for d in parts}
    if len(lattices) == 1:
        mixed = dataclasses.replace(mixed, lattice=lattices.pop())
    return mixed


def _own_strategy(player: int, profile: StrategyProfile | MixedStrategy) -> MixedStrategy:
    if isinstance(profile, MixedStrategy):
        return profile
    return profile[player]


def leave_one_out_distribution(
    r_i: Sequence[float],
    belief: BeliefModel,
    t: int,
    convolution: ConvolutionSettings | None = None,
) -> ScoreDiffDistribution:
    convolution = convolution or ConvolutionSettings()
    if belief.m < 2:
        raise ScenarioError("Leave-one-out needs m >= 2")
    if not 0 <= t < belief.m:
        raise ScenarioError(f"Event {t} outside 0..{belief.m - 1}")
    reports = [r for k, r in enumerate(r_i) if k != t]
    events = [ev for k, ev in enumerate(belief.events) if k != t]
    return sum_of_events(
        reports,
        events,
        resolution=convolution.resolution,
        atom_cap=convolution.atom_cap,
        merge_decimals=convolution.merge_decimals,
    )


def leave_one_out_stats(r_i: Sequence[float], belief: BeliefModel, t: int) -> LeaveOneOutStats:
    """(mu_it, sigma_it, kappa3_it, kappa4_it) of the sum over events other than t."""
    if belief.m < 2:
        raise ScenarioError("Leave-one-out needs m >= 2")
    if not 0 <= t < belief.m:
        raise ScenarioError(f"Event {t} outside 0..{belief.m - 1}")
    terms = [score_diff_event(float(r), ev) for k, (r, ev) in enumerate(zip(r_i, belief.events)) if k != t]
    variance = sum(d.variance for d in terms)
    return LeaveOneOutStats(
        mu=sum(d.mean for d in terms),
        sigma=float(np.sqrt(max(variance, 0.0))),
        kappa3=sum(d.kappa3 for d in terms),
        kappa4=sum(d.kappa4 for d in terms),
        abs_third=sum(d.abs_third for d in terms),
    )


def event_utility(
    r: float,
    r_i: Sequence[float],
    belief: BeliefModel,
    t: int,
    convolution: ConvolutionSettings | None = None,
    rest: ScoreDiffDistribution | None = None,
) -> float:
    """Win probability when event t is reported as r and the other events stay at r_i."""
    convolution = convolution or ConvolutionSettings()
    rest = rest or leave_one_out_distribution(r_i, belief, t, convolution)
    own = score_diff_event(float(r), belief.events[t])
    tol = _tie_tolerance(rest, convolution)
    return float(
        sum(w * (rest.mass_below(-a, tol) + 0.5 * rest.mass_near(-a, tol)) for a, w in zip(own.values, own.weights))
    )


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


def exact_expected_utility(
    player: int,
    profile: StrategyProfile | MixedStrategy,
    world: World,
    mechanism: MechanismSettings | None = None,
    convolution: ConvolutionSettings | None = None,
) -> float:
    """Exact expected Simple Max share of `player`.

    In a BeliefModel world the player is the belief's owner and only their
    own strategy is read from the profile.
    """
    mechanism = mechanism or MechanismSettings()
    if isinstance(world, CoinScenario):
        if not isinstance(profile, StrategyProfile):
            raise ScenarioError("Coin worlds need a full strategy profile")
        return float(exact_shares(profile, world, mechanism)[player])
    _check_cap(world.m, mechanism)
    strategy = _own_strategy(player, profile)
    if strategy.m != world.m:
        raise ScenarioError(f"Strategy has m={strategy.m}, belief has m={world.m}")
    reports, weights = strategy.as_arrays()
    return float(sum(w * tie_aware_utility(r, world, convolution) for r, w in zip(reports, weights)))


def _sample_coin_scores(supports, scenario: CoinScenario, size: int, rng: np.random.Generator) -> np.ndarray:
    """(size, n) total scores in the canonical frame; uninformed reports get random reflections."""
    y = (rng.random((size, scenario.m)) < float(scenario.p)).astype(np.int8)
    stacked = []
    for k, (reports, weights) in enumerate(supports):
        chosen = reports[rng.choice(len(weights), size=size, p=weights)]
        if not scenario.is_informed(k):
            flips = rng.random((size, scenario.m)) < 0.5
            chosen = np.where(flips, 1.0 - chosen, chosen)
        stacked.append(chosen)
    return batch_total_scores(np.stack(stacked, axis=1), y)


def _coin_block(profile: StrategyProfile, scenario: CoinScenario, player: int, tolerance: float):
    supports = [s.as_arrays() for s in profile.strategies]

    def block(size: int, rng: np.random.Generator) -> tuple[float, float]:
        shares = batch_shares(_sample_coin_scores(supports, scenario, size, rng), tolerance)[:, player]
        return float(shares.sum()), float((shares**2).sum())

    return block


def _belief_block(strategy: MixedStrategy, belief: BeliefModel, tolerance: float):
    reports, weights = strategy.as_arrays()

    def block(size: int, rng: np.random.Generator) -> tuple[float, float]:
        own = reports[rng.choice(len(weights), size=size, p=weights)]
        delta = np.zeros(size)
        for t, event in enumerate(belief.events):
            idx = rng.choice(len(event.weights), size=size, p=event.weights)
            y = event.outcomes[idx].astype(float)
            delta += (1.0 - (event.reports[idx] - y) ** 2) - (1.0 - (own[:, t] - y) ** 2)
        shares = np.where(delta < -tolerance, 1.0, np.where(delta <= tolerance, 0.5, 0.0))
        return float(shares.sum()), float((shares**2).sum())

    return block


def monte_carlo_utility(
    player: int,
    profile: StrategyProfile | MixedStrategy,
    world: World,
    trials: int,
    seed: int,
    workers: int = 1,
    monte_carlo: MonteCarloSettings | None = None,
    mechanism: MechanismSettings | None = None,
) -> UtilityEstimate:
    """Seeded Monte Carlo estimate with a normal-approximation CI.

    Coin worlds sample in the canonical frame: y ~ Bernoulli(p)^m and every
    uninformed report passes through a uniformly random reflection.
    """
    if trials < 1:
        raise ScenarioError("trials must be >= 1")
    monte_carlo = monte_carlo or MonteCarloSettings()
    mechanism = mechanism or MechanismSettings()
    if isinstance(world, CoinScenario):
        if not isinstance(profile, StrategyProfile):
            raise ScenarioError("Coin worlds need a full strategy profile")
        _check_profile(profile, world)
        block = _coin_block(profile, world, player, mechanism.float_tie_tolerance)
    else:
        block = _belief_block(_own_strategy(player, profile), world, mechanism.float_tie_tolerance)

    results = run_seeded_blocks(block, trials, monte_carlo.block_size, seed, workers)
    total = sum(r[0] for r in results)
    total_sq = sum(r[1] for r in results)
    mean = total / trials
    variance = max(total_sq / trials - mean**2, 0.0)
    half_width = monte_carlo.ci_z * float(np.sqrt(variance / trials))
    logger.debug("monte_carlo_done", player=player, trials=trials, seed=seed, mean=mean)
    return UtilityEstimate(mean=float(min(max(mean, 0.0), 1.0)), half_width=half_width, trials=trials, seed=seed)


def sample_coin_score_difference(
    profile: StrategyProfile,
    scenario: CoinScenario,
    trials: int,
    seed: int,
    player: int = 0,
    workers: int = 1,
    monte_carlo: MonteCarloSettings | None = None,
) -> ScoreDiffDistribution:
    """Empirical law of (best rival total) - (own total) from seeded canonical-frame samples."""
    monte_carlo = monte_carlo or MonteCarloSettings()
    _check_profile(profile, scenario)
    supports = [s.as_arrays() for s in profile.strategies]

    def block(size: int, rng: np.random.Generator) -> np.ndarray:
        scores = _sample_coin_scores(supports, scenario, size, rng)
        return np.delete(scores, player, axis=1).max(axis=1) - scores[:, player]

    samples = np.concatenate(run_seeded_blocks(block, trials, monte_carlo.block_size, seed, workers))
    return ScoreDiffDistribution.from_atoms(samples, np.full(len(samples), 1.0 / len(samples)))


def convolved_cdf_oracle(r_i: Sequence[float], belief: BeliefModel) -> ScoreDiffDistribution:
    """Full product-space enumeration of the summed score difference (small m only)."""
    terms = [score_diff_event(float(r), ev) for r, ev in zip(r_i, belief.events)]
    grids = [list(zip(d.values, d.weights)) for d in terms]
    values, weights = [], []
    for combo in itertools.product(*grids):
        values.append(sum(v for v, _ in combo))
        weights.append(float(np.prod([w for _, w in combo])))
    return ScoreDiffDistribution.from_atoms(values, weights)


__all__ = [
    "LeaveOneOutStats",
    "UtilityEstimate",
    "belief_tie_probability",
    "canonical_supports",
    "coin_score_difference",
    "convolved_cdf_oracle",
    "direct_bayes_utility",
    "event_utility",
    "exact_expected_utility",
    "exact_shares",
    "leave_one_out_distribution",
    "leave_one_out_stats",
    "mixed_score_difference",
    "monte_carlo_utility",
    "outcome_probabilities",
    "pure_report_utilities",
    "sample_coin_score_difference",
    "score_difference",
    "tie_aware_utility",
    "tie_mass",
    "tie_probability",
    "win_probability",
]
