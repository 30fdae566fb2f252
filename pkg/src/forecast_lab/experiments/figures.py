"""Plot data for the score-distribution and m = 2 equilibrium figures."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import structlog

from forecast_lab.analysis.distributions import ScoreDiffDistribution, convolve
from forecast_lab.analysis.equilibrium import average_report, classify_average_report, m2_equilibrium
from forecast_lab.analysis.hedging import p_star
from forecast_lab.analysis.utility import exact_shares
from forecast_lab.config.settings import ConvolutionSettings, MechanismSettings
from forecast_lab.data.beliefs import CoinScenario
from forecast_lab.data.strategies import MixedStrategy, StrategyProfile, symmetrize_arrays
from forecast_lab.exceptions import ScenarioError

logger = structlog.get_logger(__name__)

INFORMED_VARIANTS = ("informed_truthful", "informed_hedged")
UNINFORMED_VARIANTS = ("uninformed_truthful", "uninformed_extremized")


def default_figure1_strategies(scenario: CoinScenario) -> dict[str, MixedStrategy]:
    """Canonical-frame defaults: truthful p vs hedged p*, and 1/2 vs a uniformly random vertex."""
    m, p = scenario.m, float(scenario.p)
    vertices = [tuple(float(b) for b in bits) for bits in itertools.product((0, 1), repeat=m)]
    return {
        "informed_truthful": MixedStrategy.pure([p] * m),
        "informed_hedged": MixedStrategy.pure([p_star(p)] * m),
        "uninformed_truthful": MixedStrategy.pure([0.5] * m),
        "uninformed_extremized": MixedStrategy.uniform(vertices),
    }


def total_score_distribution(
    reports: np.ndarray,
    weights: np.ndarray,
    theta: np.ndarray,
    convolution: ConvolutionSettings | None = None,
) -> ScoreDiffDistribution:
    """Law of sum_t S(r_t, Y_t) with Y_t ~ Bernoulli(theta_t), mixed over the support."""
    convolution = convolution or ConvolutionSettings()
    values, masses = [], []
    for r, w in zip(reports, weights):
        terms = [
            ScoreDiffDistribution.from_atoms([1.0 - (rt - 1.0) ** 2, 1.0 - rt**2], [th, 1.0 - th])
            for rt, th in zip(r, theta)
        ]
        dist = convolve(
            terms,
            resolution=convolution.resolution,
            atom_cap=convolution.atom_cap,
            merge_decimals=convolution.merge_decimals,
        )
        values.append(dist.values)
        masses.append(w * dist.weights)
    return ScoreDiffDistribution.from_atoms(np.concatenate(values), np.concatenate(masses))


def histogram_frame(dists: dict[str, ScoreDiffDistribution], bins: int) -> pd.DataFrame:
    """Rows (strategy, bin_left, bin_right, mass) on shared edges."""
    lo = min(float(d.values.min()) for d in dists.values())
    hi = max(float(d.values.max()) for d in dists.values())
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    rows = []
    for name, dist in dists.items():
        mass, _ = np.histogram(dist.values, bins=edges, weights=dist.weights)
        rows.extend(
            {"strategy": name, "bin_left": float(a), "bin_right": float(b), "mass": float(w)}
            for a, b, w in zip(edges[:-1], edges[1:], mass)
        )
    return pd.DataFrame(rows, columns=["strategy", "bin_left", "bin_right", "mass"])


@dataclass
class Figure1Data:
    histogram: pd.DataFrame
    means: dict[str, float]
    variances: dict[str, float]
    win_shares: dict[str, list[float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "means": self.means,
            "variances": self.variances,
            "win_shares": self.win_shares,
            "histogram": self.histogram.to_dict(orient="records"),
        }


def figure1_data(
    scenario: CoinScenario,
    strategies: dict[str, MixedStrategy] | None = None,
    bins: int = 40,
    mechanism: MechanismSettings | None = None,
    convolution: ConvolutionSettings | None = None,
) -> Figure1Data:
    """Total-score laws of the four strategies and the pairwise informed-vs-uninformed shares.

    Missing strategies take the defaults; uninformed strategies are
    reflection-averaged as in every coin-world computation.
    """
    if scenario.n != 2:
        raise ScenarioError("The score-distribution figure is a two-forecaster comparison")
    chosen = default_figure1_strategies(scenario)
    chosen.update(strategies or {})
    informed_index = scenario.informed_index
    theta = scenario.canonical_theta

    dists, means, variances = {}, {}, {}
    for name, strategy in chosen.items():
        reports, weights = strategy.as_arrays()
        if name not in INFORMED_VARIANTS:
            reports, weights = symmetrize_arrays(reports, weights)
        dist = total_score_distribution(reports, weights, theta, convolution)
        dists[name] = dist
        means[name] = dist.mean
        variances[name] = dist.variance

    shares = {}
    for inf, uninf in itertools.product(INFORMED_VARIANTS, UNINFORMED_VARIANTS):
        profile = _pair(chosen[inf], chosen[uninf], informed_index)
        u = exact_shares(profile, scenario, mechanism)
        shares[f"{inf}_vs_{uninf}"] = [float(u[informed_index]), float(u[1 - informed_index])]

    logger.info("figure1_computed", m=scenario.m, p=float(scenario.p), variances=variances)
    return Figure1Data(histogram=histogram_frame(dists, bins), means=means, variances=variances, win_shares=shares)


def _pair(informed: MixedStrategy, uninformed: MixedStrategy, informed_index: int) -> StrategyProfile:
    pair = [uninformed, uninformed]
    pair[informed_index] = informed
    return StrategyProfile(tuple(pair))


def figure2_data(p: float) -> dict:
    """Supports, weights and average reports of the m = 2 equilibrium at bias p."""
    profile = m2_equilibrium(p)
    players = []
    for role, strategy in zip(("informed", "uninformed"), profile.strategies):
        players.append(
            {
                "role": role,
                "support": [[float(v) for v in r] for r in strategy.reports],
                "weights": [float(w) for w in strategy.weights],
                "average": [float(v) for v in average_report(strategy)],
            }
        )
    return {
        "p": float(p),
        "belief": [float(p), float(p)],
        "players": players,
        "classification": classify_average_report(p),
    }


def figure2_frame(data: dict) -> pd.DataFrame:
    rows = [
        {"role": player["role"], "x": r[0], "y": r[1], "weight": w}
        for player in data["players"]
        for r, w in zip(player["support"], player["weights"])
    ]
    return pd.DataFrame(rows, columns=["role", "x", "y", "weight"])
