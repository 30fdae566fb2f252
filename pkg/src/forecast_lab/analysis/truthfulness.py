"""Approximate-truthfulness certificates for a two-forecaster belief world."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field

import numpy as np
import structlog
from scipy import stats

from forecast_lab.analysis.distributions import ScoreDiffDistribution, score_diff_event
from forecast_lab.analysis.edgeworth import (
    AffineFit,
    Condition3Result,
    EdgeworthParams,
    condition3_check,
    empirical_d_hat,
    gamma_leave_one_out,
    gamma_theorem2,
    lemma9_constants,
)
from forecast_lab.analysis.utility import (
    LeaveOneOutStats,
    event_utility,
    leave_one_out_distribution,
    score_difference,
    win_probability,
)
from forecast_lab.config.settings import ConvolutionSettings, EdgeworthSettings, MechanismSettings
from forecast_lab.data.beliefs import BeliefModel, EventBelief, ScenarioFlags
from forecast_lab.exceptions import ConditionNotMetError, ScenarioError, VacuousBoundError

logger = structlog.get_logger(__name__)

CANDIDATE_STEPS = 20


@dataclass
class Condition2Result:
    min_event_variance: float
    uncertainty_holds: bool
    smoothness_declared: bool
    subsequence_lambda: float | None
    subsequence_m_star: int | None

    def to_dict(self) -> dict:
        return asdict(self)


def _term(cache: dict, r: float, event: EventBelief) -> ScoreDiffDistribution:
    key = (id(event), round(r, 12))
    if key not in cache:
        cache[key] = score_diff_event(r, event)
    return cache[key]


def event_terms(r_i: Sequence[float], belief: BeliefModel) -> list[ScoreDiffDistribution]:
    """Per-event score differences; iid beliefs reuse one computation per distinct (event, report)."""
    if len(r_i) != belief.m:
        raise ScenarioError(f"Report has {len(r_i)} entries, belief has m={belief.m}")
    cache: dict = {}
    return [_term(cache, float(r), ev) for r, ev in zip(r_i, belief.events)]


def condition2_check(
    r_i: Sequence[float],
    belief: BeliefModel,
    min_variance: float = 1e-6,
    flags: ScenarioFlags | None = None,
) -> Condition2Result:
    """Per-event variance bounded below; smoothness and subsequence clauses are carried as declared."""
    flags = flags or ScenarioFlags()
    smallest = min(t.variance for t in event_terms(r_i, belief))
    return Condition2Result(
        min_event_variance=float(smallest),
        uncertainty_holds=smallest >= min_variance,
        smoothness_declared=flags.smooth_density,
        subsequence_lambda=flags.subsequence_lambda,
        subsequence_m_star=flags.subsequence_m_star,
    )


def leave_one_out_from_terms(terms: Sequence[ScoreDiffDistribution], t: int) -> LeaveOneOutStats:
    """Cumulants of the sum without term t, by subtraction from the totals."""
    variance = sum(d.variance for d in terms) - terms[t].variance
    return LeaveOneOutStats(
        mu=sum(d.mean for d in terms) - terms[t].mean,
        sigma=float(np.sqrt(max(variance, 0.0))),
        kappa3=sum(d.kappa3 for d in terms) - terms[t].kappa3,
        kappa4=sum(d.kappa4 for d in terms) - terms[t].kappa4,
        abs_third=sum(d.abs_third for d in terms) - terms[t].abs_third,
    )


@dataclass
class BridgingBounds:
    sigma_ratio_min: float
    mean_ratio_max: float

    @property
    def holds(self) -> bool:
        return self.sigma_ratio_min >= 1 / math.sqrt(2) and self.mean_ratio_max <= 2.0


def bridging_bounds(r_i: Sequence[float], belief: BeliefModel) -> BridgingBounds:
    """min_t sigma_it / sigma_i and max_t |mu_it| / sigma_it at report r_i."""
    terms = event_terms(r_i, belief)
    sigma_i = math.sqrt(sum(d.variance for d in terms))
    if belief.m < 2 or sigma_i == 0:
        raise ConditionNotMetError("Bridging bounds need m >= 2 and a non-degenerate sum")
    ratios, means = [], []
    for t in range(belief.m):
        loo = leave_one_out_from_terms(terms, t)
        ratios.append(loo.sigma / sigma_i)
        means.append(abs(loo.mu) / loo.sigma if loo.sigma > 0 else math.inf)
    return BridgingBounds(sigma_ratio_min=min(ratios), mean_ratio_max=max(means))


def default_candidates(r_i: Sequence[float], steps: int = CANDIDATE_STEPS) -> list[list[float]]:
    """The report itself plus every single-event move onto a 1/steps grid."""
    grid = np.arange(steps + 1) / steps
    out = [list(map(float, r_i))]
    for t in range(len(r_i)):
        for value in grid:
            if abs(value - r_i[t]) > 1e-12:
                moved = list(map(float, r_i))
                moved[t] = float(value)
                out.append(moved)
    return out


def _normal_utility(terms: Sequence[ScoreDiffDistribution]) -> float:
    mu = sum(d.mean for d in terms)
    sigma = math.sqrt(sum(d.variance for d in terms))
    return float(stats.norm.cdf(-mu / sigma)) if sigma > 0 else float(mu < 0) + 0.5 * float(mu == 0)


def composed_affine_error(rest: ScoreDiffDistribution, params: EdgeworthParams, fit: AffineFit) -> tuple[float, float]:
    """(sup |G_it - affine| on [-1, 1], affine error of E plus ||G_it - E||_inf).

    The first never exceeds the second; both are measured, not assumed.
    """
    lo = np.searchsorted(rest.values, -1.0, side="left")
    hi = np.searchsorted(rest.values, 1.0, side="right")
    values, cumulative = rest.values[lo:hi], rest.cumulative[lo:hi]
    grid = np.linspace(-1.0, 1.0, 2001)
    step = np.concatenate([[0.0], rest.cumulative])[np.searchsorted(rest.values, grid, side="right")]
    measured = float(np.max(np.abs(step - (fit.beta * grid + fit.alpha))))
    if len(values):
        affine = fit.beta * values + fit.alpha
        left = np.concatenate([[rest.cumulative[lo - 1] if lo > 0 else 0.0], cumulative[:-1]])
        measured = max(measured, float(np.max(np.abs(cumulative - affine))), float(np.max(np.abs(left - affine))))
    _, gap = empirical_d_hat(rest, params)
    return measured, fit.sup_error + gap


@dataclass
class TruthfulnessCertificate:
    """Everything needed to audit an approximate-truthfulness claim for forecaster i."""

    m: int
    D: float
    delta: float
    sigma_i: float
    mu_i: float
    C3: float
    C4: float
    P_i: float
    delta_hat: float
    utility_truthful: float
    utility_max: float
    exact: bool
    gamma_theorem2: float | None
    gamma_per_event: list[float | None]
    A_it: list[float]
    B_it: list[float]
    condition2: Condition2Result
    condition3: Condition3Result
    D_hat_empirical: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def gamma(self) -> float | None:
        """The tightest finite bound on record."""
        bounds = [] if self.gamma_theorem2 is None else [self.gamma_theorem2]
        if self.gamma_per_event and None not in self.gamma_per_event:
            bounds.append(max(self.gamma_per_event))
        return min(bounds) if bounds else None

    @property
    def certified(self) -> bool:
        return self.condition3.holds and self.delta_hat <= 0.33 and self.gamma is not None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["condition3_margins"] = {
            "sigma": self.condition3.sigma_margin,
            "truthful": self.condition3.truthful_margin,
            "max": self.condition3.max_margin,
            "ratio": self.condition3.ratio_margin,
        }
        out["gamma"] = self.gamma
        out["certified"] = self.certified
        return out


def certify_truthfulness(
    r_i: Sequence[float],
    belief: BeliefModel,
    settings: EdgeworthSettings | None = None,
    candidates: Sequence[Sequence[float]] | None = None,
    flags: ScenarioFlags | None = None,
    exact: bool | None = None,
    mechanism: MechanismSettings | None = None,
    convolution: ConvolutionSettings | None = None,
    measure_d_hat: bool = False,
) -> TruthfulnessCertificate:
    """Assemble Conditions 2-3, the per-event bounds and the aggregate bound for report r_i.

    exact=None picks exact convolution when m is within the enumeration cap
    and normal approximations Phi(-mu/sigma) beyond it.
    """
    settings = settings or EdgeworthSettings()
    mechanism = mechanism or MechanismSettings()
    convolution = convolution or ConvolutionSettings()
    m = belief.m
    if exact is None:
        exact = m <= mechanism.enumeration_cap_m
    notes: list[str] = []

    terms = event_terms(r_i, belief)
    mu_i = sum(d.mean for d in terms)
    variance = sum(d.variance for d in terms)
    sigma_i = math.sqrt(variance)
    if sigma_i == 0:
        raise ConditionNotMetError("Score difference has zero variance; nothing to certify")
    kappa3 = sum(d.kappa3 for d in terms)
    kappa4 = sum(d.kappa4 for d in terms)
    P_i = sum(d.abs_third for d in terms)
    C3, C4 = kappa3 / variance, kappa4 / variance

    if exact:
        utility_truthful = win_probability(score_difference(r_i, belief, convolution), convolution)
        pool = default_candidates(r_i) if candidates is None else candidates
        utility_max = max(win_probability(score_difference(c, belief, convolution), convolution) for c in pool)
        utility_max = max(utility_max, utility_truthful)
    else:
        utility_truthful = _normal_utility(terms)
        if candidates is None:
            utility_max = utility_truthful
            notes.append("utility_max taken at the report itself (normal approximation, no candidates)")
        else:
            utility_max = max(_normal_utility(event_terms(c, belief)) for c in candidates)
            utility_max = max(utility_max, utility_truthful)

    condition2 = condition2_check(r_i, belief, settings.min_event_variance, flags)
    condition3 = condition3_check(sigma_i, settings.delta, P_i, utility_truthful, utility_max)

    try:
        gamma2 = gamma_theorem2(sigma_i, C3, C4, settings.D)
    except VacuousBoundError as exc:
        gamma2 = None
        notes.append(str(exc))

    per_event: list[float | None] = []
    A_it: list[float] = []
    B_it: list[float] = []
    seen: dict = {}
    for t in range(m if m >= 2 else 0):
        key = (id(belief.events[t]), round(float(r_i[t]), 12))
        if key in seen:
            gamma_t, a, b = seen[key]
        else:
            loo = leave_one_out_from_terms(terms, t)
            if loo.sigma > 0:
                a, b = lemma9_constants(loo.kappa3 / loo.sigma**2, loo.kappa4 / loo.sigma**2, loo.sigma)
                try:
                    gamma_t = gamma_leave_one_out(loo, settings.D, m)
                except ConditionNotMetError:
                    gamma_t = None
            else:
                a, b, gamma_t = math.nan, math.nan, None
            seen[key] = (gamma_t, a, b)
        per_event.append(gamma_t)
        A_it.append(a)
        B_it.append(b)

    d_hat = None
    if measure_d_hat and exact and m >= 2:
        d_hat = max(
            empirical_d_hat(
                leave_one_out_distribution(r_i, belief, t, convolution),
                EdgeworthParams.from_stats(leave_one_out_from_terms(terms, t), settings.D, m - 1),
            )[0]
            for t in range(m)
        )

    certificate = TruthfulnessCertificate(
        m=m,
        D=settings.D,
        delta=settings.delta,
        sigma_i=sigma_i,
        mu_i=mu_i,
        C3=C3,
        C4=C4,
        P_i=P_i,
        delta_hat=condition3.delta_hat,
        utility_truthful=utility_truthful,
        utility_max=utility_max,
        exact=exact,
        gamma_theorem2=gamma2,
        gamma_per_event=per_event,
        A_it=A_it,
        B_it=B_it,
        condition2=condition2,
        condition3=condition3,
        D_hat_empirical=d_hat,
        notes=notes,
    )
    logger.info(
        "truthfulness_certified",
        m=m,
        sigma=sigma_i,
        condition3=condition3.holds,
        gamma_theorem2=gamma2,
        certified=certificate.certified,
    )
    return certificate


def leave_one_out_best_response(
    r_i: Sequence[float],
    belief: BeliefModel,
    t: int,
    resolution: float = 1e-3,
    convolution: ConvolutionSettings | None = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Grid maximizer of event t's report with every other report held at r_i.

    Returns (best report, grid, utilities).
    """
    convolution = convolution or ConvolutionSettings()
    rest = leave_one_out_distribution(r_i, belief, t, convolution)
    steps = int(round(1.0 / resolution))
    grid = np.arange(steps + 1) / steps
    utilities = np.array([event_utility(r, r_i, belief, t, convolution, rest) for r in grid])
    best = float(grid[int(np.flatnonzero(utilities >= utilities.max() - 1e-15)[0])])
    return best, grid, utilities


__all__ = [
    "BridgingBounds",
    "Condition2Result",
    "TruthfulnessCertificate",
    "bridging_bounds",
    "certify_truthfulness",
    "composed_affine_error",
    "condition2_check",
    "default_candidates",
    "event_terms",
    "leave_one_out_best_response",
    "leave_one_out_from_terms",
]
