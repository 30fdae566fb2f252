"""Hedging dominance in the p-biased coin world: Condition 1, distance algebra and sampled checks."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import structlog
from scipy import optimize, stats

from forecast_lab.config.settings import HedgingSettings
from forecast_lab.exceptions import ConditionNotMetError, PropertyViolation, ScenarioError
from forecast_lab.mechanism.scoring import FLOAT_TIE_TOLERANCE, batch_total_scores, share_of
from forecast_lab.utils.parallel import run_seeded_blocks

logger = structlog.get_logger(__name__)

MIN_EVENTS = 21
MIN_P_BOUND_EVENTS = 4
MAX_BALL_ATTEMPTS = 1000


def p_star(p: float) -> float:
    """Hedged target (1/2 + p) / 2."""
    return (0.5 + p) / 2


def p_bound(m: int | float) -> float:
    """Upper bound on p: 1/2 - 2 sqrt((2/sqrt m)(1 - 2/sqrt m)); undefined below m = 4."""
    if m < MIN_P_BOUND_EVENTS:
        raise ScenarioError(f"The p bound needs m >= {MIN_P_BOUND_EVENTS}, got {m}")
    x = 2.0 / math.sqrt(m)
    return 0.5 - 2.0 * math.sqrt(x * (1.0 - x))


def epsilon_bound(m: int | float, p: float) -> float:
    """Upper bound on epsilon: 1/2 - sqrt(p*(1 - p*)) - 2/sqrt m."""
    ps = p_star(p)
    return 0.5 - math.sqrt(ps * (1.0 - ps)) - 2.0 / math.sqrt(m)


@dataclass(frozen=True)
class HedgingParams:
    m: int
    p: float
    epsilon: float

    def __post_init__(self):
        if self.m < 1:
            raise ScenarioError(f"m must be >= 1, got {self.m}")
        if not 0 < self.p < 0.5:
            raise ScenarioError(f"p must lie in (0, 1/2), got {self.p}")
        if self.epsilon < 0:
            raise ScenarioError(f"epsilon must be non-negative, got {self.epsilon}")

    @property
    def p_star(self) -> float:
        return p_star(self.p)

    @property
    def r_star(self) -> np.ndarray:
        return np.full(self.m, self.p_star)

    @property
    def p_bound(self) -> float:
        return p_bound(self.m)

    @property
    def epsilon_bound(self) -> float:
        return epsilon_bound(self.m, self.p)


@dataclass
class Condition1Result:
    holds: bool
    m_margin: int
    p_margin: float
    epsilon_margin: float
    p_star_gap: float
    failed: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def condition1_check(m: int, p: float, epsilon: float) -> Condition1Result:
    """Evaluate the three inequalities of Condition 1 and report each margin.

    p_star_gap = p* - p - epsilon, positive whenever the condition holds.
    """
    failed = []
    m_margin = m - MIN_EVENTS
    if m_margin < 0:
        failed.append("m")
    p_margin = p_bound(m) - p if m >= MIN_P_BOUND_EVENTS else -math.inf
    if p_margin <= 0:
        failed.append("p")
    epsilon_margin = epsilon_bound(m, p) - epsilon
    if epsilon_margin <= 0:
        failed.append("epsilon")
    return Condition1Result(
        holds=not failed,
        m_margin=m_margin,
        p_margin=p_margin,
        epsilon_margin=epsilon_margin,
        p_star_gap=p_star(p) - p - epsilon,
        failed=failed,
    )


def p_bound_frontier() -> int:
    """Smallest integer m with a positive p-bound (root of (2/sqrt m)(1 - 2/sqrt m) = 1/16)."""
    root = optimize.brentq(p_bound, MIN_EVENTS, 1e6, xtol=1e-9)
    m = math.ceil(root)
    while p_bound(m) <= 0:
        m += 1
    while p_bound(m - 1) > 0:
        m -= 1
    return m


def feasible_triples(
    count: int = 20,
    m_values: tuple[int, ...] = (1000, 2000, 4000, 8000, 16000),
    p_fractions: tuple[float, ...] = (0.3, 0.7),
    epsilon_fractions: tuple[float, ...] = (0.4, 0.9),
) -> list[HedgingParams]:
    """Deterministic scan of the Condition 1 feasible region."""
    triples: list[HedgingParams] = []
    m_list = list(m_values)
    while len(triples) < count:
        for m in m_list:
            pb = p_bound(m)
            if pb <= 0:
                continue
            for pf in p_fractions:
                p = pf * pb
                eb = epsilon_bound(m, p)
                if eb <= 0:
                    continue
                for ef in epsilon_fractions:
                    triples.append(HedgingParams(m=m, p=p, epsilon=ef * eb))
                    if len(triples) == count:
                        return triples
        m_list = [2 * m_list[-1]]
    return triples


@dataclass(frozen=True)
class WeightClassDistances:
    """Squared distances from q-constant reports to outcomes of Hamming weight w."""

    w: np.ndarray
    d_star_sq: np.ndarray
    d_p_sq: np.ndarray

    @property
    def d_star(self) -> np.ndarray:
        return np.sqrt(self.d_star_sq)

    @property
    def d_p(self) -> np.ndarray:
        return np.sqrt(self.d_p_sq)


def weight_class_distances(m: int, p: float, w) -> WeightClassDistances:
    """d*^2 = m p*^2 + w(1 - 2p*), d_p^2 = m p^2 + w(1 - 2p)."""
    w = np.asarray(w, dtype=float)
    ps = p_star(p)
    return WeightClassDistances(
        w=w,
        d_star_sq=m * ps**2 + w * (1 - 2 * ps),
        d_p_sq=m * p**2 + w * (1 - 2 * p),
    )


@dataclass
class LemmaMargin:
    margin: float
    binding_weight: int
    weights: np.ndarray
    margins: np.ndarray
    increasing: bool = True

    def to_dict(self) -> dict:
        return {
            "margin": self.margin,
            "binding_weight": self.binding_weight,
            "increasing": self.increasing,
            "weights_checked": int(len(self.weights)),
        }


def _require_condition1(m: int, p: float, epsilon: float) -> Condition1Result:
    result = condition1_check(m, p, epsilon)
    if not result.holds:
        raise ConditionNotMetError(
            f"Condition 1 fails for m={m}, p={p}, epsilon={epsilon} (items: {', '.join(result.failed)})"
        )
    return result


def lemma1_margin(m: int, p: float, epsilon: float) -> LemmaMargin:
    """min over w <= floor(p* m) of sqrt(m)(1/2 - epsilon) - d*(w) - 2.

    sqrt(m)(1/2 - epsilon) lower-bounds the distance from any report in the
    epsilon sqrt(m) ball around c to a vertex, so a positive margin means r*
    beats every such opponent on these outcomes.
    """
    _require_condition1(m, p, epsilon)
    weights = np.arange(0, math.floor(p_star(p) * m) + 1)
    dist = weight_class_distances(m, p, weights)
    margins = math.sqrt(m) * (0.5 - epsilon) - dist.d_star - 2.0
    idx = int(np.argmin(margins))
    return LemmaMargin(margin=float(margins[idx]), binding_weight=int(weights[idx]), weights=weights, margins=margins)


def lemma2_margin(m: int, p: float, epsilon: float) -> LemmaMargin:
    """min over w >= ceil(p* m) of d_p(w) - epsilon sqrt(m) - d*(w) - 2.

    Also checks that f(w) = d_p(w) - d*(w) increases over the checked weights.
    """
    _require_condition1(m, p, epsilon)
    weights = np.arange(math.ceil(p_star(p) * m), m + 1)
    dist = weight_class_distances(m, p, weights)
    f = dist.d_p - dist.d_star
    margins = f - epsilon * math.sqrt(m) - 2.0
    increasing = bool(np.all(np.diff(f) > 0))
    idx = int(np.argmin(margins))
    return LemmaMargin(
        margin=float(margins[idx]),
        binding_weight=int(weights[idx]),
        weights=weights,
        margins=margins,
        increasing=increasing,
    )


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def sample_ball_reports(
    center: np.ndarray,
    radius: float,
    size: int,
    rng: np.random.Generator,
    max_attempts: int = MAX_BALL_ATTEMPTS,
) -> np.ndarray:
    """Uniform draws from {r in [0,1]^m : ||r - center||_2 <= radius sqrt(m)}.

    Gaussian direction times radius sqrt(m) U^(1/m); rows leaving the cube
    are redrawn.
    """
    center = np.asarray(center, dtype=float)
    if radius < 0:
        raise ScenarioError(f"radius must be non-negative, got {radius}")
    if ((center < 0) | (center > 1)).any():
        raise ScenarioError("Ball center must lie in the unit cube")
    m = center.shape[0]
    out = np.empty((size, m))
    if radius == 0:
        out[:] = center
        return out
    scale = radius * math.sqrt(m)
    pending = np.arange(size)
    for _ in range(max_attempts):
        k = len(pending)
        direction = rng.standard_normal((k, m))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        magnitude = scale * rng.random(k) ** (1.0 / m)
        draws = center + direction * magnitude[:, None]
        inside = ((draws >= 0) & (draws <= 1)).all(axis=1)
        out[pending[inside]] = draws[inside]
        pending = pending[~inside]
        if len(pending) == 0:
            return out
    raise ScenarioError(f"Ball sampling exceeded {max_attempts} attempts; intersection with the cube is too thin")


def sample_ball_report(center, radius: float, seed: int | np.random.Generator) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return sample_ball_reports(np.asarray(center, dtype=float), radius, 1, rng)[0]


def uniform_weight_class_outcomes(weights: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """One outcome per row, uniform among vectors with exactly weights[row] ones."""
    keys = rng.random((len(weights), m))
    ranks = np.argsort(np.argsort(keys, axis=1), axis=1)
    return (ranks < np.asarray(weights)[:, None]).astype(np.int8)


# ---------------------------------------------------------------------------
# Dominance
# ---------------------------------------------------------------------------


@dataclass
class _BlockResult:
    diffs: np.ndarray
    weights: np.ndarray
    violations: int
    strict: int
    witness: dict | None


def _compare_block(
    params: HedgingParams,
    n: int,
    y: np.ndarray,
    rng: np.random.Generator,
    start: int,
    tolerance: float = FLOAT_TIE_TOLERANCE,
) -> _BlockResult:
    size, m = y.shape
    truthful = sample_ball_reports(np.full(m, params.p), params.epsilon, size, rng)
    rivals = [sample_ball_reports(np.full(m, 0.5), params.epsilon, size, rng) for _ in range(n - 1)]
    hedged = np.broadcast_to(params.r_star, (size, m))
    scores = batch_total_scores(np.stack([truthful, hedged, *rivals], axis=1), y)
    rival_scores = scores[:, 2:]
    share_truthful = share_of(scores[:, 0], rival_scores, tolerance)
    share_hedged = share_of(scores[:, 1], rival_scores, tolerance)
    diffs = share_hedged - share_truthful
    bad = np.flatnonzero(diffs < -tolerance)
    witness = None
    if len(bad):
        row = int(bad[0])
        witness = {
            "sample": start + row,
            "outcome_weight": int(y[row].sum()),
            "share_truthful": float(share_truthful[row]),
            "share_hedged": float(share_hedged[row]),
            "score_truthful": float(scores[row, 0]),
            "score_hedged": float(scores[row, 1]),
            "best_rival_score": float(rival_scores[row].max()) if rival_scores.shape[1] else None,
        }
    return _BlockResult(
        diffs=diffs,
        weights=y.sum(axis=1),
        violations=len(bad),
        strict=int((diffs > tolerance).sum()),
        witness=witness,
    )


@dataclass
class StratifiedGain:
    """Utility gain of r* estimated per outcome weight class.

    The gain is sum_w Binom(w; m, p) * mean_w; values are carried in log
    space because the informative classes sit far in the binomial tail.
    """

    estimate: float
    log10_estimate: float
    ci_low: float
    ci_high: float
    ci_excludes_zero: bool
    samples: int
    strict_count: int
    positive_classes: int

    def to_dict(self) -> dict:
        return asdict(self)


def _stratified_gain(class_w: np.ndarray, diffs: np.ndarray, m: int, p: float, z: float, strict: int) -> StratifiedGain:
    classes = np.arange(m + 1)
    counts = np.bincount(class_w, minlength=m + 1)
    sums = np.bincount(class_w, weights=diffs, minlength=m + 1)
    sq = np.bincount(class_w, weights=diffs**2, minlength=m + 1)
    sampled = counts > 0
    means = np.where(sampled, sums / np.maximum(counts, 1), 0.0)
    var = np.where(counts > 1, (sq - counts * means**2) / np.maximum(counts - 1, 1), 0.0)
    var = np.clip(var, 0.0, None)

    logpmf = stats.binom.logpmf(classes, m, p)
    positive = means > 0
    scale = float(logpmf[positive].max()) if positive.any() else float(logpmf.max())
    w = np.exp(logpmf - scale)
    scaled = float(np.sum(w * means))
    scaled_se = float(np.sqrt(np.sum(np.where(sampled, w**2 * var / np.maximum(counts, 1), 0.0))))
    low, high = scaled - z * scaled_se, scaled + z * scaled_se

    if scaled > 0:
        log10_estimate = (math.log(scaled) + scale) / math.log(10)
    else:
        log10_estimate = float("-inf")
    factor = math.exp(scale)
    return StratifiedGain(
        estimate=scaled * factor,
        log10_estimate=log10_estimate,
        ci_low=low * factor,
        ci_high=high * factor,
        ci_excludes_zero=low > 0,
        samples=int(counts.sum()),
        strict_count=strict,
        positive_classes=int(positive.sum()),
    )


@dataclass
class DominanceReport:
    params: HedgingParams
    n: int
    trials: int
    seed: int
    illustrative: bool
    condition1: Condition1Result
    lemma1: LemmaMargin | None
    lemma2: LemmaMargin | None
    violations: int
    strict_count: int
    natural_strict_count: int
    dominance_frequency: float
    natural_gain: float
    natural_gain_ci: tuple[float, float]
    stratified: StratifiedGain
    witness: dict | None = None

    def to_dict(self) -> dict:
        return {
            "m": self.params.m,
            "p": self.params.p,
            "epsilon": self.params.epsilon,
            "p_star": self.params.p_star,
            "n": self.n,
            "trials": self.trials,
            "seed": self.seed,
            "illustrative": self.illustrative,
            "condition1": self.condition1.to_dict(),
            "lemma1_margin": self.lemma1.to_dict() if self.lemma1 else None,
            "lemma2_margin": self.lemma2.to_dict() if self.lemma2 else None,
            "violations": self.violations,
            "strict_count": self.strict_count,
            "natural_strict_count": self.natural_strict_count,
            "dominance_frequency": self.dominance_frequency,
            "gain_estimate": self.stratified.estimate,
            "log10_gain_estimate": self.stratified.log10_estimate,
            "ci": [self.stratified.ci_low, self.stratified.ci_high],
            "ci_excludes_zero": self.stratified.ci_excludes_zero,
            "natural_gain": self.natural_gain,
            "natural_gain_ci": list(self.natural_gain_ci),
            "witness": self.witness,
        }


def dominance_check(
    params: HedgingParams,
    n: int = 2,
    trials: int = 100_000,
    seed: int = 0,
    workers: int = 1,
    settings: HedgingSettings | None = None,
    illustrative: bool = False,
    ci_z: float = 1.96,
    tie_tolerance: float = FLOAT_TIE_TOLERANCE,
) -> DominanceReport:
    """Sampled check that hedging to r* weakly dominates every epsilon-truthful report.

    Natural samples draw y ~ Bernoulli(p)^m and assert per-outcome weak
    dominance. A second pass draws settings.samples_per_weight_class outcomes
    uniformly within each Hamming weight class to estimate the (tail) gain.
    With illustrative=True Condition 1 is not required and nothing is asserted.
    """
    settings = settings or HedgingSettings()
    if n < 2:
        raise ScenarioError("Dominance needs at least one opponent")
    condition = condition1_check(params.m, params.p, params.epsilon)
    lemma1 = lemma2 = None
    if not illustrative:
        if not condition.holds:
            raise ConditionNotMetError(
                f"Condition 1 fails for m={params.m}, p={params.p}, epsilon={params.epsilon} "
                f"(items: {', '.join(condition.failed)}); rerun with the illustrative override"
            )
        lemma1 = lemma1_margin(params.m, params.p, params.epsilon)
        lemma2 = lemma2_margin(params.m, params.p, params.epsilon)

    m = params.m

    def natural_block(start: int, size: int, rng: np.random.Generator) -> _BlockResult:
        y = (rng.random((size, m)) < params.p).astype(np.int8)
        return _compare_block(params, n, y, rng, start, tie_tolerance)

    spw = settings.samples_per_weight_class
    class_index = np.repeat(np.arange(m + 1), spw)

    def stratified_block(start: int, size: int, rng: np.random.Generator) -> _BlockResult:
        y = uniform_weight_class_outcomes(class_index[start : start + size], m, rng)
        return _compare_block(params, n, y, rng, trials + start, tie_tolerance)

    natural = run_seeded_blocks(natural_block, trials, settings.block_size, seed, workers, pass_offset=True)
    stratified = run_seeded_blocks(
        stratified_block, len(class_index), settings.block_size, (seed, 1), workers, pass_offset=True
    )

    violations = sum(b.violations for b in natural) + sum(b.violations for b in stratified)
    witness = next((b.witness for b in [*natural, *stratified] if b.witness is not None), None)
    natural_strict = sum(b.strict for b in natural)
    stratified_strict = sum(b.strict for b in stratified)

    diffs = np.concatenate([b.diffs for b in natural]) if natural else np.zeros(0)
    natural_gain = float(diffs.mean()) if len(diffs) else 0.0
    natural_hw = ci_z * float(diffs.std() / math.sqrt(len(diffs))) if len(diffs) else 0.0

    gain = _stratified_gain(
        np.concatenate([b.weights for b in stratified]).astype(int),
        np.concatenate([b.diffs for b in stratified]),
        m,
        params.p,
        ci_z,
        stratified_strict,
    )
    total = trials + len(class_index)
    report = DominanceReport(
        params=params,
        n=n,
        trials=trials,
        seed=seed,
        illustrative=illustrative,
        condition1=condition,
        lemma1=lemma1,
        lemma2=lemma2,
        violations=violations,
        strict_count=natural_strict + stratified_strict,
        natural_strict_count=natural_strict,
        dominance_frequency=1.0 - violations / total,
        natural_gain=natural_gain,
        natural_gain_ci=(natural_gain - natural_hw, natural_gain + natural_hw),
        stratified=gain,
        witness=witness,
    )
    logger.info(
        "dominance_checked",
        m=m,
        p=params.p,
        epsilon=params.epsilon,
        violations=violations,
        strict=report.strict_count,
        log10_gain=gain.log10_estimate,
        illustrative=illustrative,
    )
    if violations and not illustrative:
        raise PropertyViolation(f"Hedging failed to weakly dominate on {violations} sampled outcomes", witness)
    return report


def illustrative_params(settings: HedgingSettings | None = None) -> HedgingParams:
    settings = settings or HedgingSettings()
    return HedgingParams(m=settings.illustrative_m, p=settings.illustrative_p, epsilon=settings.illustrative_epsilon)
