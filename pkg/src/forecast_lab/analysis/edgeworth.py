"""Two-term Edgeworth expansion, approximate affineness and the gamma bounds built on it."""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import asdict, dataclass

import numpy as np
import structlog
from scipy import optimize, stats

from forecast_lab.analysis.distributions import ScoreDiffDistribution
from forecast_lab.data.beliefs import EventBelief
from forecast_lab.exceptions import ConditionNotMetError, PropertyViolation, ScenarioError, VacuousBoundError

logger = structlog.get_logger(__name__)

MAX_HERMITE_DEGREE = 7
RATIO_CAP = 0.33
MIN_SIGMA = 4.0
DENSE_GRID_POINTS = 100_001


def hermite(l: int, x):
    """Probabilists' Hermite polynomial He_l via He_{l+1} = x He_l - l He_{l-1}."""
    if not 0 <= l <= MAX_HERMITE_DEGREE:
        raise ScenarioError(f"Hermite degree {l} outside 0..{MAX_HERMITE_DEGREE}")
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), x.copy()
    if l == 0:
        return prev if prev.ndim else float(prev)
    for k in range(1, l):
        prev, cur = cur, x * cur - k * prev
    return cur if cur.ndim else float(cur)


@dataclass(frozen=True)
class EdgeworthParams:
    """Cumulants of a score-difference sum; C_l = kappa_l / sigma^2."""

    mu: float
    sigma: float
    kappa3: float = 0.0
    kappa4: float = 0.0
    D: float = 1.0
    m: int = 1

    def __post_init__(self):
        if not self.sigma > 0:
            raise ScenarioError(f"sigma must be positive, got {self.sigma}")

    @classmethod
    def from_distribution(cls, dist: ScoreDiffDistribution, D: float = 1.0, m: int | None = None) -> EdgeworthParams:
        return cls(dist.mean, dist.std, dist.kappa3, dist.kappa4, D, m if m is not None else dist.n_terms)

    @classmethod
    def from_stats(cls, loo, D: float = 1.0, m: int = 1) -> EdgeworthParams:
        return cls(loo.mu, loo.sigma, loo.kappa3, loo.kappa4, D, m)

    @property
    def C3(self) -> float:
        return self.kappa3 / self.sigma**2

    @property
    def C4(self) -> float:
        return self.kappa4 / self.sigma**2

    @property
    def skew(self) -> float:
        return self.kappa3 / self.sigma**3

    @property
    def excess_kurtosis(self) -> float:
        return self.kappa4 / self.sigma**4


def edgeworth_cdf(params: EdgeworthParams, x, q2_sign: float = 1.0):
    """E(x) = Phi(z) + Q1(z)/sqrt(m) + Q2(z)/m with z = (x - mu)/sigma.

    q2_sign=+1 keeps the second-order term positive; q2_sign=-1 is the
    usual textbook sign. The result is not clipped to [0, 1].
    """
    z = (np.asarray(x, dtype=float) - params.mu) / params.sigma
    phi = stats.norm.pdf(z)
    s3, s4 = params.skew, params.excess_kurtosis
    q1 = -phi * s3 * hermite(2, z) / 6.0
    q2 = phi * (s3**2 * hermite(5, z) / 72.0 + s4 * hermite(3, z) / 24.0)
    out = stats.norm.cdf(z) + q1 + q2_sign * q2
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class AffineFit:
    beta: float
    alpha: float
    epsilon: float
    sup_error: float
    argmax_z: float

    def __post_init__(self):
        if self.epsilon < 0 or not math.isfinite(self.beta):
            raise ScenarioError("AffineFit needs epsilon >= 0 and a finite beta")

    def to_dict(self) -> dict:
        return asdict(self)


def affine_slope(params: EdgeworthParams, q2_sign: float = 1.0) -> float:
    """Slope E'(0) of the expansion at the given q2_sign.

    (1/sigma) phi(u)(1 + C3/(6 sigma) He3(u) - q2_sign (C3^2/(72 sigma^2) He6(u) + C4/(24 sigma^2) He4(u)))
    with u = -mu/sigma. With q2_sign=-1 every sign is positive, which is the
    slope as usually printed; it is the derivative of the textbook expansion.
    """
    u = -params.mu / params.sigma
    s = params.sigma
    bracket = (
        1.0
        + params.C3 / (6 * s) * hermite(3, u)
        - q2_sign * (params.C3**2 / (72 * s**2) * hermite(6, u) + params.C4 / (24 * s**2) * hermite(4, u))
    )
    return float(stats.norm.pdf(u) / s * bracket)


def finite_difference_slope(params: EdgeworthParams, h: float = 1e-5, q2_sign: float = 1.0) -> float:
    """Centered difference (E(h) - E(-h)) / 2h."""
    return (edgeworth_cdf(params, h, q2_sign) - edgeworth_cdf(params, -h, q2_sign)) / (2 * h)


def curvature_bound(params: EdgeworthParams, z, q2_sign: float = 1.0):
    """|E''(z)| at the given q2_sign.

    (1/sigma^3) phi(u) |(z - mu) + C3/6 He4(u) - q2_sign (C3^2/(72 sigma) He7(u) + C4/(24 sigma) He5(u))|
    """
    z = np.asarray(z, dtype=float)
    s = params.sigma
    u = (z - params.mu) / s
    inner = (
        (z - params.mu)
        + params.C3 / 6 * hermite(4, u)
        - q2_sign * (params.C3**2 / (72 * s) * hermite(7, u) + params.C4 / (24 * s) * hermite(5, u))
    )
    return stats.norm.pdf(u) / s**3 * np.abs(inner)


def affine_fit(
    params: EdgeworthParams,
    grid_points: int = 2001,
    golden_tolerance: float = 1e-10,
    q2_sign: float = 1.0,
) -> AffineFit:
    """Slope, intercept and curvature-based error of the expansion on [-1, 1].

    epsilon maximizes curvature_bound over a grid, then refines the best
    interior point with a golden-section search. sup_error is the dense-grid
    sup of |E(x) - (beta x + alpha)|.
    """
    beta = affine_slope(params, q2_sign)
    alpha = edgeworth_cdf(params, 0.0, q2_sign)
    grid = np.linspace(-1.0, 1.0, grid_points)
    values = curvature_bound(params, grid, q2_sign)
    idx = int(np.argmax(values))
    epsilon, z_best = float(values[idx]), float(grid[idx])
    if 0 < idx < grid_points - 1:
        res = optimize.minimize_scalar(
            lambda z: -float(curvature_bound(params, z, q2_sign)),
            bracket=(grid[idx - 1], grid[idx], grid[idx + 1]),
            method="golden",
            tol=golden_tolerance,
        )
        if -1.0 <= res.x <= 1.0 and -res.fun > epsilon:
            epsilon, z_best = float(-res.fun), float(res.x)

    dense = np.linspace(-1.0, 1.0, DENSE_GRID_POINTS)
    sup_error = float(np.max(np.abs(edgeworth_cdf(params, dense, q2_sign) - (beta * dense + alpha))))
    return AffineFit(beta=beta, alpha=alpha, epsilon=epsilon, sup_error=sup_error, argmax_z=z_best)


def gamma_from_affine(fit: AffineFit) -> float:
    """gamma = sqrt(2 epsilon / beta)."""
    if fit.beta <= 0:
        raise VacuousBoundError(f"beta = {fit.beta} <= 0: the CDF is flat, no truthfulness bound")
    return math.sqrt(2.0 * fit.epsilon / fit.beta)


def lemma9_constants(C3: float, C4: float, sigma: float) -> tuple[float, float]:
    """(A, B) for the per-event bound."""
    A = 1 + 5 * abs(C3) + 6 * C3**2 / sigma + abs(C4) / sigma
    B = 3 * abs(C3) + 2 * C3**2 / sigma + 2 * abs(C4) / sigma
    return A, B


def gamma_leave_one_out(loo, D: float, m: int) -> float:
    """Smallest gamma with gamma^2/2 >= e^(mu^2/sigma^2)(sigma^-2(|mu| + A) + sigma D/m)/(1 - B/sigma).

    loo carries mu, sigma, kappa3 and kappa4 of the sum over the other events.
    """
    sigma = loo.sigma
    if not sigma > 0:
        raise ConditionNotMetError("Leave-one-out sum has zero variance")
    C3, C4 = loo.kappa3 / sigma**2, loo.kappa4 / sigma**2
    A, B = lemma9_constants(C3, C4, sigma)
    denominator = 1.0 - B / sigma
    if denominator <= 0:
        raise ConditionNotMetError(f"sigma_it = {sigma:.4g} does not exceed B_it = {B:.4g}")
    rhs = math.exp(loo.mu**2 / sigma**2) * (sigma**-2 * (abs(loo.mu) + A) + sigma * D / m) / denominator
    return math.sqrt(2.0 * rhs)


def theorem2_constant(C3: float, C4: float) -> float:
    """C = 4 + 5 sqrt|C3| + 3|C3| + sqrt|C4|."""
    return 4 + 5 * math.sqrt(abs(C3)) + 3 * abs(C3) + math.sqrt(abs(C4))


def gamma_theorem2(sigma: float, C3: float, C4: float, D: float) -> float:
    """8(2C + 3D) / (sqrt(sigma) - 2C); vacuous unless sqrt(sigma) > 2C."""
    C = theorem2_constant(C3, C4)
    root = math.sqrt(sigma)
    if root <= 2 * C:
        raise VacuousBoundError(f"sqrt(sigma) = {root:.4g} <= 2C = {2 * C:.4g}")
    return 8 * (2 * C + 3 * D) / (root - 2 * C)


@dataclass
class Condition3Result:
    holds: bool
    sigma_margin: float
    truthful_margin: float
    max_margin: float
    ratio_margin: float
    delta_hat: float
    failed: list[str]

    def to_dict(self) -> dict:
        return asdict(self)


def condition3_check(
    sigma: float,
    delta: float,
    P: float,
    utility_truthful: float,
    utility_max: float,
) -> Condition3Result:
    """sigma >= 4; U(p) >= 1/2 - delta and max U <= 1/2 + delta; P/sigma^3 + delta <= 0.33."""
    delta_hat = delta + P / sigma**3 if sigma > 0 else math.inf
    margins = {
        "sigma": sigma - MIN_SIGMA,
        "truthful": utility_truthful - (0.5 - delta),
        "max": (0.5 + delta) - utility_max,
        "ratio": RATIO_CAP - delta_hat,
    }
    failed = [name for name, margin in margins.items() if margin < 0]
    return Condition3Result(
        holds=not failed,
        sigma_margin=margins["sigma"],
        truthful_margin=margins["truthful"],
        max_margin=margins["max"],
        ratio_margin=margins["ratio"],
        delta_hat=delta_hat,
        failed=failed,
    )


def bounded_ratio_bound(delta_hat: float) -> float:
    """sqrt(pi/8) log((1/2 + d) / (1/2 - d)), a bound on |mu|/sigma at a best response."""
    if not 0 <= delta_hat < 0.5:
        raise ScenarioError(f"delta_hat must lie in [0, 1/2), got {delta_hat}")
    return math.sqrt(math.pi / 8) * math.log((0.5 + delta_hat) / (0.5 - delta_hat))


@dataclass
class BerryEsseenGap:
    gap: float
    bound: float
    utility: float
    normal_utility: float

    def to_dict(self) -> dict:
        return asdict(self)


def berry_esseen_gap(dist: ScoreDiffDistribution, utility: float, check: bool = True) -> BerryEsseenGap:
    """|U - Phi(-mu/sigma)| against P/sigma^3 (constant 1).

    utility is the tie-aware win probability computed from the same dist.
    """
    sigma = dist.std
    if not sigma > 0:
        raise ConditionNotMetError("Score difference is degenerate (sigma = 0)")
    normal = float(stats.norm.cdf(-dist.mean / sigma))
    result = BerryEsseenGap(
        gap=abs(utility - normal),
        bound=dist.abs_third / sigma**3,
        utility=utility,
        normal_utility=normal,
    )
    if check and result.gap > result.bound:
        raise PropertyViolation("Berry-Esseen inequality violated", result.to_dict())
    return result


# ---------------------------------------------------------------------------
# Approximate affineness contract
# ---------------------------------------------------------------------------


def expected_G(G: Callable, r: float, event: EventBelief) -> float:
    """E[G(-(S(R, Y) - S(r, Y)))] under the event's joint."""
    y = event.outcomes.astype(float)
    delta = (1.0 - (event.reports - y) ** 2) - (1.0 - (r - y) ** 2)
    return float(np.dot(event.weights, G(-delta)))


@dataclass
class Lemma5Result:
    gamma: float
    belief: float
    best_report: float
    violations: list[float]

    @property
    def holds(self) -> bool:
        return not self.violations


def lemma5_check(
    G: Callable,
    event: EventBelief,
    beta: float,
    epsilon: float,
    grid_step: float = 1e-3,
) -> Lemma5Result:
    """Every report farther than sqrt(2 epsilon / beta) from the belief must do strictly worse.

    G is any (beta, alpha, epsilon)-approximately affine function on [-1, 1].
    """
    if beta <= 0:
        raise VacuousBoundError(f"beta = {beta} <= 0")
    gamma = math.sqrt(2.0 * epsilon / beta)
    belief = event.outcome_probability
    steps = int(round(1.0 / grid_step))
    grid = np.arange(steps + 1) / steps
    utilities = np.array([expected_G(G, r, event) for r in grid])
    at_belief = expected_G(G, belief, event)
    far = np.abs(grid - belief) > gamma
    violations = [float(r) for r in grid[far & (utilities >= at_belief)]]
    best = float(grid[int(np.flatnonzero(utilities >= utilities.max() - 1e-15)[0])])
    return Lemma5Result(gamma=gamma, belief=belief, best_report=best, violations=violations)


# ---------------------------------------------------------------------------
# Empirical comparisons
# ---------------------------------------------------------------------------


def step_sup_distance(values: np.ndarray, cumulative: np.ndarray, cdf: Callable) -> float:
    """sup_x |F(x) - cdf(x)| for a step CDF with jumps at sorted values.

    Both one-sided limits are checked at every jump.
    """
    target = np.asarray(cdf(values), dtype=float)
    left = np.concatenate([[0.0], cumulative[:-1]])
    return float(max(np.max(np.abs(cumulative - target)), np.max(np.abs(left - target))))


def empirical_sup_distance(samples: np.ndarray, cdf: Callable) -> float:
    values, counts = np.unique(np.asarray(samples, dtype=float), return_counts=True)
    return step_sup_distance(values, np.cumsum(counts) / counts.sum(), cdf)


def empirical_d_hat(rest: ScoreDiffDistribution, params: EdgeworthParams, q2_sign: float = 1.0) -> tuple[float, float]:
    """(m * ||G - E||_inf, ||G - E||_inf) for an exact leave-one-out law G."""
    sup = step_sup_distance(rest.values, rest.cumulative, lambda x: edgeworth_cdf(params, x, q2_sign))
    return params.m * sup, sup
