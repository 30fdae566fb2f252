"""Command implementations behind the forecast-lab CLI.

Each command takes a parsed scenario (or None), the run options and the
settings, writes one artifact plus its sidecar and returns the RunReport.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import structlog

from forecast_lab.analysis.distributions import ScoreDiffDistribution
from forecast_lab.analysis.edgeworth import (
    EdgeworthParams,
    affine_fit,
    affine_slope,
    berry_esseen_gap,
    bounded_ratio_bound,
    empirical_d_hat,
    finite_difference_slope,
    gamma_from_affine,
)
from forecast_lab.analysis.equilibrium import (
    classify_average_report,
    hedging_threshold,
    m1_n2_equilibrium,
    m2_average_coordinate,
    m2_equilibrium,
    n_forecaster_formula_audit,
    verify_equilibrium,
)
from forecast_lab.analysis.hedging import (
    HedgingParams,
    dominance_check,
    feasible_triples,
    lemma1_margin,
    lemma2_margin,
    p_bound_frontier,
)
from forecast_lab.analysis.truthfulness import (
    bridging_bounds,
    certify_truthfulness,
    composed_affine_error,
    event_terms,
    leave_one_out_best_response,
    leave_one_out_from_terms,
)
from forecast_lab.analysis.utility import (
    coin_score_difference,
    exact_expected_utility,
    exact_shares,
    leave_one_out_distribution,
    mixed_score_difference,
    monte_carlo_utility,
    sample_coin_score_difference,
    score_difference,
    tie_mass,
    tie_probability,
    win_probability,
)
from forecast_lab.config.settings import Settings
from forecast_lab.data.beliefs import CoinScenario
from forecast_lab.data.schemas import ScenarioFile, ScenarioKind
from forecast_lab.data.strategies import MixedStrategy, StrategyProfile
from forecast_lab.data.templates import get_template
from forecast_lab.data.validation import OutputValidator, validate_profile
from forecast_lab.exceptions import EnumerationCapError, PropertyViolation, ScenarioError, VacuousBoundError
from forecast_lab.experiments.figures import (
    INFORMED_VARIANTS,
    UNINFORMED_VARIANTS,
    figure1_data,
    figure2_data,
    figure2_frame,
)
from forecast_lab.experiments.reporting import RunReport, emit
from forecast_lab.experiments.sweep import gamma_sweep, sigma_sweep, sweep_summary

logger = structlog.get_logger(__name__)


@dataclass
class RunOptions:
    seed: int | None = None
    trials: int | None = None
    workers: int = 1
    out: Path | None = None
    format: str | None = None
    p: float | None = None

    def echo(self) -> dict:
        return {
            "seed": self.seed,
            "trials": self.trials,
            "workers": self.workers,
            "out": str(self.out) if self.out else None,
            "format": self.format,
            "p": self.p,
        }


def _seed(scenario: ScenarioFile | None, options: RunOptions, required: bool = True) -> int | None:
    seed = options.seed if options.seed is not None else (scenario.seed if scenario else None)
    if seed is None and required:
        raise ScenarioError("This run is stochastic; pass --seed or set 'seed' in the scenario")
    return seed


def _trials(scenario: ScenarioFile | None, options: RunOptions, default: int) -> int:
    if options.trials is not None:
        return options.trials
    if scenario is not None and scenario.trials is not None:
        return scenario.trials
    return default


def _target(command: str, scenario: ScenarioFile | None, options: RunOptions, settings: Settings, default_fmt: str):
    fmt = options.format or (str(scenario.format) if scenario and scenario.format else default_fmt)
    if options.out is not None:
        out = Path(options.out)
    elif scenario is not None and scenario.output:
        out = Path(scenario.output)
    else:
        out = Path(settings.output.output_dir) / f"{command}.{fmt}"
    return out, fmt


def _require(scenario: ScenarioFile | None, kind: ScenarioKind, command: str) -> ScenarioFile:
    if scenario is None or scenario.kind != kind:
        raise ScenarioError(f"{command} needs a {kind} scenario (--scenario)")
    return scenario


def _cdf_frame(dist: ScoreDiffDistribution) -> pd.DataFrame:
    return pd.DataFrame({"value": dist.values, "mass": dist.weights, "cdf": np.clip(dist.cumulative, 0.0, 1.0)})


def _validated(df: pd.DataFrame, what: str, **kwargs) -> pd.DataFrame:
    OutputValidator().validate_frame(df, **kwargs).raise_for_failures(what)
    return df


# ---------------------------------------------------------------------------
# mechanism-eval
# ---------------------------------------------------------------------------


def cmd_mechanism_eval(scenario: ScenarioFile | None, options: RunOptions, settings: Settings) -> RunReport:
    """Utilities per player, tie probability and the score-difference CDF."""
    if scenario is None:
        raise ScenarioError("mechanism-eval needs --scenario")
    report = RunReport("mechanism-eval", options.echo(), _seed(scenario, options, required=False))
    out, fmt = _target("mechanism-eval", scenario, options, settings, "csv")
    if scenario.kind == ScenarioKind.COIN:
        results, dist = _eval_coin(scenario, options, settings)
    else:
        results, dist = _eval_belief(scenario, options, settings)
    report.seed = results.get("seed", report.seed)
    report.results = results
    table = _validated(
        _cdf_frame(dist), "score-difference CDF", probability_columns=["mass", "cdf"], weight_column="mass"
    )
    payload = {**results, "cdf": table.to_dict(orient="records")}
    return emit(report, out, fmt, table, payload, settings.output.float_format)


def _eval_coin(scenario: ScenarioFile, options: RunOptions, settings: Settings):
    world = scenario.coin.to_scenario()
    profile = scenario.profile()
    if profile is None:
        raise ScenarioError("A coin mechanism-eval needs 'strategies'")
    validate_profile(profile, world).raise_for_failures("strategy profile")
    player = world.informed_index
    try:
        utilities = [float(u) for u in exact_shares(profile, world, settings.mechanism)]
        ties = tie_probability(profile, world, settings.mechanism)
        dist = coin_score_difference(profile, world, player, settings.mechanism)
        return {"exact": True, "utilities": utilities, "tie_probability": ties, "player": player}, dist
    except EnumerationCapError as exc:
        logger.info("falling_back_to_monte_carlo", reason=str(exc))
    seed = _seed(scenario, options)
    trials = _trials(scenario, options, settings.monte_carlo.default_trials)
    estimates = [
        monte_carlo_utility(k, profile, world, trials, seed, options.workers, settings.monte_carlo, settings.mechanism)
        for k in range(world.n)
    ]
    dist = sample_coin_score_difference(profile, world, trials, seed, player, options.workers, settings.monte_carlo)
    results = {
        "exact": False,
        "utilities": [e.mean for e in estimates],
        "half_widths": [e.half_width for e in estimates],
        "tie_probability": dist.mass_near(0.0, settings.mechanism.float_tie_tolerance),
        "player": player,
        "trials": trials,
        "seed": seed,
    }
    return results, dist


def _eval_belief(scenario: ScenarioFile, options: RunOptions, settings: Settings):
    if scenario.belief is None:
        raise ScenarioError("A belief mechanism-eval needs a 'belief' section")
    belief = scenario.belief.to_belief()
    report = scenario.belief.own_report()
    strategy = scenario.profile()[0] if scenario.strategies else MixedStrategy.pure(report)
    if belief.m <= settings.mechanism.enumeration_cap_m:
        own = exact_expected_utility(0, strategy, belief, settings.mechanism, settings.convolution)
        results = {"exact": True, "utilities": [own, 1.0 - own]}
    else:
        seed = _seed(scenario, options)
        trials = _trials(scenario, options, settings.monte_carlo.default_trials)
        est = monte_carlo_utility(
            0, strategy, belief, trials, seed, options.workers, settings.monte_carlo, settings.mechanism
        )
        results = {"exact": False, "utilities": [est.mean, 1.0 - est.mean], "half_widths": [est.half_width] * 2}
        results.update(trials=trials, seed=seed)
    dist = mixed_score_difference(strategy, belief, settings.convolution)
    results["tie_probability"] = tie_mass(dist, settings.convolution)
    results["report"] = report
    results["support_size"] = len(strategy.weights)
    return results, dist


# ---------------------------------------------------------------------------
# equilibrium-verify
# ---------------------------------------------------------------------------


def cmd_equilibrium_verify(scenario: ScenarioFile | None, options: RunOptions, settings: Settings) -> RunReport:
    """Deviation grids and support indifference at the closed-form equilibria (or a given profile)."""
    report = RunReport("equilibrium-verify", options.echo(), None)
    out, fmt = _target("equilibrium-verify", scenario, options, settings, "json")
    eq = settings.equilibrium
    rows, checked = [], []

    def record(label: str, profile: StrategyProfile, world: CoinScenario, resolution: float, extra: dict):
        verdict = verify_equilibrium(
            profile,
            world,
            eq.model_copy(update={"grid_resolution": resolution}),
            workers=options.workers,
            mechanism=settings.mechanism,
        )
        expected = extra.get("expected")
        if expected is not None and max(abs(u - e) for u, e in zip(verdict.utilities, expected)) > 1e-9:
            raise PropertyViolation(f"{label}: utilities {verdict.utilities} differ from {expected}", extra)
        checked.append({"label": label, "m": world.m, "p": float(world.p), **verdict.to_dict(), **extra})
        for player in range(profile.n):
            rows.append(
                {
                    "label": label,
                    "m": world.m,
                    "p": float(world.p),
                    "player": player,
                    "utility": verdict.utilities[player],
                    "max_gain": verdict.max_gain[player],
                    "indifference_spread": verdict.indifference_spread[player],
                }
            )

    if scenario is not None and scenario.strategies is not None:
        world = _require(scenario, ScenarioKind.COIN, "equilibrium-verify").coin.to_scenario()
        record(scenario.name, scenario.profile(), world, eq.grid_resolution, {})
    else:
        wanted_m = {scenario.coin.m} if scenario is not None and scenario.coin is not None else {1, 2}
        custom = scenario.p_values if scenario is not None and scenario.p_values else None
        if 1 in wanted_m:
            for p in custom or eq.m1_p_values:
                expected = [0.75 - p / 2, 0.25 + p / 2]
                record(
                    f"m1_p{p}", m1_n2_equilibrium(p), CoinScenario(m=1, p=p), eq.m1_grid_resolution, {"expected": expected}
                )
        if 2 in wanted_m:
            for p in custom or eq.m2_p_values:
                extra = {
                    "average_coordinate": float(m2_average_coordinate(p)),
                    "classification": classify_average_report(p),
                }
                record(f"m2_p{p}", m2_equilibrium(p), CoinScenario(m=2, p=p), eq.m2_grid_resolution, extra)

    audits = [n_forecaster_formula_audit(p, n).to_dict() for n in eq.audit_n_values for p in eq.audit_p_values]
    report.results = {"equilibria": len(checked), "hedging_threshold": hedging_threshold()}
    payload = {"equilibria": checked, "formula_audit": audits, "hedging_threshold": hedging_threshold()}
    table = _validated(pd.DataFrame(rows), "equilibrium table", probability_columns=["utility"])
    return emit(report, out, fmt, table, payload, settings.output.float_format)


# ---------------------------------------------------------------------------
# hedging-verify
# ---------------------------------------------------------------------------


def cmd_hedging_verify(scenario: ScenarioFile | None, options: RunOptions, settings: Settings) -> RunReport:
    """Condition 1, both distance lemmas over a feasible scan, and the sampled dominance check."""
    seed = _seed(scenario, options)
    report = RunReport("hedging-verify", options.echo(), seed)
    out, fmt = _target("hedging-verify", scenario, options, settings, "json")
    hs = settings.hedging
    spec = scenario.hedging if scenario is not None else None
    if spec is not None:
        params, n, illustrative = HedgingParams(spec.m, spec.p, spec.epsilon), spec.n, spec.illustrative
    else:
        params, n, illustrative = HedgingParams(hs.m, hs.p, hs.epsilon), hs.n, False
    trials = _trials(scenario, options, hs.trials)

    scan = []
    for triple in feasible_triples():
        l1 = lemma1_margin(triple.m, triple.p, triple.epsilon)
        l2 = lemma2_margin(triple.m, triple.p, triple.epsilon)
        scan.append(
            {"m": triple.m, "p": triple.p, "epsilon": triple.epsilon, "lemma1": l1.margin, "lemma2": l2.margin,
             "increasing": l2.increasing}
        )
    dominance = dominance_check(
        params,
        n,
        trials,
        seed,
        options.workers,
        hs,
        illustrative,
        settings.monte_carlo.ci_z,
        settings.mechanism.float_tie_tolerance,
    )
    summary = dominance.to_dict()
    report.results = {
        "violations": dominance.violations,
        "strict_count": dominance.strict_count,
        "log10_gain_estimate": dominance.stratified.log10_estimate,
        "ci_excludes_zero": dominance.stratified.ci_excludes_zero,
        "lemma_scan_min": min(min(r["lemma1"], r["lemma2"]) for r in scan),
        "p_bound_frontier": p_bound_frontier(),
    }
    payload = {"dominance": summary, "lemma_scan": scan, "p_bound_frontier": report.results["p_bound_frontier"]}
    flat = {k: v for k, v in summary.items() if not isinstance(v, (dict, list)) and v is not None}
    return emit(report, out, fmt, pd.DataFrame([flat]), payload, settings.output.float_format)


# ---------------------------------------------------------------------------
# edgeworth-gamma
# ---------------------------------------------------------------------------


def cmd_edgeworth_gamma(scenario: ScenarioFile | None, options: RunOptions, settings: Settings) -> RunReport:
    """TruthfulnessCertificate for forecaster i's report, with the affine fit of event 0's leave-one-out law."""
    scenario = _require(scenario, ScenarioKind.BELIEF, "edgeworth-gamma")
    if scenario.belief is None:
        raise ScenarioError("edgeworth-gamma needs a 'belief' section")
    report = RunReport("edgeworth-gamma", options.echo(), None)
    out, fmt = _target("edgeworth-gamma", scenario, options, settings, "json")
    ew = settings.edgeworth.model_copy(
        update={k: v for k, v in {"D": scenario.D, "delta": scenario.delta}.items() if v is not None}
    )
    belief = scenario.belief.to_belief()
    r_i = scenario.belief.own_report()
    exact = belief.m <= settings.mechanism.enumeration_cap_m
    cert = certify_truthfulness(
        r_i,
        belief,
        ew,
        flags=scenario.flags.to_flags(),
        mechanism=settings.mechanism,
        convolution=settings.convolution,
        measure_d_hat=exact,
    )
    payload = cert.to_dict()

    if belief.m >= 2:
        loo = leave_one_out_from_terms(event_terms(r_i, belief), 0)
        if loo.sigma > 0:
            params = EdgeworthParams.from_stats(loo, ew.D, belief.m - 1)
            fit = affine_fit(params, ew.affine_grid_points, ew.golden_tolerance)
            payload["affine_fit_event0"] = fit.to_dict()
            fd, printed = finite_difference_slope(params), affine_slope(params, q2_sign=-1.0)
            payload["slope_check_event0"] = {
                "beta": fit.beta,
                "finite_difference": fd,
                "printed_slope": printed,
                "printed_slope_gap": abs(printed - fd),
            }
            try:
                payload["gamma_affine_event0"] = gamma_from_affine(fit)
            except VacuousBoundError as exc:
                payload["gamma_affine_event0"] = None
                payload["notes"].append(str(exc))
            if exact:
                rest = leave_one_out_distribution(r_i, belief, 0, settings.convolution)
                payload["q2_sign_comparison"] = {
                    "printed": empirical_d_hat(rest, params, q2_sign=1.0)[1],
                    "textbook": empirical_d_hat(rest, params, q2_sign=-1.0)[1],
                }
                measured, budget = composed_affine_error(rest, params, fit)
                payload["composed_affine_error_event0"] = {"measured": measured, "budget": budget}
                best, _, _ = leave_one_out_best_response(r_i, belief, 0, convolution=settings.convolution)
                payload["best_response_event0"] = {"report": float(r_i[0]), "best": best}
        bridge = bridging_bounds(r_i, belief)
        payload["bridging"] = {
            "sigma_ratio_min": bridge.sigma_ratio_min,
            "mean_ratio_max": bridge.mean_ratio_max,
            "holds": bridge.holds,
        }
    if exact:
        dist = score_difference(r_i, belief, settings.convolution)
        payload["berry_esseen"] = berry_esseen_gap(dist, win_probability(dist, settings.convolution)).to_dict()
    if cert.delta_hat < 0.5:
        payload["bounded_ratio"] = bounded_ratio_bound(cert.delta_hat)
        payload["mean_over_sigma"] = abs(cert.mu_i) / cert.sigma_i

    report.results = {
        "gamma_theorem2": cert.gamma_theorem2,
        "gamma_per_event_max": max((g for g in cert.gamma_per_event if g is not None), default=None),
        "delta_hat": cert.delta_hat,
        "certified": cert.certified,
    }
    table = pd.DataFrame(
        {"event": range(len(cert.gamma_per_event)), "gamma": cert.gamma_per_event, "A_it": cert.A_it, "B_it": cert.B_it}
    )
    return emit(report, out, fmt, table, payload, settings.output.float_format)


# ---------------------------------------------------------------------------
# figures and sweeps
# ---------------------------------------------------------------------------


def cmd_figure1(scenario: ScenarioFile | None, options: RunOptions, settings: Settings) -> RunReport:
    scenario = _require(scenario, ScenarioKind.COIN, "figure1")
    report = RunReport("figure1", options.echo(), None)
    out, fmt = _target("figure1", scenario, options, settings, "csv")
    overrides = {}
    if scenario.figure1 is not None:
        overrides = {
            name: spec.to_strategy()
            for name in (*INFORMED_VARIANTS, *UNINFORMED_VARIANTS)
            if (spec := getattr(scenario.figure1, name)) is not None
        }
    data = figure1_data(
        scenario.coin.to_scenario(), overrides, settings.output.histogram_bins, settings.mechanism, settings.convolution
    )
    table = _validated(
        data.histogram, "histogram", probability_columns=["mass"], weight_column="mass", group_by="strategy"
    )
    report.results = {"variances": data.variances, "win_shares": data.win_shares}
    return emit(report, out, fmt, table, data.to_dict(), settings.output.float_format)


def cmd_figure2(scenario: ScenarioFile | None, options: RunOptions, settings: Settings) -> RunReport:
    p = options.p
    if p is None and scenario is not None:
        p = scenario.p_values[0] if scenario.p_values else (scenario.coin.p if scenario.coin else None)
    if p is None:
        raise ScenarioError("figure2 needs a bias: pass --p or give p_values/coin.p in the scenario")
    report = RunReport("figure2", options.echo(), None)
    out, fmt = _target("figure2", scenario, options, settings, "json")
    data = figure2_data(p)
    table = _validated(figure2_frame(data), "figure2 supports", probability_columns=["weight"], weight_column="weight",
                       group_by="role")
    report.results = {"p": float(p), "classification": data["classification"]}
    return emit(report, out, fmt, table, data, settings.output.float_format)


def cmd_gamma_sweep(scenario: ScenarioFile | None, options: RunOptions, settings: Settings) -> RunReport:
    report = RunReport("gamma-sweep", options.echo(), None)
    out, fmt = _target("gamma-sweep", scenario, options, settings, "csv")
    sw = settings.sweep
    spec = scenario.sweep if scenario is not None else None
    template = get_template(spec.template if spec else sw.template)
    m_values = spec.m_values if spec else sw.m_values
    ew = settings.edgeworth
    if scenario is not None:
        overrides = {"D": scenario.D, "delta": scenario.delta}
        ew = ew.model_copy(update={k: v for k, v in overrides.items() if v is not None})
    flags = scenario.flags.to_flags() if scenario is not None else None
    frame = gamma_sweep(template, m_values, ew, flags, settings.mechanism)
    sigmas = sigma_sweep(sw.sigma_values, D=ew.D)
    summary = sweep_summary(frame, sigmas)
    report.results = {"template": template.name, **summary}
    payload = {
        "template": template.name,
        "rows": frame.to_dict(orient="records"),
        "sigma_sweep": sigmas.to_dict(orient="records"),
        "summary": summary,
    }
    return emit(report, out, fmt, frame, payload, settings.output.float_format)


COMMANDS = {
    "mechanism-eval": cmd_mechanism_eval,
    "equilibrium-verify": cmd_equilibrium_verify,
    "hedging-verify": cmd_hedging_verify,
    "edgeworth-gamma": cmd_edgeworth_gamma,
    "figure1": cmd_figure1,
    "figure2": cmd_figure2,
    "gamma-sweep": cmd_gamma_sweep,
}

