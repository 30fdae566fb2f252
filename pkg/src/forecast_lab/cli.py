"""forecast-lab command-line entry point."""

from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence
from pathlib import Path

import structlog

from forecast_lab.config.settings import load_settings
from forecast_lab.data.ingestion import load_scenario
from forecast_lab.exceptions import LabError, PropertyViolation, ScenarioError
from forecast_lab.experiments.commands import COMMANDS, RunOptions
from forecast_lab.utils.logging import bind_run_context, clear_run_context, setup_logging

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PROPERTY = 3

HELP = {
    "mechanism-eval": "utilities, tie probability and the score-difference CDF of a scenario",
    "equilibrium-verify": "deviation grids and support indifference at the closed-form equilibria",
    "hedging-verify": "Condition 1, the distance lemmas and the sampled hedging-dominance check",
    "edgeworth-gamma": "approximate-truthfulness certificate for a belief scenario",
    "figure1": "total-score histograms of truthful, hedged and extremized strategies",
    "figure2": "supports and average reports of the m = 2 equilibrium",
    "gamma-sweep": "truthfulness bounds against the number of events",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forecast-lab", description="Simple Max forecasting-competition lab")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in HELP.items():
        cmd = sub.add_parser(name, help=text, description=text)
        cmd.add_argument("--scenario", type=Path, help="scenario file (JSON or YAML)")
        cmd.add_argument("--seed", type=int, help="root seed for stochastic runs")
        cmd.add_argument("--trials", type=int, help="Monte Carlo trials")
        cmd.add_argument("--workers", type=int, help="parallel workers (default: FORECAST_LAB_WORKERS or 1)")
        cmd.add_argument("--out", type=Path, help="artifact path; the sidecar is written next to it")
        cmd.add_argument("--format", choices=["csv", "json"])
        cmd.add_argument("--config-dir", type=Path, help="directory holding the YAML configs")
        cmd.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
        cmd.add_argument("--log-console", action="store_true", help="human-readable logs instead of JSON")
        if name == "figure2":
            cmd.add_argument("--p", type=float, help="coin bias in (1/3, 1/2)")
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    settings = load_settings(args.config_dir)
    setup_logging(args.log_level or settings.log_level, json_output=not args.log_console)

    if args.seed is not None and args.seed < 0:
        print("invalid input: --seed must be non-negative", file=sys.stderr)
        return EXIT_INPUT
    if any(v is not None and v < 1 for v in (args.trials, args.workers)):
        print("invalid input: --trials and --workers must be positive", file=sys.stderr)
        return EXIT_INPUT

    options = RunOptions(
        seed=args.seed,
        trials=args.trials,
        workers=args.workers or settings.workers,
        out=args.out,
        format=args.format,
        p=getattr(args, "p", None),
    )
    bind_run_context(args.command, args.seed)
    try:
        scenario = load_scenario(args.scenario) if args.scenario else None
        if scenario is not None and options.seed is None:
            bind_run_context(args.command, scenario.seed)
        report = COMMANDS[args.command](scenario, options, settings)
    except PropertyViolation as exc:
        logger.error("property_violation", error=str(exc), witness=exc.witness)
        print(f"property violated: {exc}", file=sys.stderr)
        return EXIT_PROPERTY
    except ScenarioError as exc:
        logger.error("invalid_scenario", error=str(exc), diagnostics=exc.diagnostics)
        print(f"invalid input: {exc}", file=sys.stderr)
        for diag in exc.diagnostics:
            print(f"  {diag}", file=sys.stderr)
        return EXIT_INPUT
    except LabError as exc:
        logger.error("refused", error=str(exc), kind=type(exc).__name__)
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_INPUT
    finally:
        clear_run_context()

    for output in report.outputs:
        print(output["path"])
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
