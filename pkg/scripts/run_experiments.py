"""Run every lab command on the bundled scenarios."""

from forecast_lab.cli import run
from forecast_lab.config.settings import PROJECT_ROOT

SCENARIOS = PROJECT_ROOT / "scenarios"

RUNS = [
    ["mechanism-eval", "--scenario", str(SCENARIOS / "m1_equilibrium.json")],
    ["mechanism-eval", "--scenario", str(SCENARIOS / "belief_example.json")],
    ["mechanism-eval", "--scenario", str(SCENARIOS / "coin_monte_carlo.json")],
    ["equilibrium-verify"],
    ["hedging-verify", "--seed", "1", "--trials", "100000"],
    ["hedging-verify", "--scenario", str(SCENARIOS / "hedging_illustrative.json")],
    ["edgeworth-gamma", "--scenario", str(SCENARIOS / "peer_edgeworth.json")],
    ["figure1", "--scenario", str(SCENARIOS / "figure1.json")],
    ["figure2", "--scenario", str(SCENARIOS / "m2_equilibrium.json")],
    ["gamma-sweep", "--scenario", str(SCENARIOS / "gamma_sweep.json")],
]


def main():
    failures = 0
    for argv in RUNS:
        code = run([*argv, "--log-level", "WARNING"])
        print(f"{' '.join(argv[:1])}: exit {code}")
        failures += code != 0
    print(f"\n{len(RUNS) - failures}/{len(RUNS)} runs succeeded")


if __name__ == "__main__":
    main()
