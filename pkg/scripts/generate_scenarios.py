"""Generate random small belief scenarios for the Condition 3 / bounded-ratio suite."""

import sys

import numpy as np

from forecast_lab.config.settings import PROJECT_ROOT
from forecast_lab.data.templates import random_belief
from forecast_lab.experiments.reporting import write_json


def main(count: int = 12, seed: int = 2024):
    rng = np.random.default_rng(seed)
    output_dir = PROJECT_ROOT / "scenarios" / "generated"

    for k in range(count):
        m = int(rng.integers(2, 7))
        belief, report = random_belief(m, rng)
        scenario = {
            "name": f"random_belief_{k:02d}",
            "kind": "belief",
            "belief": {
                "events": [
                    {
                        "rows": [
                            {"report": float(r), "outcome": int(y), "weight": float(w)}
                            for r, y, w in zip(event.reports, event.outcomes, event.weights)
                        ]
                    }
                    for event in belief.events
                ],
                "report": report,
            },
        }
        path = write_json(scenario, output_dir / f"random_belief_{k:02d}.json")
        print(f"Saved m={m} -> {path}")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:3]))
