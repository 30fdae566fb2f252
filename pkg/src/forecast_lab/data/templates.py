"""Synthetic iid belief templates for sweeps and tests.

Every template is one per-event joint over (opponent report, outcome)
plus the report forecaster i submits on each event; belief(m) repeats
the event m times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from forecast_lab.data.beliefs import BeliefModel, EventBelief
from forecast_lab.exceptions import ScenarioError


@dataclass(frozen=True)
class BeliefTemplate:
    name: str
    event: EventBelief
    report: float
    description: str = ""

    def belief(self, m: int) -> BeliefModel:
        if m < 1:
            raise ScenarioError(f"m must be positive, got {m}")
        return BeliefModel.iid(self.event, m)

    def reports(self, m: int) -> list[float]:
        return [self.report] * m


def directional_event(accuracy: float, extreme: float = 0.9) -> EventBelief:
    """Fair coin; the opponent reports `extreme` on the side of the outcome with probability `accuracy`."""
    if not 0.0 <= accuracy <= 1.0:
        raise ScenarioError(f"accuracy must lie in [0, 1], got {accuracy}")
    low = 1.0 - extreme
    return EventBelief.from_rows(
        [
            (extreme, 1, 0.5 * accuracy),
            (low, 1, 0.5 * (1.0 - accuracy)),
            (low, 0, 0.5 * accuracy),
            (extreme, 0, 0.5 * (1.0 - accuracy)),
        ]
    )


def peer_template() -> BeliefTemplate:
    # accuracy 0.7 makes E[S(R) - S(1/2)] = 0.7 * 0.24 - 0.3 * 0.56 = 0
    return BeliefTemplate(
        name="peer",
        event=directional_event(0.7),
        report=0.5,
        description="Evenly matched opponent: zero-mean score difference, skewed atoms",
    )


def skill_gap_template(accuracy: float = 0.6) -> BeliefTemplate:
    return BeliefTemplate(
        name="skill_gap",
        event=directional_event(accuracy),
        report=0.5,
        description="Weaker opponent: forecaster i leads by a constant per event",
    )


def lattice_template() -> BeliefTemplate:
    return BeliefTemplate(
        name="lattice",
        event=EventBelief.independent(0.5, [0.4, 0.6]),
        report=0.4,
        description="Reports on the 1/10 grid; the score difference has an atom at zero",
    )


def symmetric_template() -> BeliefTemplate:
    return BeliefTemplate(
        name="symmetric",
        event=EventBelief.from_rows([(1.0, 1, 0.5), (1.0, 0, 0.5)]),
        report=0.0,
        description="Score difference is +1 or -1 with equal mass (kappa3 = 0)",
    )


TEMPLATES = {
    "peer": peer_template,
    "skill_gap": skill_gap_template,
    "lattice": lattice_template,
    "symmetric": symmetric_template,
}


def get_template(name: str) -> BeliefTemplate:
    try:
        return TEMPLATES[name]()
    except KeyError:
        raise ScenarioError(f"Unknown belief template {name!r}; choose from {sorted(TEMPLATES)}") from None


def random_belief(m: int, rng: np.random.Generator, support: int = 3) -> tuple[BeliefModel, list[float]]:
    """Random independent-event belief with opponent reports on a 1/20 grid; i reports truthfully."""
    events = []
    for _ in range(m):
        q = float(rng.uniform(0.1, 0.9))
        values = rng.choice(np.arange(21) / 20, size=support, replace=False)
        events.append(EventBelief.independent(q, values, rng.dirichlet(np.ones(support))))
    belief = BeliefModel(tuple(events))
    return belief, [event.outcome_probability for event in belief.events]
