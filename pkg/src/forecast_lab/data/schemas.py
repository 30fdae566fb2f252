"""Pydantic schemas for scenario files."""

from __future__ import annotations

import sys

if sys.version_info >= (3, 11):
    from enum import StrEnum
else:  # Python 3.10 fallback mirroring enum.StrEnum semantics
    from enum import Enum

    class StrEnum(str, Enum):
        def __str__(self) -> str:
            return str.__str__(self)

        def __format__(self, format_spec: str) -> str:
            return str.__format__(str(self), format_spec)

        @staticmethod
        def _generate_next_value_(name, start, count, last_values):  # noqa: ANN001, ANN205
            return name.lower()

from pydantic import BaseModel, ConfigDict, Field, model_validator

from forecast_lab.data.beliefs import BeliefModel, CoinScenario, EventBelief, ScenarioFlags
from forecast_lab.data.strategies import MixedStrategy, StrategyProfile
from forecast_lab.data.templates import get_template

WEIGHT_TOLERANCE = 1e-9


class ScenarioKind(StrEnum):
    COIN = "coin"
    BELIEF = "belief"


class OutputFormat(StrEnum):
    CSV = "csv"
    JSON = "json"


class SupportPoint(BaseModel):
    model_config = ConfigDict(extra="forbid")

    report: list[float] = Field(min_length=1)
    weight: float = Field(gt=0, le=1)

    @model_validator(mode="after")
    def _reports_in_range(self) -> SupportPoint:
        if any(not 0.0 <= r <= 1.0 for r in self.report):
            raise ValueError("reports must lie in [0, 1]")
        return self


class StrategySpec(BaseModel):
    """Either a pure report vector or a finite mixture."""

    model_config = ConfigDict(extra="forbid")

    pure: list[float] | None = None
    support: list[SupportPoint] | None = None

    @model_validator(mode="after")
    def _one_form(self) -> StrategySpec:
        if (self.pure is None) == (self.support is None):
            raise ValueError("give exactly one of 'pure' or 'support'")
        if self.pure is not None and any(not 0.0 <= r <= 1.0 for r in self.pure):
            raise ValueError("reports must lie in [0, 1]")
        if self.support is not None:
            total = sum(s.weight for s in self.support)
            if abs(total - 1.0) > WEIGHT_TOLERANCE:
                raise ValueError(f"support weights sum to {total}, not 1")
            if len({len(s.report) for s in self.support}) != 1:
                raise ValueError("support reports have different lengths")
        return self

    @property
    def m(self) -> int:
        return len(self.pure) if self.pure is not None else len(self.support[0].report)

    def to_strategy(self) -> MixedStrategy:
        if self.pure is not None:
            return MixedStrategy.pure(self.pure)
        return MixedStrategy([s.report for s in self.support], [s.weight for s in self.support])


class CoinSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    m: int = Field(ge=1)
    p: float = Field(gt=0, lt=0.5)
    n: int = Field(default=2, ge=2)
    informed_index: int = Field(default=0, ge=0)

    def to_scenario(self) -> CoinScenario:
        return CoinScenario(m=self.m, p=self.p, n=self.n, informed_index=self.informed_index)


class EventRow(BaseModel):
    model_config = ConfigDict(extra="forbid")

    report: float = Field(ge=0, le=1)
    outcome: int = Field(ge=0, le=1)
    weight: float = Field(ge=0, le=1)


class EventSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rows: list[EventRow] = Field(min_length=1)

    @model_validator(mode="after")
    def _weights_sum(self) -> EventSpec:
        total = sum(r.weight for r in self.rows)
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise ValueError(f"event weights sum to {total}, not 1")
        return self

    def to_event(self) -> EventBelief:
        total = sum(r.weight for r in self.rows)
        return EventBelief.from_rows([(r.report, r.outcome, r.weight / total) for r in self.rows])


class BeliefSpec(BaseModel):
    """Explicit per-event tables, or a named iid template repeated m times."""

    model_config = ConfigDict(extra="forbid")

    events: list[EventSpec] | None = None
    template: str | None = None
    m: int | None = Field(default=None, ge=1)
    report: list[float] | None = None

    @model_validator(mode="after")
    def _one_source(self) -> BeliefSpec:
        if (self.events is None) == (self.template is None):
            raise ValueError("give exactly one of 'events' or 'template'")
        if self.template is not None:
            if self.m is None:
                raise ValueError("a template needs 'm'")
            get_template(self.template)
        m = len(self.events) if self.events is not None else self.m
        if self.report is not None:
            if len(self.report) != m:
                raise ValueError(f"report has {len(self.report)} entries, belief has m={m}")
            if any(not 0.0 <= r <= 1.0 for r in self.report):
                raise ValueError("reports must lie in [0, 1]")
        return self

    def to_belief(self) -> BeliefModel:
        if self.template is not None:
            return get_template(self.template).belief(self.m)
        return BeliefModel(tuple(e.to_event() for e in self.events))

    def own_report(self) -> list[float]:
        """The scenario's report for forecaster i; template report or truthful marginals by default."""
        if self.report is not None:
            return list(self.report)
        if self.template is not None:
            return get_template(self.template).reports(self.m)
        return [e.to_event().outcome_probability for e in self.events]


class FlagsSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    smooth_density: bool = False
    subsequence_lambda: float | None = Field(default=None, gt=0, le=1)
    subsequence_m_star: int | None = Field(default=None, ge=1)

    def to_flags(self) -> ScenarioFlags:
        return ScenarioFlags(self.smooth_density, self.subsequence_lambda, self.subsequence_m_star)


class Figure1Spec(BaseModel):
    """Strategies compared in the score-distribution figure; missing ones take the coin defaults."""

    model_config = ConfigDict(extra="forbid")

    informed_truthful: StrategySpec | None = None
    informed_hedged: StrategySpec | None = None
    uninformed_truthful: StrategySpec | None = None
    uninformed_extremized: StrategySpec | None = None


class HedgingSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    m: int = Field(ge=1)
    p: float = Field(gt=0, lt=0.5)
    epsilon: float = Field(ge=0)
    n: int = Field(default=2, ge=2)
    illustrative: bool = False


class SweepSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    template: str = "symmetric"
    m_values: list[int] = Field(default=[1_000, 3_000, 10_000, 30_000, 100_000], min_length=1)

    @model_validator(mode="after")
    def _positive(self) -> SweepSpec:
        if any(m < 1 for m in self.m_values):
            raise ValueError("m values must be positive")
        get_template(self.template)
        return self


class ScenarioFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "scenario"
    kind: ScenarioKind
    seed: int | None = Field(default=None, ge=0)
    trials: int | None = Field(default=None, ge=1)
    output: str | None = None
    format: OutputFormat | None = None
    coin: CoinSpec | None = None
    belief: BeliefSpec | None = None
    strategies: list[StrategySpec] | None = None
    p_values: list[float] | None = None
    figure1: Figure1Spec | None = None
    hedging: HedgingSpec | None = None
    sweep: SweepSpec | None = None
    flags: FlagsSpec = Field(default_factory=FlagsSpec)
    D: float | None = Field(default=None, ge=0)
    delta: float | None = Field(default=None, ge=0, lt=0.5)

    @model_validator(mode="after")
    def _consistent(self) -> ScenarioFile:
        if self.kind == ScenarioKind.COIN and self.coin is None:
            raise ValueError("a coin scenario needs a 'coin' section")
        if self.kind == ScenarioKind.BELIEF and self.belief is None and self.sweep is None:
            raise ValueError("a belief scenario needs a 'belief' or 'sweep' section")
        if self.trials is not None and self.seed is None:
            raise ValueError("a stochastic run (trials set) needs a seed")
        if self.strategies is not None:
            if self.coin is not None:
                if len(self.strategies) != self.coin.n:
                    raise ValueError(f"{len(self.strategies)} strategies for n={self.coin.n} players")
                bad = [k for k, s in enumerate(self.strategies) if s.m != self.coin.m]
                if bad:
                    raise ValueError(f"strategies {bad} do not have m={self.coin.m} entries")
        if self.p_values is not None and any(not 0 < p < 0.5 for p in self.p_values):
            raise ValueError("p values must lie in (0, 1/2)")
        return self

    def profile(self) -> StrategyProfile | None:
        if self.strategies is None:
            return None
        return StrategyProfile(tuple(s.to_strategy() for s in self.strategies))
