"""Scenario file loading (JSON or YAML) with field and line diagnostics."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import structlog
import yaml
from pydantic import ValidationError

from forecast_lab.data.schemas import ScenarioFile
from forecast_lab.exceptions import ScenarioError

logger = structlog.get_logger(__name__)


def _locate(text: str, loc: tuple) -> int | None:
    """1-based line of the node at `loc`, or of its deepest existing ancestor."""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return None
    line = node.start_mark.line + 1 if node is not None else None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            match = next((v for k, v in node.value if k.value == key), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            match = node.value[key]
        else:
            match = None
        if match is None:
            break
        node = match
        line = node.start_mark.line + 1
    return line


def diagnostics(error: ValidationError, text: str) -> list[dict[str, Any]]:
    return [
        {
            "field": ".".join(str(part) for part in err["loc"]) or "<root>",
            "message": err["msg"],
            "line": _locate(text, err["loc"]),
        }
        for err in error.errors()
    ]


def parse_scenario(text: str, suffix: str = ".json") -> ScenarioFile:
    try:
        data = json.loads(text) if suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        line = getattr(exc, "lineno", None) or getattr(getattr(exc, "problem_mark", None), "line", -1) + 1
        raise ScenarioError(f"Scenario is not valid {suffix.lstrip('.')}: {exc}", [{"line": line}]) from exc
    if not isinstance(data, dict):
        raise ScenarioError("Scenario must be a mapping at the top level")
    try:
        return ScenarioFile.model_validate(data)
    except ValidationError as exc:
        diags = diagnostics(exc, text)
        summary = "; ".join(f"{d['field']} (line {d['line']}): {d['message']}" for d in diags)
        raise ScenarioError(f"Invalid scenario: {summary}", diags) from exc


def load_scenario(path: Path | str) -> ScenarioFile:
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"{path} not found")
    scenario = parse_scenario(path.read_text(), path.suffix.lower())
    logger.info("scenario_loaded", path=str(path), kind=str(scenario.kind), name=scenario.name)
    return scenario
