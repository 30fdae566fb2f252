"""Deterministic artifact writers and the per-run sidecar report."""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import structlog

from forecast_lab import __version__

logger = structlog.get_logger(__name__)

FLOAT_FORMAT = "%.12g"


def jsonable(value: Any) -> Any:
    """Plain-JSON view of numpy scalars/arrays, Fractions, Paths and nested containers."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float, Fraction)):
        f = float(value)
        return f if math.isfinite(f) else str(f)
    if isinstance(value, Path):
        return str(value)
    return value


def dumps(obj: Any) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n"


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def sidecar_path(out: Path) -> Path:
    return out.with_name(out.name + ".run.json")


def write_table(df: pd.DataFrame, path: Path, float_format: str = FLOAT_FORMAT) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=float_format, lineterminator="\n")
    return path


def write_json(obj: Any, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


@dataclass
class RunReport:
    """Sidecar for one command run; everything except wall_clock_s is reproducible."""

    command: str
    args: dict[str, Any]
    seed: int | None
    version: str = __version__
    results: dict[str, Any] = field(default_factory=dict)
    outputs: list[dict[str, Any]] = field(default_factory=list)
    wall_clock_s: float = 0.0
    _started: float = field(default_factory=time.perf_counter, repr=False)

    def add_output(self, path: Path, kind: str, rows: int | None = None) -> None:
        self.outputs.append({"path": str(path), "kind": kind, "rows": rows, "sha256": sha256_file(path)})

    def finish(self) -> RunReport:
        self.wall_clock_s = time.perf_counter() - self._started
        return self

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "args": self.args,
            "seed": self.seed,
            "version": self.version,
            "results": self.results,
            "outputs": self.outputs,
            "wall_clock_s": self.wall_clock_s,
        }


def emit(
    report: RunReport,
    out: Path,
    fmt: str,
    table: pd.DataFrame | None = None,
    payload: dict[str, Any] | None = None,
    float_format: str = FLOAT_FORMAT,
) -> RunReport:
    """Write the main artifact in `fmt` and the sidecar next to it.

    CSV falls back to JSON when the command has no table view, and JSON
    falls back to the table's records when there is no payload.
    """
    if fmt == "csv" and table is not None:
        write_table(table, out, float_format)
        report.add_output(out, "csv", len(table))
    else:
        body = payload if payload is not None else {"rows": table.to_dict(orient="records")}
        write_json(body, out)
        report.add_output(out, "json")
    report.finish()
    sidecar = write_json(report.to_dict(), sidecar_path(out))
    logger.info("artifact_written", command=report.command, path=str(out), sidecar=str(sidecar))
    return report
