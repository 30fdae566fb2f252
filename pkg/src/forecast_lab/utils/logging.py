"""Structured logging for lab runs.

Artifacts go to files, so every log line goes to stderr. Each CLI run binds
its command and seed once; every event logged during the run carries them.
"""

from __future__ import annotations

import logging
import sys

import structlog

LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def setup_logging(level: str = "INFO", json_output: bool = True) -> None:
    """JSON lines for batch runs, the console renderer when a human is watching."""
    if level.upper() not in LEVELS:
        level = "INFO"
    processors = [
        structlog.contextvars.merge_contextvars,
        structlog.processors.add_log_level,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
    ]
    processors.append(structlog.processors.JSONRenderer() if json_output else structlog.dev.ConsoleRenderer())

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.make_filtering_bound_logger(getattr(logging, level.upper())),
        context_class=dict,
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


def bind_run_context(command: str, seed: int | None = None, **extra) -> None:
    """Attach the run's command and seed to every subsequent log event."""
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(command=command, seed=seed, **extra)


def clear_run_context() -> None:
    structlog.contextvars.clear_contextvars()
