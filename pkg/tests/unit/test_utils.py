"""Tests for seeded block parallelism and run-scoped logging."""

from __future__ import annotations

import json

import numpy as np
import structlog

from forecast_lab.utils.logging import bind_run_context, clear_run_context, setup_logging
from forecast_lab.utils.parallel import block_sizes, run_chunks, run_seeded_blocks


def _draw(size, rng):
    return rng.random(size)


def test_block_sizes():
    assert block_sizes(10, 4) == [4, 4, 2]
    assert block_sizes(8, 4) == [4, 4]
    assert block_sizes(0, 4) == []


def test_blocks_do_not_depend_on_workers():
    one = np.concatenate(run_seeded_blocks(_draw, 1000, 128, seed=42, workers=1))
    two = np.concatenate(run_seeded_blocks(_draw, 1000, 128, seed=42, workers=2))
    np.testing.assert_array_equal(one, two)
    assert len(one) == 1000


def test_offsets_are_passed():
    starts = run_seeded_blocks(lambda start, size, rng: (start, size), 10, 4, seed=0, pass_offset=True)
    assert starts == [(0, 4), (4, 4), (8, 2)]


def test_chunks_keep_order():
    assert run_chunks(sum, list(range(10)), 3, workers=2) == [3, 12, 21, 9]


def test_run_context_is_bound(capsys):
    setup_logging("INFO", json_output=True)
    bind_run_context("demo", seed=7)
    structlog.get_logger("test").info("event_logged", value=1)
    clear_run_context()
    structlog.get_logger("test").info("after_clear")
    lines = [json.loads(line) for line in capsys.readouterr().err.strip().splitlines()]
    assert lines[0]["command"] == "demo"
    assert lines[0]["seed"] == 7
    assert "command" not in lines[1]


def test_level_filtering(capsys):
    setup_logging("warning")
    structlog.get_logger("test").info("hidden")
    structlog.get_logger("test").warning("shown")
    err = capsys.readouterr().err
    assert "hidden" not in err
    assert "shown" in err
