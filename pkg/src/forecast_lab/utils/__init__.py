from forecast_lab.utils.logging import bind_run_context, clear_run_context, setup_logging
from forecast_lab.utils.parallel import block_sizes, run_chunks, run_seeded_blocks, spawn_generators

__all__ = [
    "bind_run_context",
    "block_sizes",
    "clear_run_context",
    "run_chunks",
    "run_seeded_blocks",
    "setup_logging",
    "spawn_generators",
]
