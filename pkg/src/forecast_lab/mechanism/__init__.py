from forecast_lab.mechanism.scoring import (
    WinnerShare,
    batch_shares,
    batch_total_scores,
    quadratic_score,
    share_of,
    simple_max,
    total_score,
    winner_set,
)

__all__ = [
    "WinnerShare",
    "batch_shares",
    "batch_total_scores",
    "quadratic_score",
    "share_of",
    "simple_max",
    "total_score",
    "winner_set",
]
