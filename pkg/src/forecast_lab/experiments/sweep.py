"""Gamma sweeps over the number of events and over sigma."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import pandas as pd
import structlog
from scipy import stats

from forecast_lab.analysis.edgeworth import gamma_theorem2
from forecast_lab.analysis.truthfulness import certify_truthfulness
from forecast_lab.config.settings import EdgeworthSettings, MechanismSettings
from forecast_lab.data.beliefs import ScenarioFlags
from forecast_lab.data.templates import BeliefTemplate
from forecast_lab.exceptions import ScenarioError

logger = structlog.get_logger(__name__)

SWEEP_COLUMNS = [
    "m",
    "sigma_i",
    "mu_i",
    "gamma_theorem2",
    "gamma_per_event_max",
    "utility_truthful",
    "delta_hat",
    "condition3",
]


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x over the finite, positive pairs."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if keep.sum() < 2:
        raise ScenarioError("A log-log slope needs at least two positive points")
    return float(stats.linregress(np.log(x[keep]), np.log(y[keep])).slope)


def gamma_sweep(
    template: BeliefTemplate,
    m_values: Sequence[int],
    settings: EdgeworthSettings | None = None,
    flags: ScenarioFlags | None = None,
    mechanism: MechanismSettings | None = None,
) -> pd.DataFrame:
    """Per-m certificate summary for an iid template.

    Beyond the exact enumeration cap utilities use Phi(-mu/sigma).
    """
    settings = settings or EdgeworthSettings()
    rows = []
    for m in sorted(m_values):
        cert = certify_truthfulness(
            template.reports(m),
            template.belief(m),
            settings=settings,
            flags=flags,
            mechanism=mechanism,
        )
        per_event = [g for g in cert.gamma_per_event if g is not None]
        rows.append(
            {
                "m": m,
                "sigma_i": cert.sigma_i,
                "mu_i": cert.mu_i,
                "gamma_theorem2": cert.gamma_theorem2 if cert.gamma_theorem2 is not None else np.nan,
                "gamma_per_event_max": max(per_event) if per_event else np.nan,
                "utility_truthful": cert.utility_truthful,
                "delta_hat": cert.delta_hat,
                "condition3": cert.condition3.holds,
            }
        )
        logger.debug("gamma_sweep_point", template=template.name, m=m, sigma=cert.sigma_i)
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def sigma_sweep(sigmas: Sequence[float], C3: float = 0.0, C4: float = 0.0, D: float = 1.0) -> pd.DataFrame:
    """Aggregate bound against sigma at fixed cumulant ratios."""
    rows = [{"sigma_i": float(s), "gamma_theorem2": gamma_theorem2(float(s), C3, C4, D)} for s in sigmas]
    return pd.DataFrame(rows, columns=["sigma_i", "gamma_theorem2"])


def sweep_summary(frame: pd.DataFrame, sigma_frame: pd.DataFrame | None = None) -> dict:
    summary = {
        "rows": len(frame),
        "gamma_non_increasing": bool(frame["gamma_per_event_max"].dropna().is_monotonic_decreasing),
        "condition3_pass": int(frame["condition3"].sum()),
    }
    try:
        summary["slope_per_event_vs_m"] = loglog_slope(frame["m"], frame["gamma_per_event_max"])
    except ScenarioError:
        summary["slope_per_event_vs_m"] = None
    if sigma_frame is not None:
        summary["slope_theorem2_vs_sigma"] = loglog_slope(sigma_frame["sigma_i"], sigma_frame["gamma_theorem2"])
    return summary
