"""Score-difference distributions, their cumulants and exact/lattice convolution."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import structlog
from scipy import signal

from forecast_lab.data.beliefs import EventBelief
from forecast_lab.exceptions import ScenarioError

logger = structlog.get_logger(__name__)

ATOM_CAP = 2_000_000
RESOLUTION = 1e-4
MERGE_DECIMALS = 12


def _merge_atoms(
    values: np.ndarray, weights: np.ndarray, decimals: int = MERGE_DECIMALS
) -> tuple[np.ndarray, np.ndarray]:
    keys = np.round(values, decimals)
    unique, inverse = np.unique(keys, return_inverse=True)
    merged = np.bincount(inverse.ravel(), weights=weights, minlength=len(unique))
    keep = merged > 0
    return unique[keep], merged[keep]


def _atom_moments(values: np.ndarray, weights: np.ndarray) -> tuple[float, float, float, float, float]:
    mean = float(np.dot(weights, values))
    centered = values - mean
    var = float(np.dot(weights, centered**2))
    mu3 = float(np.dot(weights, centered**3))
    mu4 = float(np.dot(weights, centered**4))
    abs3 = float(np.dot(weights, np.abs(centered) ** 3))
    return mean, var, mu3, mu4 - 3.0 * var**2, abs3


@dataclass(frozen=True)
class ScoreDiffDistribution:
    """Discrete law of an (aggregate) score difference S(R_j, Y) - S(r_i, Y).

    Cumulants are carried alongside the atoms and add under convolution.
    abs_third is the Lyapunov sum of per-term absolute third central moments,
    the P_i that enters the Berry-Esseen bound.
    """

    values: np.ndarray
    weights: np.ndarray
    mean: float
    variance: float
    kappa3: float
    kappa4: float
    abs_third: float
    n_terms: int = 1
    lattice: float | None = None

    @classmethod
    def from_atoms(
        cls, values: Sequence[float], weights: Sequence[float], decimals: int = MERGE_DECIMALS
    ) -> ScoreDiffDistribution:
        v, w = _merge_atoms(np.asarray(values, dtype=float), np.asarray(weights, dtype=float), decimals)
        w = w / w.sum()
        mean, var, k3, k4, abs3 = _atom_moments(v, w)
        return cls(v, w, mean, var, k3, k4, abs3)

    @classmethod
    def point_mass(cls, value: float = 0.0) -> ScoreDiffDistribution:
        return cls.from_atoms([value], [1.0])

    @property
    def std(self) -> float:
        return float(np.sqrt(max(self.variance, 0.0)))

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.weights)

    def atom_moments(self) -> dict[str, float]:
        """Moments recomputed directly from the atoms."""
        mean, var, k3, k4, _ = _atom_moments(self.values, self.weights)
        return {"mean": mean, "variance": var, "kappa3": k3, "kappa4": k4}

    def mass_below(self, x: float, tolerance: float = 0.0) -> float:
        """Pr[X < x - tolerance]."""
        idx = np.searchsorted(self.values, x - tolerance, side="left")
        return float(self.weights[:idx].sum())

    def mass_near(self, x: float, tolerance: float = 0.0) -> float:
        """Pr[|X - x| <= tolerance]."""
        lo = np.searchsorted(self.values, x - tolerance, side="left")
        hi = np.searchsorted(self.values, x + tolerance, side="right")
        return float(self.weights[lo:hi].sum())


def score_diff_event(r_it: float, event: EventBelief) -> ScoreDiffDistribution:
    """Per-event S(R_jt, Y_t) - S(r_it, Y_t) under the event's joint."""
    if not 0.0 <= r_it <= 1.0:
        raise ScenarioError(f"Report {r_it} outside [0, 1]")
    y = event.outcomes.astype(float)
    values = (1.0 - (event.reports - y) ** 2) - (1.0 - (r_it - y) ** 2)
    return ScoreDiffDistribution.from_atoms(values, event.weights)


def _to_lattice(dist: ScoreDiffDistribution, resolution: float) -> tuple[int, np.ndarray]:
    # np.rint rounds half to even
    idx = np.rint(dist.values / resolution).astype(np.int64)
    offset = int(idx.min())
    mass = np.bincount(idx - offset, weights=dist.weights)
    return offset, mass


def _lattice_convolve(
    a: tuple[int, np.ndarray], b: tuple[int, np.ndarray]
) -> tuple[int, np.ndarray]:
    mass = signal.convolve(a[1], b[1], mode="full")
    mass = np.clip(mass, 0.0, None)
    return a[0] + b[0], mass / mass.sum()


def convolve(
    dists: Sequence[ScoreDiffDistribution],
    resolution: float = RESOLUTION,
    atom_cap: int = ATOM_CAP,
    merge_decimals: int = MERGE_DECIMALS,
) -> ScoreDiffDistribution:
    """Law of the sum of independent score differences.

    Exact atom-by-atom while the product of atom counts stays within
    atom_cap; past that, every term is binned to the nearest multiple of
    resolution and the rest is a lattice convolution. Cumulants are summed
    per term either way. Exact atoms closer than 10**-merge_decimals merge.
    """
    if len(dists) == 0:
        raise ScenarioError("convolve needs at least one distribution")

    mean = sum(d.mean for d in dists)
    variance = sum(d.variance for d in dists)
    kappa3 = sum(d.kappa3 for d in dists)
    kappa4 = sum(d.kappa4 for d in dists)
    abs_third = sum(d.abs_third for d in dists)
    n_terms = sum(d.n_terms for d in dists)

    values, weights = dists[0].values, dists[0].weights
    lattice: tuple[int, np.ndarray] | None = None
    for k, d in enumerate(dists[1:], start=1):
        if lattice is None and len(values) * len(d.values) <= atom_cap:
            values, weights = _merge_atoms(
                np.add.outer(values, d.values).ravel(),
                np.multiply.outer(weights, d.weights).ravel(),
                merge_decimals,
            )
            continue
        if lattice is None:
            logger.info("convolution_switched_to_lattice", term=k, atoms=len(values), resolution=resolution)
            lattice = _to_lattice(ScoreDiffDistribution(values, weights, 0, 0, 0, 0, 0), resolution)
        lattice = _lattice_convolve(lattice, _to_lattice(d, resolution))

    if lattice is not None:
        offset, mass = lattice
        keep = mass > 0
        values = (offset + np.nonzero(keep)[0]) * resolution
        weights = mass[keep]
    weights = weights / weights.sum()
    return ScoreDiffDistribution(
        values=values,
        weights=weights,
        mean=mean,
        variance=variance,
        kappa3=kappa3,
        kappa4=kappa4,
        abs_third=abs_third,
        n_terms=n_terms,
        lattice=resolution if lattice is not None else None,
    )


def cdf_G(dist: ScoreDiffDistribution, x: float | np.ndarray) -> float | np.ndarray:
    """Pr[X <= x]; right-continuous step function over the atoms."""
    cum = np.concatenate([[0.0], dist.cumulative])
    idx = np.searchsorted(dist.values, x, side="right")
    out = np.clip(cum[idx], 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def sum_of_events(reports: Sequence[float], events: Sequence[EventBelief], **kwargs) -> ScoreDiffDistribution:
    """Convolution of per-event score differences for a fixed report vector."""
    return convolve([score_diff_event(float(r), ev) for r, ev in zip(reports, events)], **kwargs)
