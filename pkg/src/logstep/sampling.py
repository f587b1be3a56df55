"""Output-iterate distribution p_t = eta_t / sum(eta).

The reported iterate of a run is drawn from this law rather than taken as
the last one.  For schedules that end at eta_T = 0 (logarithmic, cosine)
the final iterate therefore has probability zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDistributionError, DomainError, InputError
from .schedules import StepSchedule, schedule_table


@dataclass(frozen=True)
class OutputDistribution:
    probs: np.ndarray
    cdf: np.ndarray

    @property
    def T(self) -> int:
        return len(self.probs)

    @classmethod
    def from_weights(cls, weights) -> "OutputDistribution":
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or len(w) == 0:
            raise InputError("weights must be a nonempty vector")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InputError("weights must be finite and nonnegative")
        total = math.fsum(w)
        if total <= 0:
            raise DegenerateDistributionError("all step sizes are zero; no output distribution")
        probs = w / total
        probs.setflags(write=False)
        cdf = np.cumsum(probs)
        # pin the top at 1 from the last bin with mass, so rounding cannot hand mass to trailing zeros
        cdf[int(np.flatnonzero(probs)[-1]):] = 1.0
        cdf.setflags(write=False)
        return cls(probs=probs, cdf=cdf)


def build_distribution(schedule: StepSchedule, T: int | None = None) -> OutputDistribution:
    return OutputDistribution.from_weights(schedule_table(schedule, T))


def sample_iterate(dist: OutputDistribution, rng: np.random.Generator) -> int:
    """Inverse-CDF draw of a 1-based epoch index."""
    u = rng.random()
    # side="right" on u puts ties (zero-mass bins) on the smaller index that carries mass
    idx = int(np.searchsorted(dist.cdf, u, side="right"))
    return min(idx, dist.T - 1) + 1


def tail_mass(dist: OutputDistribution, fraction: float) -> float:
    """Probability of the epochs t > ceil((1 - fraction) * T)."""
    if not 0 < fraction <= 1:
        raise DomainError(f"fraction must lie in (0, 1], got {fraction}")
    start = math.ceil((1.0 - fraction) * dist.T)
    return math.fsum(dist.probs[start:])


def weighted_grad_measure(grad_norm_sq, dist: OutputDistribution) -> float:
    """sum_t p_t * ||grad f(x_t)||^2 over the trajectory."""
    g = np.asarray(grad_norm_sq, dtype=np.float64)
    if g.shape != dist.probs.shape:
        raise InputError(f"trace length {g.shape} does not match distribution length {dist.T}")
    return math.fsum(dist.probs * g)
