"""Step-size rules over an inner horizon of ``T`` epochs.

Every rule is indexed by the 1-based epoch ``t`` counted since the last
restart.  All of them are pure functions except the plateau rule, whose
state lives in :class:`PlateauState`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DomainError, InputError

KINDS = (
    "constant",
    "inv_t",
    "inv_sqrt_t",
    "cosine",
    "exponential",
    "logarithmic",
    "stagewise",
    "plateau",
)
# kinds whose value is nonincreasing in t on [1, T]
MONOTONE_KINDS = ("inv_t", "inv_sqrt_t", "cosine", "exponential", "logarithmic")


def _check_horizon(t, T):
    if T < 2:
        raise DomainError(f"horizon T must be >= 2, got {T}")
    if not 1 <= t <= T:
        raise DomainError(f"epoch t={t} outside [1, {T}]")


def log_step(t: int, T: int, eta0: float) -> float:
    """eta0 * (1 - ln t / ln T); exactly eta0 at t=1 and exactly 0 at t=T."""
    _check_horizon(t, T)
    return eta0 * (1.0 - math.log(t) / math.log(T))


def cosine_step(t: int, T: int, eta0: float) -> float:
    _check_horizon(t, T)
    return eta0 / 2.0 * (1.0 + math.cos(t * math.pi / T))


def constant_step(eta0: float) -> float:
    return eta0


def inv_t_step(t: int, eta0: float, alpha: float) -> float:
    if alpha < 0:
        raise DomainError(f"alpha must be >= 0, got {alpha}")
    if t < 1:
        raise DomainError(f"epoch t={t} must be >= 1")
    return eta0 / (1.0 + alpha * t)


def inv_sqrt_t_step(t: int, eta0: float, alpha: float) -> float:
    if alpha < 0:
        raise DomainError(f"alpha must be >= 0, got {alpha}")
    if t < 1:
        raise DomainError(f"epoch t={t} must be >= 1")
    return eta0 / (1.0 + alpha * math.sqrt(t))


def exponential_step(t: int, T: int, eta0: float, beta: float, allow_zero: bool = False) -> float:
    """eta0 * (beta/T)^(t/T).

    ``allow_zero`` admits the t=0 extrapolation (value eta0); it exists for
    table dumps only and is never used by the optimizer.
    """
    if not 0 < beta < T:
        raise DomainError(f"exponential step needs 0 < beta < T, got beta={beta}, T={T}")
    if allow_zero and t == 0:
        return eta0
    _check_horizon(t, T)
    return eta0 * (beta / T) ** (t / T)


def stagewise_step(t: int, eta0: float, alpha: float, milestones: Sequence[int]) -> float:
    k = sum(1 for m in milestones if m <= t)
    return eta0 * alpha**k


def default_milestones(T: int, count: int) -> tuple[int, ...]:
    """Milestone epochs used when none are given: ceil(T/2), or ceil(T/3) and ceil(2T/3)."""
    if count == 0:
        return ()
    if count == 1:
        ms = (math.ceil(T / 2),)
    elif count == 2:
        ms = (math.ceil(T / 3), math.ceil(2 * T / 3))
    else:
        raise DomainError("default milestones exist for 1 or 2 milestones only")
    _check_milestones(ms, T)
    return ms


def _check_milestones(milestones, T):
    for m in milestones:
        if not (1 < m < T):
            raise DomainError(f"milestone {m} outside the open interval (1, {T})")
    if any(b <= a for a, b in zip(milestones, milestones[1:])):
        raise DomainError(f"milestones must be strictly increasing: {list(milestones)}")


@dataclass(frozen=True)
class StepSchedule:
    """A parameterized step-size rule over an inner horizon ``T``.

    ``alpha`` is the decay factor for ``inv_t``/``inv_sqrt_t`` and the
    reduction factor for ``stagewise``/``plateau``; ``beta`` only matters
    for ``exponential``.  ``patience`` and ``threshold`` configure the
    plateau rule.
    """

    kind: str
    eta0: float
    T: int
    alpha: float = 0.0
    beta: float = 1.0
    milestones: tuple[int, ...] = ()
    patience: int = 10
    threshold: float = 1e-4

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown schedule kind {self.kind!r}; expected one of {KINDS}")
        if not (self.eta0 > 0 and math.isfinite(self.eta0)):
            raise DomainError(f"eta0 must be positive and finite, got {self.eta0}")
        if self.T < 2:
            raise DomainError(f"horizon T must be >= 2, got {self.T}")
        if self.alpha < 0:
            raise DomainError(f"alpha must be >= 0, got {self.alpha}")
        if self.kind in ("stagewise", "plateau") and self.alpha > 1:
            raise DomainError(f"{self.kind} reduction factor must lie in [0, 1], got {self.alpha}")
        if self.kind == "plateau" and self.alpha == 0:
            raise DomainError("plateau reduction factor must be positive")
        if self.kind == "exponential" and not 0 < self.beta < self.T:
            raise DomainError(f"exponential step needs 0 < beta < T, got beta={self.beta}")
        object.__setattr__(self, "milestones", tuple(int(m) for m in self.milestones))
        _check_milestones(self.milestones, self.T)
        if self.patience < 1 or self.threshold <= 0:
            raise DomainError("plateau patience must be >= 1 and threshold > 0")

    def step(self, t: int) -> float:
        """Step size at inner epoch ``t``.

        For ``plateau`` this is the starting value; the running value lives
        in a :class:`PlateauState`.
        """
        if not 1 <= t <= self.T:
            raise DomainError(f"epoch t={t} outside [1, {self.T}]")
        kind = self.kind
        if kind == "logarithmic":
            return log_step(t, self.T, self.eta0)
        if kind == "cosine":
            return cosine_step(t, self.T, self.eta0)
        if kind == "exponential":
            return exponential_step(t, self.T, self.eta0, self.beta)
        if kind == "inv_t":
            return inv_t_step(t, self.eta0, self.alpha)
        if kind == "inv_sqrt_t":
            return inv_sqrt_t_step(t, self.eta0, self.alpha)
        if kind == "stagewise":
            return stagewise_step(t, self.eta0, self.alpha, self.milestones)
        return constant_step(self.eta0)

    def with_eta0(self, eta0: float) -> "StepSchedule":
        return replace(self, eta0=eta0)


def schedule_table(schedule: StepSchedule, T: int | None = None) -> np.ndarray:
    """Vector of eta_1..eta_T."""
    if T is not None and T != schedule.T:
        schedule = replace(schedule, T=T)
    return np.array([schedule.step(t) for t in range(1, schedule.T + 1)], dtype=np.float64)


def warm_restart_index(k: int, T: int) -> tuple[int, int]:
    """Map a 0-based global epoch counter to (cycle, inner epoch in [1, T])."""
    if T < 2:
        raise DomainError(f"horizon T must be >= 2, got {T}")
    if k < 0:
        raise DomainError(f"global epoch counter must be >= 0, got {k}")
    return k // T, k % T + 1


def restart_table(schedule: StepSchedule, restarts: int) -> list[tuple[int, int, int, float]]:
    """Rows (global_epoch, cycle, t, eta) for ``restarts`` cycles; global_epoch is 1-based."""
    if restarts < 1:
        raise DomainError("restarts must be >= 1")
    etas = schedule_table(schedule)
    rows = []
    for k in range(restarts * schedule.T):
        cycle, t = warm_restart_index(k, schedule.T)
        rows.append((k + 1, cycle, t, float(etas[t - 1])))
    return rows


@dataclass
class PlateauState:
    """Running state of the reduce-on-plateau rule."""

    current_eta: float
    best_metric: float = math.inf
    epochs_since_improvement: int = 0
    patience: int = 10
    threshold: float = 1e-4
    reductions: int = field(default=0)

    @classmethod
    def from_schedule(cls, schedule: StepSchedule) -> "PlateauState":
        return cls(current_eta=schedule.eta0, patience=schedule.patience, threshold=schedule.threshold)


def plateau_update(state: PlateauState, metric: float, alpha: float) -> PlateauState:
    """Feed one epoch's metric (lower is better) and return the new state.

    An improvement must beat ``best * (1 - threshold)`` strictly.  Once the
    number of epochs without improvement exceeds ``patience`` the step is
    multiplied by ``alpha`` and the counter restarts.
    """
    if not math.isfinite(metric):
        raise InputError(f"plateau metric must be finite, got {metric}")
    if not 0 < alpha <= 1:
        raise DomainError(f"plateau reduction factor must lie in (0, 1], got {alpha}")
    if metric < state.best_metric * (1.0 - state.threshold):
        return replace(state, best_metric=metric, epochs_since_improvement=0)
    count = state.epochs_since_improvement + 1
    if count > state.patience:
        return replace(
            state,
            current_eta=state.current_eta * alpha,
            epochs_since_improvement=0,
            reductions=state.reductions + 1,
        )
    return replace(state, epochs_since_improvement=count)
