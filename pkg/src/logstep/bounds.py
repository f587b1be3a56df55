"""Closed-form convergence bounds for SGD with the logarithmic step size.

The evaluators are pure formulas.  :func:`verify_sum_bounds` checks the
two sum bounds against an explicit (compensated) summation of the step
sizes, so it stays independent of the formulas it checks.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import DomainError, PreconditionError


@dataclass(frozen=True)
class TheoremInputs:
    """Constants entering the convergence bounds.

    c scales the initial step as eta0 = 1/(c L); delta1 is f(x_1) - f*
    (or minus a certified lower bound); delta1_max is the largest such gap
    over the cycle starting points of a warm-restart run.
    """

    c: float
    L: float
    sigma: float
    delta1: float
    T: int
    l: int = 1
    delta1_max: float | None = None

    def __post_init__(self):
        if not self.c > 1:
            raise DomainError(f"c must exceed 1, got {self.c}")
        if not self.L > 0:
            raise DomainError(f"L must be positive, got {self.L}")
        if self.sigma < 0 or self.delta1 < 0:
            raise DomainError("sigma and delta1 must be nonnegative")
        if self.T < 2:
            raise DomainError(f"T must be >= 2, got {self.T}")
        if self.l < 1:
            raise DomainError(f"l must be >= 1, got {self.l}")
        if self.delta1_max is not None and self.delta1_max < 0:
            raise DomainError("delta1_max must be nonnegative")

    @property
    def eta0(self) -> float:
        return 1.0 / (self.c * self.L)


def _check_T(T):
    if T < 2:
        raise DomainError(f"T must be >= 2, got {T}")


def lemma1_ln_lower(x: float) -> float:
    """(x - 1)/x, a lower bound on ln x for x >= 1."""
    if not x >= 1:
        raise DomainError(f"x must be >= 1, got {x}")
    return (x - 1.0) / x


def lemma2_lower_bound(eta0: float, T: int) -> float:
    """Claimed lower bound eta0 (T+1) / (2 ln T) on the sum of log steps."""
    _check_T(T)
    return eta0 * (T + 1) / (2.0 * math.log(T))


def lemma3_upper_bound(eta0: float, T: int) -> float:
    """Upper bound eta0^2 * 2T / ln^2 T on the sum of squared log steps."""
    _check_T(T)
    return eta0**2 * 2.0 * T / math.log(T) ** 2


def lemma4_descent_rhs(eta_t: float, L: float, sigma: float, f_t_minus_f_next: float) -> float:
    """Right side of the one-step descent inequality.

    The caller compares ``(eta_t / 2) * E||grad f(x_t)||^2`` against the
    returned ``E[f(x_t) - f(x_{t+1})] + L eta_t^2 sigma^2 / 2``.  Requires
    eta_t <= 1/L.
    """
    if eta_t < 0:
        raise DomainError(f"eta_t must be nonnegative, got {eta_t}")
    if eta_t * L > 1.0:
        raise PreconditionError(f"descent inequality needs eta_t <= 1/L; got eta_t={eta_t}, L={L}")
    return f_t_minus_f_next + L * eta_t**2 * sigma**2 / 2.0


def theorem1_bound(inp: TheoremInputs) -> float:
    """4cL ln T/(T+1) * delta1 + 4 sigma^2 T / (L c (T+1) ln T)."""
    c, L, T = inp.c, inp.L, inp.T
    lnT = math.log(T)
    return 4.0 * c * L * lnT / (T + 1) * inp.delta1 + 4.0 * inp.sigma**2 * T / (L * c * (T + 1) * lnT)


def implied_c(T: int) -> float:
    """The c = sqrt(T)/ln T choice that yields the 1/sqrt(T) rate."""
    _check_T(T)
    return math.sqrt(T) / math.log(T)


def corollary1_bound(L: float, sigma: float, delta1: float, T: int) -> tuple[float, float]:
    """Return (bound, c) for the c = sqrt(T)/ln T choice.

    The bound is 4 L delta1/sqrt(T) + 4 sigma^2 / (L sqrt(T)).
    """
    _check_T(T)
    if sigma == 0:
        raise DomainError("sigma = 0: the sqrt(T)/ln T choice of c is not needed; use theorem1_bound")
    rt = math.sqrt(T)
    return 4.0 * L * delta1 / rt + 4.0 * sigma**2 / (L * rt), implied_c(T)


def corollary2_bound(inp: TheoremInputs) -> float:
    """Warm-restart bound 4 l c L ln T / T * delta1_max + 4 sigma^2 l / (L c ln T).

    ``delta1`` stands in for ``delta1_max`` when the latter is not given.
    """
    c, L, T, l = inp.c, inp.L, inp.T, inp.l
    dmax = inp.delta1 if inp.delta1_max is None else inp.delta1_max
    lnT = math.log(T)
    return 4.0 * l * c * L * lnT / T * dmax + 4.0 * inp.sigma**2 * l / (L * c * lnT)


@dataclass(frozen=True)
class SumBoundReport:
    eta0: float
    T: int
    direct_sum: float
    direct_sum_sq: float
    lemma2: float
    lemma3: float
    lower_holds: bool
    upper_holds: bool

    @property
    def holds(self) -> tuple[bool, bool]:
        return self.lower_holds, self.upper_holds

    def to_dict(self) -> dict:
        return asdict(self)


def direct_log_sums(eta0: float, T: int) -> tuple[float, float]:
    """Explicit loop over eta0 (1 - ln t / ln T) with compensated summation."""
    _check_T(T)
    lnT = math.log(T)
    terms = [eta0 * (1.0 - math.log(t) / lnT) for t in range(1, T + 1)]
    return math.fsum(terms), math.fsum(e * e for e in terms)


def verify_sum_bounds(eta0: float, T: int) -> SumBoundReport:
    s, s2 = direct_log_sums(eta0, T)
    lo = lemma2_lower_bound(eta0, T)
    hi = lemma3_upper_bound(eta0, T)
    return SumBoundReport(eta0, T, s, s2, lo, hi, s >= lo, s2 <= hi)


def smallest_T_lemma2(eta0: float = 1.0, T_max: int = 10_000) -> int:
    """Smallest T from which the lower sum bound holds for every larger T up to T_max.

    Uses sum_t (1 - ln t/ln T) = T - ln(T!)/ln T with a running sum of ln t,
    so the scan is linear in T_max.
    """
    last_fail = 1
    log_fact = 0.0
    for T in range(2, T_max + 1):
        log_fact += math.log(T)
        direct = eta0 * (T - log_fact / math.log(T))
        if direct < lemma2_lower_bound(eta0, T):
            last_fail = T
    if last_fail == T_max:
        raise DomainError(f"lower sum bound fails at T_max={T_max}")
    return last_fail + 1
