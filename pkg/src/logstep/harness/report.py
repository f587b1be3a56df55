"""Seed-aggregated summaries, bound comparisons and rate fits."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from ..bounds import TheoremInputs, corollary2_bound, theorem1_bound
from ..errors import DomainError, InputError, PreconditionError, SummaryError
from ..optimizer import RunConfig, RunTrace
from ..sampling import OutputDistribution, weighted_grad_measure


def confidence_margin(values, confidence=0.95) -> float:
    """Half-width of the Student-t interval for the mean (n - 1 dof)."""
    v = np.asarray(values, dtype=np.float64)
    n = len(v)
    if n < 2:
        raise SummaryError("a confidence margin needs at least 2 values")
    s = float(np.std(v, ddof=1))
    return float(stats.t.ppf(0.5 + confidence / 2.0, n - 1)) * s / math.sqrt(n)


@dataclass
class RunSummary:
    label: str
    mean_final_loss: float
    loss_margin95: float
    mean_final_metric: float
    metric_margin95: float
    n_seeds: int
    n_diverged: int = 0
    mean_sampled_loss: float = math.nan
    mean_sampled_metric: float = math.nan
    confidence: float = 0.95

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in asdict(self).items()}


def _sampled_value(trace: RunTrace, column: str) -> float:
    if trace.sampled_iterate is None:
        return math.nan
    return getattr(trace.rows[trace.sampled_iterate - 1], column)


def summarize_group(label: str, traces: list[RunTrace], confidence=0.95) -> RunSummary:
    """Mean and t-margin of the final loss/metric over completed seeds.

    Diverged runs are counted but excluded from the means.  Seeds are
    sorted first, so the result does not depend on input order.
    """
    done = sorted((t for t in traces if t.completed), key=lambda t: t.seed)
    if len(done) < 2:
        raise SummaryError(f"{label}: need at least 2 completed runs, got {len(done)}")
    loss = [t.final_train_loss for t in done]
    metric = [t.final_val_metric for t in done]
    return RunSummary(
        label=label,
        mean_final_loss=float(np.mean(loss)),
        loss_margin95=confidence_margin(loss, confidence),
        mean_final_metric=float(np.mean(metric)),
        metric_margin95=confidence_margin(metric, confidence),
        n_seeds=len(done),
        n_diverged=len(traces) - len(done),
        mean_sampled_loss=float(np.mean([_sampled_value(t, "train_loss") for t in done])),
        mean_sampled_metric=float(np.mean([_sampled_value(t, "val_metric") for t in done])),
        confidence=confidence,
    )


def summarize(groups: dict[str, list[RunTrace]], confidence=0.95) -> list[RunSummary]:
    return [summarize_group(label, groups[label], confidence) for label in sorted(groups)]


def format_table(summaries: list[RunSummary]) -> str:
    lines = [f"{'method':<24} {'train loss':>24} {'val metric':>24} {'sampled loss':>14} n"]
    for s in summaries:
        lines.append(
            f"{s.label:<24} {s.mean_final_loss:>11.4g} +- {s.loss_margin95:<9.3g} "
            f"{s.mean_final_metric:>11.4g} +- {s.metric_margin95:<9.3g} {s.mean_sampled_loss:>14.4g} {s.n_seeds}"
        )
    return "\n".join(lines)


@dataclass
class BoundReport:
    which: str
    measured: float
    bound: float
    satisfied: bool | None  # None in advisory mode
    slack: float
    c: float
    delta1: float
    advisory_reason: str | None = None
    per_cycle: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_dense(trace: RunTrace, expected: int):
    epochs = [r.global_epoch for r in trace.rows]
    if epochs != list(range(1, expected + 1)):
        raise InputError("bound comparison needs every epoch of the run; trace is truncated or subsampled")


def bound_report(trace: RunTrace, problem, oracle, config: RunConfig) -> BoundReport:
    """Compare the weighted gradient measure of a run against its bound.

    One cycle is checked against the single-run bound, several against
    the warm-restart bound.  The run must use the logarithmic step with
    eta0 = 1/(cL), c > 1.  Without declared constants, or when the run
    departs from plain one-step-per-epoch SGD, the comparison is reported
    without a verdict.
    """
    sched = config.schedule
    if sched.kind != "logarithmic":
        raise PreconditionError(f"bounds apply to the logarithmic step only, got {sched.kind}")
    if not trace.completed:
        raise PreconditionError("cannot bound a diverged run")
    T, l = sched.T, config.restarts
    _check_dense(trace, l * T)

    reasons = []
    if problem.L is None:
        reasons.append("smoothness constant is empirical")
    if getattr(oracle, "sigma_empirical", False):
        reasons.append("noise level is empirical")
    if config.method != "sgd" or config.mu != 0:
        reasons.append("bound covers plain SGD without momentum")
    if config.batches_per_epoch != 1:
        reasons.append("bound indexes one update per epoch")

    rows = trace.rows
    gn = np.array([r.grad_norm_sq for r in rows])
    etas = np.array([r.eta for r in rows])
    measured = weighted_grad_measure(gn, OutputDistribution.from_weights(etas))
    per_cycle = [
        weighted_grad_measure(gn[i * T:(i + 1) * T], OutputDistribution.from_weights(etas[i * T:(i + 1) * T]))
        for i in range(l)
    ]
    starts = [r.train_loss - problem.f_lb for r in rows if r.t == 1]
    delta1 = starts[0]

    if problem.L is None:
        return BoundReport("theorem1" if l == 1 else "corollary2", measured, math.nan, None, math.nan,
                           math.nan, delta1, "; ".join(reasons), per_cycle)
    c = 1.0 / (sched.eta0 * problem.L)
    if c <= 1:
        raise PreconditionError(f"eta0={sched.eta0} gives c={c:.4g} <= 1; the bound requires eta0 < 1/L")
    inp = TheoremInputs(c=c, L=problem.L, sigma=oracle.sigma, delta1=max(delta1, 0.0), T=T, l=l,
                        delta1_max=max(max(starts), 0.0))
    if l == 1:
        which, bound = "theorem1", theorem1_bound(inp)
    else:
        which, bound = "corollary2", corollary2_bound(inp)
    satisfied = None if reasons else measured <= bound
    slack = bound / measured if measured > 0 else math.inf
    return BoundReport(which, measured, bound, satisfied, slack, c, delta1,
                       "; ".join(reasons) or None, per_cycle)


def seed_averaged(reports: list[BoundReport]) -> BoundReport:
    """Average the measured quantity over seeds (an estimate of the expectation)."""
    if not reports:
        raise InputError("no reports to average")
    first = reports[0]
    measured = float(np.mean([r.measured for r in reports]))
    verdict = None if any(r.satisfied is None for r in reports) else measured <= first.bound
    slack = first.bound / measured if measured > 0 else math.inf
    return BoundReport(first.which, measured, first.bound, verdict, slack, first.c,
                       float(np.mean([r.delta1 for r in reports])), first.advisory_reason)


def rate_fit(Ts, values) -> float:
    """Least-squares slope of ln(value) against ln(T)."""
    Ts = np.asarray(Ts, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if len(Ts) < 3 or len(Ts) != len(v):
        raise InputError("rate fit needs at least 3 (T, value) pairs")
    if np.any(v <= 0) or np.any(Ts <= 0):
        raise DomainError("rate fit needs positive T and values")
    slope, _ = np.polyfit(np.log(Ts), np.log(v), 1)
    return float(slope)
