"""SGD engine with warm restarts, plus the Armijo and Adam baselines."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DivergenceError, DomainError, NoWinnerError
from .sampling import OutputDistribution, sample_iterate
from .schedules import PlateauState, StepSchedule, plateau_update, warm_restart_index

log = logging.getLogger(__name__)

METHODS = ("sgd", "sgd_armijo", "adam")
DIVERGENCE_LIMIT = 1e12
MAX_BACKTRACKS = 50
# coarse eta0 grid of the two-stage search
COARSE_GRID = (1e-5, 1e-4, 1e-3, 1e-2, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


@dataclass
class OptimizerState:
    x: np.ndarray
    velocity: np.ndarray
    cycle: int = 0
    inner_t: int = 1
    mu: float = 0.0
    # Adam moments, allocated on first use
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    k: int = 0

    @classmethod
    def initial(cls, x0, mu=0.0) -> "OptimizerState":
        if not 0 <= mu < 1:
            raise DomainError(f"momentum must lie in [0, 1), got {mu}")
        x = np.array(x0, dtype=np.float64)
        return cls(x=x, velocity=np.zeros_like(x), mu=mu)


def _require_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DivergenceError("non-finite value in optimizer state")


def sgd_step(state: OptimizerState, g, eta: float) -> OptimizerState:
    """One SGD update.

    With mu = 0 this is x <- x - eta g.  Otherwise the Nesterov form
    v <- mu v + g;  x <- x - eta (g + mu v).
    """
    g = np.asarray(g, dtype=np.float64)
    if eta < 0:
        raise DomainError(f"step size must be nonnegative, got {eta}")
    _require_finite(g)
    if state.mu == 0:
        x = state.x - eta * g
        v = state.velocity
    else:
        v = state.mu * state.velocity + g
        x = state.x - eta * (g + state.mu * v)
    _require_finite(x, v)
    return replace(state, x=x, velocity=v)


def adam_step(state: OptimizerState, g, eta, beta1=0.9, beta2=0.999, eps=1e-8) -> OptimizerState:
    """Bias-corrected Adam update."""
    if not (0 <= beta1 < 1 and 0 <= beta2 < 1) or eps <= 0:
        raise DomainError("Adam needs betas in [0, 1) and eps > 0")
    g = np.asarray(g, dtype=np.float64)
    _require_finite(g)
    m = np.zeros_like(g) if state.m is None else state.m
    v = np.zeros_like(g) if state.v is None else state.v
    k = state.k + 1
    m = beta1 * m + (1 - beta1) * g
    v = beta2 * v + (1 - beta2) * g * g
    m_hat = m / (1 - beta1**k)
    v_hat = v / (1 - beta2**k)
    x = state.x - eta * m_hat / (np.sqrt(v_hat) + eps)
    _require_finite(x)
    return replace(state, x=x, m=m, v=v, k=k)


@dataclass
class ArmijoResult:
    eta: float
    f0: float
    grad_norm_sq: float
    c_armijo: float
    trials: list = field(default_factory=list)  # (eta, f_trial) pairs in the order tried
    accepted: bool = True

    def satisfies(self, eta, f_trial) -> bool:
        return f_trial <= self.f0 - self.c_armijo * eta * self.grad_norm_sq


def armijo_search(component_value, x, g, eta_max, c_armijo=0.1, backtrack=0.5,
                  max_backtracks=MAX_BACKTRACKS) -> ArmijoResult:
    """Backtracking line search on the sampled component f_i that produced g.

    Returns the largest eta in {eta_max * backtrack^k} with
    f_i(x - eta g) <= f_i(x) - c * eta * ||g||^2.  After ``max_backtracks``
    failures the smallest trial is returned with ``accepted=False``.
    """
    if eta_max <= 0 or not 0 < backtrack < 1 or not 0 < c_armijo < 1:
        raise DomainError("Armijo search needs eta_max > 0, backtrack and c in (0, 1)")
    g = np.asarray(g, dtype=np.float64)
    res = ArmijoResult(eta_max, component_value(x), float(np.dot(g, g)), c_armijo)
    eta = eta_max
    for _ in range(max_backtracks + 1):
        f_trial = component_value(x - eta * g)
        res.trials.append((eta, f_trial))
        if res.satisfies(eta, f_trial):
            res.eta = eta
            return res
        eta *= backtrack
    res.eta = res.trials[-1][0]
    res.accepted = False
    return res


@dataclass(frozen=True)
class ArmijoParams:
    eta_max: float = 0.5
    c_armijo: float = 0.1
    backtrack: float = 0.5


@dataclass(frozen=True)
class AdamParams:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run besides the problem and the seed."""

    schedule: StepSchedule
    restarts: int = 1
    batches_per_epoch: int = 1
    mu: float = 0.9
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    method: str = "sgd"
    armijo: ArmijoParams = ArmijoParams()
    adam: AdamParams = AdamParams()
    reset_momentum: bool = False
    keep_armijo_log: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not 0 <= self.mu < 1:
            raise DomainError(f"momentum must lie in [0, 1), got {self.mu}")
        if self.restarts < 1 or self.batches_per_epoch < 1:
            raise DomainError("restarts and batches_per_epoch must be positive")
        if len(self.seeds) == 0:
            raise DomainError("at least one seed is required")
        if not 0 < self.armijo.c_armijo < 1:
            raise DomainError("c_armijo must lie in (0, 1)")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @property
    def T(self) -> int:
        return self.schedule.T

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schedule"]["milestones"] = list(self.schedule.milestones)
        d["seeds"] = list(self.seeds)
        d.pop("keep_armijo_log")
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


class TraceRow(NamedTuple):
    seed: int
    global_epoch: int
    cycle: int
    t: int
    eta: float
    train_loss: float
    grad_norm_sq: float
    val_metric: float


@dataclass
class RunTrace:
    """Per-epoch record of one run.

    Row ``k`` describes the iterate x_t at the *start* of global epoch k
    and the step size used during that epoch.  ``final_*`` fields describe
    the iterate after the last epoch.  ``sampled_iterate`` is the global
    epoch drawn with probability proportional to its step size.
    """

    fingerprint: str
    seed: int
    rows: list[TraceRow]
    status: str = "completed"
    failure: str | None = None
    sampled_iterate: int | None = None
    sampled_per_cycle: list[int] = field(default_factory=list)
    final_train_loss: float = math.nan
    final_val_metric: float = math.nan
    final_x: np.ndarray | None = None
    cycle_start_x: list[np.ndarray] = field(default_factory=list)
    armijo_warnings: int = 0
    armijo_log: list[ArmijoResult] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=np.float64)


def _diverged(f, gn):
    return not (math.isfinite(f) and math.isfinite(gn)) or f > DIVERGENCE_LIMIT


def draw_output_iterates(etas, T, restarts, rng):
    """Overall and per-cycle draws of the reported iterate (1-based global epochs)."""
    etas = np.asarray(etas, dtype=np.float64)
    overall = None
    if etas.sum() > 0:
        overall = sample_iterate(OutputDistribution.from_weights(etas), rng)
    per_cycle = []
    for i in range(restarts):
        chunk = etas[i * T:(i + 1) * T]
        if len(chunk) == T and chunk.sum() > 0:
            per_cycle.append(i * T + sample_iterate(OutputDistribution.from_weights(chunk), rng))
    return overall, per_cycle


def run(problem, oracle, config: RunConfig, seed: int = 0) -> RunTrace:
    """Run ``config.restarts`` cycles of ``T`` epochs each.

    The oracle is re-seeded with ``seed``; identical (config, seed) pairs
    give bit-identical traces.  A non-finite value or a loss above 1e12
    ends the run with status ``diverged`` and a truncated trace.
    """
    oracle = oracle.spawn(seed)
    schedule = config.schedule
    T, l = schedule.T, config.restarts
    trace = RunTrace(config.fingerprint(), seed, [])
    state = OptimizerState.initial(problem.x_init, config.mu)
    plateau = None
    etas = []
    try:
        for k in range(l * T):
            cycle, t = warm_restart_index(k, T)
            x = state.x
            f, g_full = problem.value_and_grad(x)
            gn = float(np.dot(g_full, g_full))
            if _diverged(f, gn):
                raise DivergenceError(f"loss {f} at global epoch {k + 1}")
            vm = problem.val_metric(x)
            if t == 1:
                trace.cycle_start_x.append(x.copy())
                if schedule.kind == "plateau":
                    plateau = PlateauState.from_schedule(schedule)
                if config.reset_momentum and cycle > 0:
                    state = replace(state, velocity=np.zeros_like(x), m=None, v=None, k=0)
            elif plateau is not None:
                plateau = plateau_update(plateau, f, schedule.alpha)
            eta = plateau.current_eta if plateau is not None else schedule.step(t)
            state = replace(state, cycle=cycle, inner_t=t)

            accepted = []
            try:
                for _ in range(config.batches_per_epoch):
                    sample = oracle.draw()
                    g = oracle.grad(state.x, sample)
                    if config.method == "sgd":
                        state = sgd_step(state, g, eta)
                    elif config.method == "adam":
                        a = config.adam
                        state = adam_step(state, g, eta, a.beta1, a.beta2, a.eps)
                    else:
                        res = armijo_search(lambda z: oracle.value(z, sample), state.x, g,
                                            config.armijo.eta_max, config.armijo.c_armijo,
                                            config.armijo.backtrack)
                        if not res.accepted:
                            trace.armijo_warnings += 1
                        if config.keep_armijo_log:
                            trace.armijo_log.append(res)
                        accepted.append(res.eta)
                        # plain step: the line search already picked the length
                        x_new = state.x - res.eta * g
                        _require_finite(x_new)
                        state = replace(state, x=x_new)
            finally:
                row_eta = float(np.mean(accepted)) if accepted else eta
                etas.append(row_eta)
                trace.rows.append(TraceRow(seed, k + 1, cycle, t, row_eta, f, gn, vm))
    except DivergenceError as exc:
        trace.status = "diverged"
        trace.failure = str(exc)
        log.warning("run diverged (seed %d): %s", seed, exc)
        return trace

    f_end = problem.value(state.x)
    if _diverged(f_end, 0.0):
        trace.status = "diverged"
        trace.failure = f"final loss {f_end}"
        return trace
    trace.final_x = state.x
    trace.final_train_loss = f_end
    trace.final_val_metric = problem.val_metric(state.x)
    rng = np.random.default_rng([seed, 0x5EED])
    trace.sampled_iterate, trace.sampled_per_cycle = draw_output_iterates(etas, T, l, rng)
    return trace


@dataclass
class GridResult:
    best_eta0: float
    table: list[dict]

    def ranked(self) -> list[dict]:
        return sorted(self.table, key=lambda r: (r["mean_val_loss"], r["eta0"]))


def _fine_points(center, radius, step):
    m = int(round(radius / step))
    pts = (round(center + j * step, 12) for j in range(-m, m + 1))
    return [p for p in pts if p > 0]


def evaluate_eta0(problem, oracle, template: RunConfig, eta0: float) -> dict:
    cfg = replace(template, schedule=template.schedule.with_eta0(eta0))
    losses = []
    diverged = 0
    for seed in cfg.seeds:
        tr = run(problem, oracle, cfg, seed)
        if tr.completed:
            losses.append(problem.validation_loss(tr.final_x))
        else:
            diverged += 1
    mean = math.inf if diverged or not losses else float(np.mean(losses))
    return {"eta0": eta0, "mean_val_loss": mean, "n_diverged": diverged, "losses": losses}


def grid_search(problem, oracle, template: RunConfig, coarse_grid: Sequence[float] = COARSE_GRID,
                fine_radius: float = 0.1, fine_step: float = 0.01) -> GridResult:
    """Two-stage search for eta0 minimizing the seed-mean validation loss.

    Stage 1 scans ``coarse_grid``; stage 2 scans +-fine_radius around the
    stage-1 winner in steps of ``fine_step``.  The winner is the minimum
    over every scanned point.  Runs that diverge score +inf.
    """
    if len(coarse_grid) == 0:
        raise DomainError("coarse grid is empty")
    table = []
    seen = set()
    for eta0 in coarse_grid:
        key = round(float(eta0), 12)
        if key not in seen:
            seen.add(key)
            table.append({**evaluate_eta0(problem, oracle, template, key), "stage": 1})
    stage1 = min(table, key=lambda r: (r["mean_val_loss"], r["eta0"]))
    if not math.isfinite(stage1["mean_val_loss"]):
        raise NoWinnerError("every coarse grid point diverged")
    if fine_step > 0 and fine_radius > 0:
        for eta0 in _fine_points(stage1["eta0"], fine_radius, fine_step):
            if eta0 not in seen:
                seen.add(eta0)
                table.append({**evaluate_eta0(problem, oracle, template, eta0), "stage": 2})
    best = min(table, key=lambda r: (r["mean_val_loss"], r["eta0"]))
    return GridResult(best["eta0"], table)
