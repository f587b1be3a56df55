"""Logarithmic step-size SGD with warm restarts: schedules, bounds and experiments."""

from .bounds import (
    TheoremInputs,
    corollary1_bound,
    corollary2_bound,
    lemma2_lower_bound,
    lemma3_upper_bound,
    theorem1_bound,
    verify_sum_bounds,
)
from .optimizer import RunConfig, RunTrace, grid_search, run
from .sampling import OutputDistribution, build_distribution, sample_iterate, tail_mass, weighted_grad_measure
from .schedules import StepSchedule, cosine_step, log_step, restart_table, warm_restart_index

__version__ = "0.1.0"
