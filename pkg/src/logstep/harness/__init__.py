from .experiment import build_problem, execute_experiment, load_config, method_configs
from .report import (
    BoundReport,
    RunSummary,
    bound_report,
    confidence_margin,
    rate_fit,
    seed_averaged,
    summarize,
)
from .traces import load_trace_dir, read_rows_csv, read_trace, write_rows_csv, write_trace

__all__ = [
    "BoundReport",
    "RunSummary",
    "bound_report",
    "build_problem",
    "confidence_margin",
    "execute_experiment",
    "load_config",
    "load_trace_dir",
    "method_configs",
    "rate_fit",
    "read_rows_csv",
    "read_trace",
    "seed_averaged",
    "summarize",
    "write_rows_csv",
    "write_trace",
]
