"""Benchmark harness: synthetic problems, protocol simulators, reports."""

from .noise import ConsistencyResult, measure_consistency, verify_noise
from .problems import Problem, evaluate_full, evaluate_partial, make_problem
from .report import build_report
from .runfiles import RunFile, read_run
from .tracecheck import check_final_trace

__all__ = [
    "ConsistencyResult",
    "Problem",
    "RunFile",
    "build_report",
    "check_final_trace",
    "evaluate_full",
    "evaluate_partial",
    "make_problem",
    "measure_consistency",
    "read_run",
    "verify_noise",
]
