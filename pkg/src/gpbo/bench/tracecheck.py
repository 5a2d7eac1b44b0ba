"""Independent audit of final-protocol traces.

Re-derives the stopping-policy and imputation invariants from the trace
lines alone, without touching the controller code.
"""

from __future__ import annotations

import statistics

from .runfiles import RunFile


def _median(xs):
    return statistics.median(xs)


def check_final_trace(run: RunFile, warmup: int = 40, decision_iteration: int = 7,
                      budget: int | None = None, rel_tol: float = 1e-8) -> list[str]:
    """Return a list of violations (empty when the trace is clean)."""
    problems = []
    completed_finals: list[float] = []
    stop_seen: dict[int, int] = {}
    terminal: dict[int, int] = {}
    decision_pool: dict[int, float] = {}
    units = 0

    for rec in run.records:
        kind = rec["record"]
        if kind == "partial":
            units += 1
            tid = rec["trial_id"]
            if rec["iteration"] == decision_iteration:
                decision_pool[tid] = rec["reward"]
            if rec["decision"] == "stop":
                stop_seen[tid] = stop_seen.get(tid, 0) + 1
                if len(completed_finals) < warmup:
                    problems.append(f"trial {tid}: stopped after only {len(completed_finals)} completions")
                if rec["iteration"] != decision_iteration:
                    problems.append(f"trial {tid}: stopped at iteration {rec['iteration']}")
                elif not rec["reward"] < _median(decision_pool.values()):
                    problems.append(f"trial {tid}: stopped without being below the median")
        elif kind == "trial":
            tid = rec["trial_id"]
            terminal[tid] = terminal.get(tid, 0) + 1
            loss = rec["final_or_imputed_loss"]
            if rec["status"] == "completed":
                completed_finals.append(-loss)
            elif rec["status"] == "stopped" and loss is not None:
                expected = -_median(completed_finals) if completed_finals else None
                if expected is None or abs(loss - expected) > rel_tol * max(1.0, abs(expected)):
                    problems.append(f"trial {tid}: imputed {loss}, expected {expected}")
            if rec["status"] == "stopped" and not rec.get("budget_truncated") and stop_seen.get(tid) != 1:
                problems.append(f"trial {tid}: stopped without exactly one stop decision")

    for tid, n in terminal.items():
        if n != 1:
            problems.append(f"trial {tid}: {n} terminal records")
    for tid in stop_seen:
        if tid not in terminal:
            problems.append(f"trial {tid}: stopped but never imputed")
    if budget is not None and units > budget:
        problems.append(f"{units} fidelity units used, budget {budget}")
    return problems
