"""CSV tables from run files: best-so-far curves, trajectory bands, stop counts, rates."""

from __future__ import annotations

import csv
import glob as globmod
import math
from pathlib import Path

import numpy as np

from ..errors import ParseError
from ..runlog import running_best
from .runfiles import RunFile, read_run

N_TOP = 2
N_RANDOM = 8


def _g(x) -> str:
    if x is None:
        return ""
    return f"{float(x):.9g}"


def _write(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def best_so_far_rows(run: RunFile) -> list[list]:
    rows = []
    if run.protocol == "preliminary":
        curve = running_best([o["reward"] for o in run.observations()])
        rows += [[run.path, run.meta.get("seed", ""), "evaluations", i + 1, _g(v)] for i, v in enumerate(curve)]
    else:
        best, units = -math.inf, 0
        for rec in run.records:
            if rec["record"] == "partial":
                units += 1
            elif rec["record"] == "trial" and rec["status"] == "completed":
                best = max(best, -rec["final_or_imputed_loss"])
                rows.append([run.path, run.meta.get("seed", ""), "fidelity_units", units, _g(best)])
    return rows


def _completed_trajectories(run: RunFile) -> list[tuple[float, str, int, list[dict]]]:
    by_trial: dict[int, list[dict]] = {}
    for p in run.partials():
        by_trial.setdefault(p["trial_id"], []).append(p)
    out = []
    for t in run.trials():
        if t["status"] == "completed":
            out.append((-t["final_or_imputed_loss"], run.path, t["trial_id"], by_trial.get(t["trial_id"], [])))
    return out


def trajectory_rows(runs: list[RunFile], seed: int = 0) -> list[list]:
    """Upper/median/lower bands for the best 2 and 8 random completed trials."""
    pool = [tr for run in runs for tr in _completed_trajectories(run)]
    if len(pool) < N_TOP + N_RANDOM:
        return []
    order = sorted(range(len(pool)), key=lambda i: (-pool[i][0], i))
    top = order[:N_TOP]
    rest = order[N_TOP:]
    rng = np.random.default_rng(seed)
    chosen_rest = [rest[i] for i in sorted(rng.choice(len(rest), N_RANDOM, replace=False))]
    rows = []
    for group, members in (("top", top), ("random", chosen_rest)):
        for rank, i in enumerate(members):
            final, path, tid, partials = pool[i]
            for p in sorted(partials, key=lambda p: p["iteration"]):
                rows.append([group, rank, path, tid, p["iteration"],
                             _g(p["ci_upper"]), _g(p["reward"]), _g(p["ci_lower"]), _g(final)])
    return rows


def _rates(run: RunFile, iteration: int = 7) -> list:
    finals = {t["trial_id"]: -t["final_or_imputed_loss"] for t in run.trials() if t["status"] == "completed"}
    inside = above = total = 0
    at_it = {}
    for p in run.partials():
        f = finals.get(p["trial_id"])
        if f is None:
            continue
        if p["iteration"] == iteration:
            at_it[p["trial_id"]] = p["reward"]
        if p["iteration"] >= run.meta.get("total_iterations", 14):
            continue
        total += 1
        inside += p["ci_lower"] <= f <= p["ci_upper"]
        above += f > p["reward"]
    ids = sorted(at_it)
    agree = pairs = 0
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            fa, fb = finals[ids[a]], finals[ids[b]]
            if fa == fb:
                continue
            pairs += 1
            agree += (at_it[ids[a]] > at_it[ids[b]]) == (fa > fb)
    return [run.path,
            _g(inside / total) if total else "",
            _g(above / total) if total else "",
            _g(agree / pairs) if pairs else ""]


def build_report(paths: list[str], out_dir) -> dict[str, Path]:
    if not paths:
        raise ParseError("no run files matched")
    runs = [read_run(p) for p in sorted(paths)]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "best_so_far": out / "best_so_far.csv",
        "trajectories": out / "trajectories.csv",
        "early_stops": out / "early_stops.csv",
        "rates": out / "rates.csv",
    }
    _write(files["best_so_far"], ["run", "seed", "x_unit", "x", "best_reward"],
           [row for run in runs for row in best_so_far_rows(run)])
    _write(files["trajectories"],
           ["group", "rank", "run", "trial_id", "iteration", "upper", "median", "lower", "final_reward"],
           trajectory_rows([r for r in runs if r.protocol == "final"]))
    stop_rows = []
    for run in runs:
        if run.protocol != "final":
            continue
        trials = run.trials()
        truncated = sum(1 for t in trials if t.get("budget_truncated"))
        stopped = sum(1 for t in trials if t["status"] == "stopped") - truncated
        completed = sum(1 for t in trials if t["status"] == "completed")
        stop_rows.append([run.path, run.meta.get("seed", ""), len(trials), completed, stopped, truncated])
    _write(files["early_stops"], ["run", "seed", "attempted", "completed", "stopped", "truncated"], stop_rows)
    _write(files["rates"], ["run", "coverage", "exceedance", "consistency_t7"],
           [_rates(r) for r in runs if r.protocol == "final"])
    return files


def expand_glob(pattern: str) -> list[str]:
    return sorted(globmod.glob(pattern))
