"""Monte Carlo checks of the partial-evaluation noise model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from ..space import Configuration
from .problems import SCAN_LIMIT, TOTAL_ITERATIONS, Problem


@dataclass
class ConsistencyResult:
    all_pairs: float
    top: float | None
    n_sample: int
    n_top: int


def _order_rank(values: np.ndarray) -> np.ndarray:
    # Ties broken by sample position so the order is strict.
    return np.lexsort((np.arange(len(values)), values))


def pair_consistency(partial: np.ndarray, final: np.ndarray) -> float:
    """Fraction of pairs ordered the same way by ``partial`` and ``final``."""
    n = len(final)
    if n < 2:
        raise InvalidInputError("need at least two configurations")
    rp = np.empty(n, dtype=np.int64)
    rf = np.empty(n, dtype=np.int64)
    rp[_order_rank(partial)] = np.arange(n)
    rf[_order_rank(final)] = np.arange(n)
    iu = np.triu_indices(n, 1)
    same = np.sign(rp[iu[0]] - rp[iu[1]]) == np.sign(rf[iu[0]] - rf[iu[1]])
    return float(np.mean(same))


def _partials(problem: Problem, truth: np.ndarray, t: int, rng) -> np.ndarray:
    s = problem.noise_std(t)
    return truth + s * rng.standard_normal(len(truth))


def measure_consistency(
    problem: Problem,
    sample: int = 200,
    t: int = 7,
    seed: int = 0,
    top_frac: float = 0.01,
    top_repeats: int = 20,
) -> ConsistencyResult:
    """Order consistency between iteration-``t`` partial rewards and final rewards.

    ``all_pairs`` uses ``sample`` random distinct configurations. ``top``
    restricts to the best ``top_frac`` of the search space (exhaustive scan
    where feasible), averaged over ``top_repeats`` independent noise draws.
    """
    if sample < 2:
        raise InvalidInputError("sample must be >= 2")
    rng = np.random.default_rng(seed)
    size = problem.space.size
    if size <= SCAN_LIMIT:
        flat = rng.choice(size, size=min(sample, size), replace=False)
        idx = np.stack(np.unravel_index(flat, tuple(problem.space.cardinalities)), axis=1)
    else:
        idx = rng.integers(0, problem.space.cardinalities, size=(sample, problem.space.dim))
    truth = problem.rewards_at_indices(idx)
    all_pairs = pair_consistency(_partials(problem, truth, t, rng), truth)

    if size <= SCAN_LIMIT:
        pool = problem.all_rewards()
    else:
        pool = problem.rewards_at_indices(
            rng.integers(0, problem.space.cardinalities, size=(100_000, problem.space.dim))
        )
    n_top = max(2, math.ceil(top_frac * len(pool)))
    top_truth = np.sort(pool)[::-1][:n_top] if len(pool) >= 2 else None
    top = None
    if top_truth is not None and len(top_truth) >= 2:
        top = float(np.mean([
            pair_consistency(_partials(problem, top_truth, t, rng), top_truth)
            for _ in range(top_repeats)
        ]))
    return ConsistencyResult(all_pairs, top, len(truth), 0 if top_truth is None else len(top_truth))


def verify_noise(problem: Problem, draws: int = 10_000, seed: int = 0, consistency_sample: int = 200) -> dict:
    """Coverage, exceedance and CI width per iteration, plus iteration-7 consistency.

    Each iteration ``t <= 13`` gets ``draws`` partial evaluations of one fixed
    random configuration, each from its own noise stream.
    """
    if draws < 1:
        raise InvalidInputError("draws must be >= 1")
    rng = np.random.default_rng(seed)
    c = Configuration(rng.integers(0, problem.space.cardinalities))
    truth = problem.evaluate_full(c)
    per_iteration = []
    key = 0
    for t in range(1, TOTAL_ITERATIONS):
        inside = above = 0
        width = 0.0
        for _ in range(draws):
            p = problem.evaluate_partial(c, t, problem.noise_stream(key))
            key += 1
            inside += p.ci_lower <= truth <= p.ci_upper
            above += truth > p.reward
            width = p.ci_upper - p.ci_lower
        per_iteration.append({
            "iteration": t,
            "coverage": inside / draws,
            "exceedance": above / draws,
            "ci_width": width,
        })
    cons = measure_consistency(problem, consistency_sample, 7, seed)
    widths = [row["ci_width"] for row in per_iteration]
    return {
        "problem": problem.name,
        "config": list(c.indices),
        "draws": draws,
        "coverage": float(np.mean([r["coverage"] for r in per_iteration])),
        "exceedance": float(np.mean([r["exceedance"] for r in per_iteration])),
        "widths_strictly_decreasing": all(a > b for a, b in zip(widths, widths[1:])),
        "consistency_t7": cons.all_pairs,
        "consistency_t7_top1pct": cons.top,
        "per_iteration": per_iteration,
    }
