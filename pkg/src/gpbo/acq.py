"""Expected Improvement and its maximization over a discrete space."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Container

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr

from .errors import InvalidInputError
from .gp import GPModel, predict_unit
from .history import History
from .space import (
    Configuration,
    Space,
    from_unit,
    indices_to_unit,
    one_exchange_neighbors,
    sample_random,
)

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class AcqParams:
    n_mc: int = 2000
    n_incumbents: int = 5
    per_dim_neighbors: int = 1
    n_starts: int = 10
    sigma_floor: float = 1e-12

    def __post_init__(self):
        for name in ("n_mc", "n_incumbents", "per_dim_neighbors", "n_starts"):
            if getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must be >= 1")
        if not self.sigma_floor > 0:
            raise InvalidInputError("sigma_floor must be positive")


def ei_array(mean, std, y_min: float, sigma_floor: float = 1e-12) -> np.ndarray:
    """Vectorized EI for minimization. No input validation."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    improve = y_min - mean
    safe = np.where(std > sigma_floor, std, 1.0)
    zed = improve / safe
    ei = improve * ndtr(zed) + safe * INV_SQRT_2PI * np.exp(-0.5 * zed * zed)
    ei = np.where(std > sigma_floor, ei, np.maximum(improve, 0.0))
    return np.maximum(ei, 0.0)


def expected_improvement(mean: float, std: float, y_min: float, sigma_floor: float = 1e-12) -> float:
    if not all(math.isfinite(v) for v in (mean, std, y_min)):
        raise InvalidInputError(f"non-finite EI input: mean={mean}, std={std}, y_min={y_min}")
    if std < 0:
        raise InvalidInputError(f"std must be non-negative, got {std}")
    return float(ei_array(mean, std, y_min, sigma_floor))


def ei_at_unit(model: GPModel, U: np.ndarray, y_min: float, sigma_floor: float = 1e-12) -> np.ndarray:
    mean, var = predict_unit(model, U)
    return ei_array(mean, np.sqrt(var), y_min, sigma_floor)


@dataclass
class AcqResult:
    """Winner of one acquisition optimization plus the scores backing it."""

    config: Configuration | None
    ei: float
    candidates: list[Configuration]
    candidate_ei: np.ndarray
    refined: list[Configuration]
    refined_ei: np.ndarray


def optimize_acquisition(
    model: GPModel,
    history: History,
    space: Space,
    params: AcqParams,
    rng: np.random.Generator,
    exclude: Container[Configuration] | None = None,
) -> Configuration | None:
    """Configuration with the largest EI found by :func:`maximize_ei`."""
    return maximize_ei(model, history, space, params, rng, exclude).config


def maximize_ei(
    model: GPModel,
    history: History,
    space: Space,
    params: AcqParams,
    rng: np.random.Generator,
    exclude: Container[Configuration] | None = None,
) -> AcqResult:
    """Score MC samples and incumbent neighbors by EI, refine the best with L-BFGS-B.

    Refined points are rounded back onto the grid and re-scored, so the
    winner is never worse than the best discrete candidate. Configurations in
    ``exclude`` are never returned; if every candidate is excluded the result
    has ``config=None``.
    """
    if not history.observations:
        raise InvalidInputError("acquisition needs at least one observation")
    y_min = history.y_min()
    incumbents = history.incumbents(params.n_incumbents)
    candidates = sample_random(space, rng, params.n_mc)
    for inc in incumbents:
        candidates += one_exchange_neighbors(space, inc, rng, params.per_dim_neighbors)

    cand_idx = np.array([c.indices for c in candidates], dtype=float)
    cand_unit = indices_to_unit(space, cand_idx)
    cand_ei = ei_at_unit(model, cand_unit, y_min, params.sigma_floor)
    allowed = np.array([exclude is None or c not in exclude for c in candidates])
    score = np.where(allowed, cand_ei, -np.inf)

    # Stable sort keeps candidate order among ties.
    order = np.argsort(-score, kind="stable")[: min(params.n_starts, int(allowed.sum()))]
    bounds = [(0.0, 1.0)] * space.dim

    def neg_ei(u):
        return -float(ei_at_unit(model, u[None, :], y_min, params.sigma_floor)[0])

    refined = []
    for i in order:
        try:
            res = minimize(neg_ei, cand_unit[i], method="L-BFGS-B", bounds=bounds,
                           options={"maxiter": 100})
            u = res.x if np.all(np.isfinite(res.x)) else cand_unit[i]
        except (ValueError, ArithmeticError, np.linalg.LinAlgError):
            u = cand_unit[i]
        refined.append(from_unit(space, u))

    if refined:
        ref_unit = indices_to_unit(space, np.array([c.indices for c in refined], dtype=float))
        ref_ei = ei_at_unit(model, ref_unit, y_min, params.sigma_floor)
        ref_score = np.array([e if exclude is None or c not in exclude else -np.inf
                              for c, e in zip(refined, ref_ei)])
    else:
        ref_ei = ref_score = np.empty(0)

    if not allowed.any():
        return AcqResult(None, -np.inf, candidates, cand_ei, refined, ref_ei)
    best_c = candidates[int(np.argmax(score))]
    best_ei = float(np.max(score))
    if len(ref_score) and float(np.max(ref_score)) > best_ei:
        j = int(np.argmax(ref_score))
        best_c, best_ei = refined[j], float(ref_score[j])
    return AcqResult(best_c, best_ei, candidates, cand_ei, refined, ref_ei)
