"""Synthetic grid problems and their partial-evaluation noise model.

A partial reward at iteration ``t <= 13`` is the true reward plus Gaussian
noise with std ``s1 / sqrt(t)``, reported with a ``±1.96 std`` interval.
The last iteration returns the true reward exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import InvalidConfigurationError, InvalidInputError
from ..fidelity import PartialReward
from ..space import Configuration, Space, indices_to_unit

Z95 = 1.959963984540054
TOTAL_ITERATIONS = 14
# Fraction of the empirical reward range used as the iteration-1 noise std.
DEFAULT_NOISE_FACTOR = 0.02
SCAN_LIMIT = 1_000_000


def branin(x: np.ndarray) -> np.ndarray:
    x1, x2 = x[..., 0], x[..., 1]
    b = 5.1 / (4 * math.pi**2)
    c = 5 / math.pi
    t = 1 / (8 * math.pi)
    return (x2 - b * x1**2 + c * x1 - 6) ** 2 + 10 * (1 - t) * np.cos(x1) + 10


def rosenbrock(x: np.ndarray) -> np.ndarray:
    return np.sum(100.0 * (x[..., 1:] - x[..., :-1] ** 2) ** 2 + (1 - x[..., :-1]) ** 2, axis=-1)


def ackley(x: np.ndarray) -> np.ndarray:
    d = x.shape[-1]
    s1 = np.sum(x * x, axis=-1) / d
    s2 = np.sum(np.cos(2 * math.pi * x), axis=-1) / d
    return -20 * np.exp(-0.2 * np.sqrt(s1)) - np.exp(s2) + 20 + math.e


# name -> (function, per-dimension domain, allowed dimension check)
FUNCTIONS: dict[str, tuple[Callable, Callable[[int], np.ndarray], Callable[[int], bool]]] = {
    "branin_grid": (branin, lambda d: np.array([[-5.0, 10.0], [0.0, 15.0]]), lambda d: d == 2),
    "rosenbrock_grid": (rosenbrock, lambda d: np.tile([-2.048, 2.048], (d, 1)), lambda d: d >= 2),
    "ackley_grid": (ackley, lambda d: np.tile([-32.768, 32.768], (d, 1)), lambda d: d >= 1),
}


@dataclass(frozen=True)
class Problem:
    name: str
    space: Space
    domain: np.ndarray = field(repr=False)
    func: Callable = field(repr=False)
    noise_base: float
    seed: int = 0
    reward_range: float = 1.0

    def rewards_at_indices(self, idx) -> np.ndarray:
        """True rewards (negated function values) for an array of index rows."""
        u = indices_to_unit(self.space, np.asarray(idx, dtype=float))
        lo, hi = self.domain[:, 0], self.domain[:, 1]
        return -self.func(lo + u * (hi - lo))

    def objective(self, c: Configuration) -> float:
        if not self.space.contains(c):
            raise InvalidConfigurationError(f"{c} is not in {self.space}")
        return float(self.rewards_at_indices(np.asarray(c.indices)[None, :])[0])

    def evaluate_full(self, c: Configuration) -> float:
        return self.objective(c)

    def noise_std(self, t: int) -> float:
        if not 1 <= t <= TOTAL_ITERATIONS:
            raise InvalidInputError(f"iteration must be in [1, {TOTAL_ITERATIONS}], got {t}")
        return 0.0 if t == TOTAL_ITERATIONS else self.noise_base / math.sqrt(t)

    def noise_stream(self, trial_key) -> np.random.Generator:
        """Independent noise generator for one trial."""
        return np.random.default_rng([int(self.seed), int(trial_key)])

    def evaluate_partial(
        self, c: Configuration, t: int, stream: np.random.Generator, trial_id: int = 0
    ) -> PartialReward:
        s = self.noise_std(t)
        truth = self.objective(c)
        if t == TOTAL_ITERATIONS:
            return PartialReward(trial_id, t, truth, truth, truth)
        r = truth + s * float(stream.standard_normal())
        return PartialReward(trial_id, t, r, r - Z95 * s, r + Z95 * s)

    def all_rewards(self) -> np.ndarray:
        """Rewards of every grid point, flattened in C order."""
        if self.space.size > SCAN_LIMIT:
            raise InvalidInputError(f"grid of {self.space.size} points is too large to scan")
        grids = np.meshgrid(*[np.arange(n) for n in self.space.cardinalities], indexing="ij")
        return self.rewards_at_indices(np.stack([g.ravel() for g in grids], axis=1))

    def grid_optimum(self) -> float:
        return float(np.max(self.all_rewards()))


def parse_grid(text: str) -> tuple[int, ...]:
    try:
        shape = tuple(int(p) for p in text.lower().split("x"))
    except ValueError as exc:
        raise InvalidInputError(f"malformed grid {text!r}, expected e.g. 50x50") from exc
    if not shape or any(n < 1 for n in shape):
        raise InvalidInputError(f"malformed grid {text!r}")
    return shape


def make_problem(
    name: str,
    grid=(50, 50),
    seed: int = 0,
    noise_base: float | None = None,
    noise_factor: float = DEFAULT_NOISE_FACTOR,
) -> Problem:
    if name not in FUNCTIONS:
        raise InvalidInputError(f"unknown problem {name!r}; choose from {sorted(FUNCTIONS)}")
    if isinstance(grid, str):
        grid = parse_grid(grid)
    func, domain, dim_ok = FUNCTIONS[name]
    d = len(grid)
    if not dim_ok(d):
        raise InvalidInputError(f"{name} does not support {d} dimensions")
    space = Space.from_shape(grid)
    probe = Problem(name, space, domain(d), func, 0.0, seed)
    if space.size <= SCAN_LIMIT:
        rewards = probe.all_rewards()
    else:
        rng = np.random.default_rng(seed)
        rewards = probe.rewards_at_indices(rng.integers(0, space.cardinalities, size=(100_000, d)))
    reward_range = float(np.max(rewards) - np.min(rewards))
    if noise_base is None:
        noise_base = noise_factor * reward_range
    if noise_base < 0:
        raise InvalidInputError("noise_base must be non-negative")
    return Problem(name, space, domain(d), func, float(noise_base), seed, reward_range)


def evaluate_full(problem: Problem, c: Configuration) -> float:
    return problem.evaluate_full(c)


def evaluate_partial(
    problem: Problem, c: Configuration, t: int, stream: np.random.Generator, trial_id: int = 0
) -> PartialReward:
    return problem.evaluate_partial(c, t, stream, trial_id)
