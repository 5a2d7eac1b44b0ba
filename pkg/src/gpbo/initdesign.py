"""Greedy farthest-point initial design ("random_explore_first")."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .space import Configuration, Space, indices_to_unit


@dataclass(frozen=True)
class InitDesignParams:
    n_init: int = 10
    pool_size: int = 10000

    def __post_init__(self):
        if not 1 <= self.n_init <= self.pool_size:
            raise InvalidInputError(
                f"need 1 <= n_init <= pool_size, got n_init={self.n_init}, pool_size={self.pool_size}"
            )


@dataclass
class InitialDesign:
    """Selected configurations plus the candidate pool they came from.

    ``short`` is set when the space held fewer distinct points than requested.
    """

    configs: list[Configuration]
    pool: np.ndarray = field(repr=False)
    pool_order: list[int] = field(repr=False)
    short: bool = False

    def __len__(self):
        return len(self.configs)

    def __iter__(self):
        return iter(self.configs)

    def __getitem__(self, i):
        return self.configs[i]


def select_farthest(pool: np.ndarray, n: int, first: int) -> list[int]:
    """Greedy max-min selection over rows of ``pool``, starting from row ``first``.

    Ties go to the lowest pool position.
    """
    chosen = [first]
    min_dist = np.linalg.norm(pool - pool[first], axis=1)
    min_dist[first] = -1.0
    while len(chosen) < min(n, len(pool)):
        nxt = int(np.argmax(min_dist))
        chosen.append(nxt)
        min_dist = np.minimum(min_dist, np.linalg.norm(pool - pool[nxt], axis=1))
        min_dist[chosen] = -1.0
    return chosen


def random_explore_first(
    space: Space, params: InitDesignParams, rng: np.random.Generator
) -> InitialDesign:
    raw = rng.integers(0, space.cardinalities, size=(params.pool_size, space.dim))
    # Deduplicate, keeping first occurrences in draw order.
    _, first_pos = np.unique(raw, axis=0, return_index=True)
    raw = raw[np.sort(first_pos)]
    pool = indices_to_unit(space, raw)
    start = int(rng.integers(0, len(raw)))
    order = select_farthest(pool, params.n_init, start)
    configs = [Configuration(raw[i]) for i in order]
    return InitialDesign(configs, pool, order, short=len(configs) < params.n_init)
