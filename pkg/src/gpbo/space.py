"""Discrete, integer-indexed configuration spaces.

Every hyperparameter is an index over ``cardinality`` approximately
equidistant choices. Geometry (distances, the GP kernel) lives in the unit
cube, reached through :func:`to_unit` and :func:`from_unit`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidConfigurationError, InvalidInputError


@dataclass(frozen=True)
class HyperparameterDef:
    name: str
    cardinality: int

    def __post_init__(self):
        if not self.name:
            raise InvalidInputError("hyperparameter name must be non-empty")
        if int(self.cardinality) != self.cardinality or self.cardinality < 1:
            raise InvalidInputError(
                f"cardinality of {self.name!r} must be a positive integer, got {self.cardinality}"
            )


@dataclass(frozen=True)
class Configuration:
    """A point of a :class:`Space`, identified by its index vector."""

    indices: tuple[int, ...]

    def __init__(self, indices: Iterable[int]):
        object.__setattr__(self, "indices", tuple(int(i) for i in indices))

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __getitem__(self, i):
        return self.indices[i]

    def __repr__(self):
        return f"Configuration{self.indices}"


class Space:
    """Ordered collection of integer-indexed hyperparameters."""

    def __init__(self, dims: Sequence[HyperparameterDef]):
        dims = tuple(dims)
        if not dims:
            raise InvalidInputError("a space needs at least one dimension")
        names = [d.name for d in dims]
        if len(set(names)) != len(names):
            raise InvalidInputError(f"duplicate hyperparameter names in {names}")
        self.dims = dims
        self.cardinalities = np.array([d.cardinality for d in dims], dtype=np.int64)

    @classmethod
    def from_shape(cls, shape: Sequence[int], prefix: str = "x") -> "Space":
        return cls([HyperparameterDef(f"{prefix}{i}", int(n)) for i, n in enumerate(shape)])

    @classmethod
    def from_dict(cls, doc: dict) -> "Space":
        try:
            dims = [HyperparameterDef(str(d["name"]), d["cardinality"]) for d in doc["dims"]]
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed space document: {exc}") from exc
        return cls(dims)

    @classmethod
    def load(cls, path) -> "Space":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {"dims": [{"name": d.name, "cardinality": d.cardinality} for d in self.dims]}

    @property
    def dim(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        # Python ints do not overflow.
        return math.prod(int(n) for n in self.cardinalities)

    def __eq__(self, other):
        return isinstance(other, Space) and self.dims == other.dims

    def __hash__(self):
        return hash(self.dims)

    def __repr__(self):
        return f"Space({[d.cardinality for d in self.dims]})"

    def validate(self, c: Configuration) -> Configuration:
        if len(c) != self.dim:
            raise InvalidConfigurationError(
                f"configuration has {len(c)} indices, space has {self.dim} dimensions"
            )
        for i, (idx, n) in enumerate(zip(c.indices, self.cardinalities)):
            if not 0 <= idx < n:
                raise InvalidConfigurationError(
                    f"index {idx} out of range [0, {n - 1}] in dimension {self.dims[i].name!r}"
                )
        return c

    def contains(self, c: Configuration) -> bool:
        try:
            self.validate(c)
        except InvalidConfigurationError:
            return False
        return True

    def all_configurations(self) -> list[Configuration]:
        """Enumerate the whole grid (only sensible for small spaces)."""
        grids = np.meshgrid(*[np.arange(n) for n in self.cardinalities], indexing="ij")
        flat = np.stack([g.ravel() for g in grids], axis=1)
        return [Configuration(row) for row in flat]


def to_unit(space: Space, c: Configuration) -> np.ndarray:
    space.validate(c)
    return indices_to_unit(space, np.asarray(c.indices, dtype=float))


def indices_to_unit(space: Space, idx: np.ndarray) -> np.ndarray:
    """Vectorized index -> unit mapping for an array of shape (..., d)."""
    n = space.cardinalities
    denom = np.where(n > 1, n - 1, 1).astype(float)
    u = np.asarray(idx, dtype=float) / denom
    return np.where(n > 1, u, 0.5)


def from_unit(space: Space, u) -> Configuration:
    u = np.asarray(u, dtype=float)
    if u.shape != (space.dim,):
        raise InvalidInputError(f"expected unit vector of length {space.dim}, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise InvalidInputError(f"non-finite coordinate in {u}")
    scaled = np.clip(u, 0.0, 1.0) * (space.cardinalities - 1)
    # Values are non-negative, so floor(x + 0.5) rounds halves away from zero.
    return Configuration(np.floor(scaled + 0.5).astype(np.int64))


def sample_random(space: Space, rng: np.random.Generator, k: int) -> list[Configuration]:
    if k < 0:
        raise InvalidInputError(f"k must be non-negative, got {k}")
    if k == 0:
        return []
    idx = rng.integers(0, space.cardinalities, size=(k, space.dim))
    return [Configuration(row) for row in idx]


def one_exchange_neighbors(
    space: Space, c: Configuration, rng: np.random.Generator, per_dim: int = 1
) -> list[Configuration]:
    """Configurations that differ from ``c`` in exactly one coordinate.

    Dimensions with a single value contribute nothing.
    """
    space.validate(c)
    if per_dim < 1:
        raise InvalidInputError(f"per_dim must be >= 1, got {per_dim}")
    out = []
    for i, n in enumerate(space.cardinalities):
        if n == 1:
            continue
        for _ in range(per_dim):
            # Draw from the n - 1 alternatives, skipping the current value.
            v = int(rng.integers(0, n - 1))
            if v >= c.indices[i]:
                v += 1
            new = list(c.indices)
            new[i] = v
            out.append(Configuration(new))
    return out
