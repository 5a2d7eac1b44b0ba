"""Observation records (the data set the surrogate is fitted on)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import InvalidInputError, ProtocolViolationError
from .space import Configuration


class Source(str, Enum):
    INITIAL = "initial"
    MODEL = "model"
    RANDOM = "random"
    IMPUTED = "imputed"


@dataclass(frozen=True)
class Observation:
    config: Configuration
    loss: float
    source: Source

    def __post_init__(self):
        if not math.isfinite(self.loss):
            raise InvalidInputError(f"loss must be finite, got {self.loss}")
        object.__setattr__(self, "source", Source(self.source))


@dataclass
class History:
    observations: list[Observation] = field(default_factory=list)
    pending: dict[Configuration, Source] = field(default_factory=dict)

    def __len__(self):
        return len(self.observations)

    def seen(self) -> set[Configuration]:
        return {o.config for o in self.observations} | set(self.pending)

    def add_pending(self, c: Configuration, source: Source):
        if c in self.pending or any(o.config == c for o in self.observations):
            raise ProtocolViolationError(f"{c} already suggested or observed")
        self.pending[c] = Source(source)

    def real(self) -> list[Observation]:
        return [o for o in self.observations if o.source is not Source.IMPUTED]

    def y_min(self) -> float:
        """Best genuinely observed loss; imputed records only as a last resort."""
        pool = self.real() or self.observations
        if not pool:
            raise InvalidInputError("history has no observations")
        return min(o.loss for o in pool)

    def best_so_far(self) -> float:
        return min(o.loss for o in self.real())

    def incumbents(self, k: int) -> list[Configuration]:
        """The ``k`` best non-imputed configurations, best first (ties by age)."""
        ranked = sorted(enumerate(self.real()), key=lambda t: (t[1].loss, t[0]))
        return [o.config for _, o in ranked[:k]]
