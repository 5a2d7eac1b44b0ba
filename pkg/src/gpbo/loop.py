"""Synchronous batch BO controller (preliminary protocol).

After the initial design is consumed, each batch slot is an independent
acquisition restart, with a ``random_prob`` chance of a uniform random
suggestion instead. Pending points are not fantasized; duplicates are
rejected and retried.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .acq import AcqParams, optimize_acquisition
from .errors import InvalidInputError, ProtocolViolationError
from .gp import GPModel, KernelParams, fit
from .history import History, Observation, Source
from .initdesign import InitDesignParams, random_explore_first
from .runlog import RunReport, fmt, running_best
from .space import Configuration, Space, sample_random

logger = logging.getLogger(__name__)

# Above this size, unseen-point fallback never enumerates the grid.
ENUMERATION_LIMIT = 1_000_000


@dataclass(frozen=True)
class LoopParams:
    batch_size: int = 5
    random_prob: float = 0.10
    max_dedupe_attempts: int = 100
    init: InitDesignParams = field(default_factory=InitDesignParams)
    acq: AcqParams = field(default_factory=AcqParams)
    # False keeps the kernel at ``kernel_params`` (or the defaults) instead of MLE.
    fit_kernel: bool = True
    kernel_params: KernelParams | None = None
    random_search: bool = False

    def __post_init__(self):
        if not 0.0 <= self.random_prob <= 1.0:
            raise InvalidInputError(f"random_prob must lie in [0, 1], got {self.random_prob}")
        if self.batch_size < 1:
            raise InvalidInputError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_dedupe_attempts < 1:
            raise InvalidInputError("max_dedupe_attempts must be >= 1")


class Controller:
    """Stateful ask/tell optimizer over a discrete space (minimizes loss)."""

    def __init__(self, space: Space, params: LoopParams | None = None, seed=None):
        self.space = space
        self.params = params or LoopParams()
        self.rng = np.random.default_rng(seed)
        self.history = History()
        self._init_queue: list[Configuration] | None = None
        self._model: GPModel | None = None
        self._stale = True
        self.n_fits = 0

    @property
    def initialized(self) -> bool:
        return self._init_queue is not None and not self._init_queue

    def _ensure_init_design(self):
        if self._init_queue is None:
            if self.params.random_search:
                self._init_queue = []
            else:
                self._init_queue = list(random_explore_first(self.space, self.params.init, self.rng))

    def model(self) -> GPModel:
        """Surrogate fitted on every observation so far, refitted only when stale."""
        if not self.history.observations:
            raise InvalidInputError("no observations to fit")
        if self._stale or self._model is None:
            obs = self.history.observations
            self._model = fit(
                [o.config for o in obs],
                self.space,
                [o.loss for o in obs],
                seed=int(self.rng.integers(2**32)),
                params=self.params.kernel_params,
                optimize=self.params.fit_kernel,
            )
            self._stale = False
            self.n_fits += 1
        return self._model

    def _random_unseen(self, taken: set[Configuration]) -> Configuration | None:
        for c in sample_random(self.space, self.rng, 100):
            if c not in taken:
                return c
        if self.space.size > ENUMERATION_LIMIT:
            return None
        free = [c for c in self.space.all_configurations() if c not in taken]
        if not free:
            return None
        return free[int(self.rng.integers(len(free)))]

    def _suggest_one(self, taken: set[Configuration]) -> tuple[Configuration, Source] | None:
        while self._init_queue:
            c = self._init_queue.pop(0)
            if c not in taken:
                return c, Source.INITIAL
        if self.params.random_search or not self.history.observations:
            c = self._random_unseen(taken)
            return None if c is None else (c, Source.RANDOM)

        use_random = self.rng.random() < self.params.random_prob
        for _ in range(self.params.max_dedupe_attempts):
            if use_random:
                c = sample_random(self.space, self.rng, 1)[0]
            else:
                c = optimize_acquisition(
                    self.model(), self.history, self.space, self.params.acq, self.rng, exclude=taken
                )
            if c is not None and c not in taken:
                return c, Source.RANDOM if use_random else Source.MODEL
        logger.debug("dedupe attempts exhausted, falling back to random unseen")
        c = self._random_unseen(taken)
        return None if c is None else (c, Source.RANDOM)

    def suggest_batch(self, k: int | None = None) -> list[Configuration]:
        """Up to ``k`` distinct unseen configurations; fewer only if the space is exhausted."""
        k = self.params.batch_size if k is None else k
        self._ensure_init_design()
        taken = self.history.seen()
        batch = []
        for _ in range(k):
            if len(taken) >= self.space.size:
                break
            got = self._suggest_one(taken)
            if got is None:
                break
            c, source = got
            taken.add(c)
            self.history.add_pending(c, source)
            batch.append(c)
        return batch

    def source_of(self, c: Configuration) -> Source:
        return self.history.pending[c]

    def observe(self, config: Configuration, loss: float, source=None, force: bool = False) -> Observation:
        if not math.isfinite(loss):
            raise InvalidInputError(f"loss must be finite, got {loss}")
        if config in self.history.pending:
            pending_source = self.history.pending.pop(config)
        elif force:
            self.space.validate(config)
            if any(o.config == config for o in self.history.observations):
                raise ProtocolViolationError(f"{config} already observed")
            pending_source = Source.RANDOM
        else:
            raise ProtocolViolationError(f"{config} was not suggested or was already observed")
        obs = Observation(config, float(loss), Source(source) if source is not None else pending_source)
        self.history.observations.append(obs)
        self._stale = True
        return obs

    def best_so_far(self) -> float:
        return self.history.best_so_far()


def run_preliminary(problem, budget: int, params: LoopParams | None = None, seed=None) -> RunReport:
    """Suggest, evaluate, observe in synchronous batches until ``budget`` evaluations."""
    params = params or LoopParams()
    if budget < 0:
        raise InvalidInputError(f"budget must be non-negative, got {budget}")
    ctl = Controller(problem.space, params, seed)
    records, rewards = [], []
    batch_no = 0
    while len(rewards) < budget:
        batch = ctl.suggest_batch(min(params.batch_size, budget - len(rewards)))
        if not batch:
            break
        # Evaluate the whole batch before any observation: synchronous protocol.
        results = [(c, ctl.source_of(c), problem.evaluate_full(c)) for c in batch]
        for slot, (c, source, reward) in enumerate(results):
            ctl.observe(c, -reward)
            rewards.append(reward)
            records.append({
                "record": "observation",
                "batch": batch_no,
                "slot": slot,
                "indices": list(c.indices),
                "loss": fmt(-reward),
                "reward": fmt(reward),
                "source": source.value,
            })
        batch_no += 1
    meta = {
        "protocol": "preliminary",
        "problem": problem.name,
        "grid": [int(n) for n in problem.space.cardinalities],
        "seed": seed,
        "budget": budget,
        "batch_size": params.batch_size,
        "random_search": params.random_search,
    }
    return RunReport(
        protocol="preliminary",
        meta=meta,
        records=records,
        best_so_far=running_best(rewards),
        counts={"evaluations": len(rewards), "batches": batch_no},
        history=ctl.history,
    )
