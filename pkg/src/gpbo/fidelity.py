"""Multi-fidelity controller for the 14-iteration (final) protocol.

Trials run one at a time. Once enough trials have completed, a trial whose
reward at the decision iteration falls strictly below the median of all
rewards recorded at that iteration is stopped, and the surrogate receives the
median completed final reward in its place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

import numpy as np

from .errors import InvalidInputError, NotReadyError
from .history import History, Source
from .loop import Controller, LoopParams
from .runlog import RunReport, fmt
from .space import Configuration


class Decision(str, Enum):
    CONTINUE = "continue"
    STOP = "stop"


class TrialStatus(str, Enum):
    RUNNING = "running"
    STOPPED = "stopped"
    COMPLETED = "completed"


@dataclass(frozen=True)
class PartialReward:
    trial_id: int
    iteration: int
    reward: float
    ci_lower: float
    ci_upper: float

    def __post_init__(self):
        if not self.ci_lower <= self.reward <= self.ci_upper:
            raise InvalidInputError(
                f"reward {self.reward} outside its interval [{self.ci_lower}, {self.ci_upper}]"
            )


@dataclass
class TrialState:
    trial_id: int
    config: Configuration
    source: Source = Source.MODEL
    partials: list[PartialReward] = field(default_factory=list)
    status: TrialStatus = TrialStatus.RUNNING
    budget_truncated: bool = False
    loss: float | None = None

    @property
    def last_iteration(self) -> int:
        return self.partials[-1].iteration if self.partials else 0

    @property
    def final_reward(self) -> float:
        if self.status is not TrialStatus.COMPLETED:
            raise NotReadyError(f"trial {self.trial_id} has no final reward")
        return self.partials[-1].reward

    def reward_at(self, iteration: int) -> float | None:
        for p in self.partials:
            if p.iteration == iteration:
                return p.reward
        return None


@dataclass(frozen=True)
class FidelityParams:
    full_evals_before_stopping: float = 40
    decision_iteration: int = 7
    total_iterations: int = 14
    fidelity_budget: int = 700

    def __post_init__(self):
        if not 1 <= self.decision_iteration < self.total_iterations:
            raise InvalidInputError("need 1 <= decision_iteration < total_iterations")
        if self.full_evals_before_stopping < 0:
            raise InvalidInputError("full_evals_before_stopping must be >= 0")
        if self.fidelity_budget < 0:
            raise InvalidInputError("fidelity_budget must be >= 0")

    @classmethod
    def without_stopping(cls, **kw) -> "FidelityParams":
        return cls(full_evals_before_stopping=math.inf, **kw)


@dataclass
class StoppingState:
    """Everything the stopping rule looks at."""

    params: FidelityParams = field(default_factory=FidelityParams)
    completed: int = 0
    decision_rewards: dict[int, float] = field(default_factory=dict)

    @property
    def active(self) -> bool:
        return self.completed >= self.params.full_evals_before_stopping

    def record(self, latest: PartialReward) -> None:
        if latest.iteration == self.params.decision_iteration:
            self.decision_rewards[latest.trial_id] = latest.reward


def should_stop(state: StoppingState, trial: TrialState, latest: PartialReward) -> Decision:
    if latest.trial_id != trial.trial_id:
        raise InvalidInputError("partial reward belongs to another trial")
    if not state.active or latest.iteration != state.params.decision_iteration:
        return Decision.CONTINUE
    pool = dict(state.decision_rewards)
    pool[latest.trial_id] = latest.reward
    # Ties with the median continue.
    if latest.reward < float(np.median(list(pool.values()))):
        return Decision.STOP
    return Decision.CONTINUE


def impute_stopped(history: History | None, trials: Iterable[TrialState]) -> float:
    """Loss to record for a stopped trial: minus the median completed final reward."""
    finals = [t.final_reward for t in trials if t.status is TrialStatus.COMPLETED]
    if not finals:
        raise NotReadyError("no completed trials to impute from")
    return -float(np.median(finals))


def run_final(
    problem,
    params: FidelityParams | None = None,
    loop_params: LoopParams | None = None,
    seed=None,
) -> RunReport:
    params = params or FidelityParams()
    loop_params = loop_params or LoopParams()
    ctl = Controller(problem.space, loop_params, seed)
    state = StoppingState(params)
    trials: list[TrialState] = []
    records: list[dict] = []
    curve_x, curve = [], []
    best = -math.inf
    used = 0

    while True:
        left = params.fidelity_budget - used
        # A new trial must be able to reach the point where policy lets it end.
        need = params.decision_iteration if state.active else params.total_iterations
        if left < max(1, need):
            break
        batch = ctl.suggest_batch(1)
        if not batch:
            break
        c = batch[0]
        trial = TrialState(len(trials), c, ctl.source_of(c))
        trials.append(trial)
        stream = problem.noise_stream(trial.trial_id)

        for t in range(1, params.total_iterations + 1):
            if used >= params.fidelity_budget:
                trial.status = TrialStatus.STOPPED
                trial.budget_truncated = True
                break
            p = problem.evaluate_partial(c, t, stream, trial_id=trial.trial_id)
            used += 1
            trial.partials.append(p)
            decision = should_stop(state, trial, p)
            state.record(p)
            records.append({
                "record": "partial",
                "trial_id": trial.trial_id,
                "iteration": t,
                "reward": fmt(p.reward),
                "ci_lower": fmt(p.ci_lower),
                "ci_upper": fmt(p.ci_upper),
                "decision": decision.value,
            })
            if decision is Decision.STOP:
                trial.status = TrialStatus.STOPPED
                break
        else:
            trial.status = TrialStatus.COMPLETED

        if trial.status is TrialStatus.COMPLETED:
            trial.loss = -trial.final_reward
            ctl.observe(c, trial.loss)
            state.completed += 1
            best = max(best, trial.final_reward)
            curve_x.append(used)
            curve.append(best)
        elif any(t.status is TrialStatus.COMPLETED for t in trials):
            trial.loss = impute_stopped(ctl.history, trials)
            ctl.observe(c, trial.loss, source=Source.IMPUTED)
        else:
            # Nothing to impute from yet; the trial leaves no observation.
            ctl.history.pending.pop(c)

        records.append({
            "record": "trial",
            "trial_id": trial.trial_id,
            "status": trial.status.value,
            "final_or_imputed_loss": None if trial.loss is None else fmt(trial.loss),
            "indices": list(c.indices),
            "source": trial.source.value,
            "budget_truncated": trial.budget_truncated,
            "true_final_reward": fmt(problem.evaluate_full(c)),
            "units_used": used,
        })

    n_trunc = sum(t.budget_truncated for t in trials)
    counts = {
        "attempted": len(trials),
        "completed": sum(t.status is TrialStatus.COMPLETED for t in trials),
        "stopped": sum(t.status is TrialStatus.STOPPED and not t.budget_truncated for t in trials),
        "truncated": n_trunc,
        "units_used": used,
    }
    meta = {
        "protocol": "final",
        "problem": problem.name,
        "grid": [int(n) for n in problem.space.cardinalities],
        "seed": seed,
        "budget": params.fidelity_budget,
        "full_evals_before_stopping": (
            None if math.isinf(params.full_evals_before_stopping) else params.full_evals_before_stopping
        ),
        "decision_iteration": params.decision_iteration,
        "total_iterations": params.total_iterations,
        "random_search": loop_params.random_search,
    }
    return RunReport(
        protocol="final",
        meta=meta,
        records=records,
        best_so_far=curve,
        counts=counts,
        history=ctl.history,
        consistency_stats=trace_rates(trials, params.decision_iteration),
        trials=trials,
        curve_x=curve_x,
    )


def trace_rates(trials: list[TrialState], iteration: int = 7) -> dict:
    """Coverage, exceedance and order consistency measured on completed trials."""
    done = [t for t in trials if t.status is TrialStatus.COMPLETED]
    inside = above = total = 0
    for t in done:
        final = t.final_reward
        for p in t.partials[:-1]:
            total += 1
            inside += p.ci_lower <= final <= p.ci_upper
            above += final > p.reward
    pairs = agree = 0
    for i in range(len(done)):
        for j in range(i + 1, len(done)):
            a, b = done[i], done[j]
            pa, pb = a.reward_at(iteration), b.reward_at(iteration)
            if pa is None or pb is None or a.final_reward == b.final_reward:
                continue
            pairs += 1
            agree += (pa > pb) == (a.final_reward > b.final_reward)
    return {
        "coverage": inside / total if total else None,
        "exceedance": above / total if total else None,
        "consistency": agree / pairs if pairs else None,
    }
