"""Run reports and their JSONL serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .history import History


def fmt(x: float) -> float:
    """Round a float to 9 significant digits for serialization."""
    x = float(x)
    if not math.isfinite(x):
        return x
    return float(f"{x:.9g}")


def dumps(record: dict) -> str:
    return json.dumps(record, separators=(", ", ": "))


@dataclass
class RunReport:
    protocol: str
    meta: dict
    records: list[dict]
    best_so_far: list[float]
    counts: dict[str, int]
    history: History
    consistency_stats: dict[str, Any] = field(default_factory=dict)
    trials: list = field(default_factory=list)
    # x-axis of best_so_far: evaluation count or fidelity units consumed.
    curve_x: list[int] | None = None

    def __post_init__(self):
        if self.curve_x is None:
            self.curve_x = list(range(1, len(self.best_so_far) + 1))

    def jsonl_lines(self) -> list[str]:
        return [dumps({"record": "meta", **self.meta})] + [dumps(r) for r in self.records]

    def write_jsonl(self, path) -> None:
        Path(path).write_text("".join(line + "\n" for line in self.jsonl_lines()))

    def best_reward(self) -> float:
        return self.best_so_far[-1] if self.best_so_far else -math.inf


def running_best(values: list[float]) -> list[float]:
    out, best = [], -math.inf
    for v in values:
        best = max(best, v)
        out.append(best)
    return out
