"""Reading run JSONL files back."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import ParseError

REQUIRED = {
    "observation": ("batch", "slot", "indices", "loss", "reward", "source"),
    "partial": ("trial_id", "iteration", "reward", "ci_lower", "ci_upper", "decision"),
    "trial": ("trial_id", "status", "final_or_imputed_loss"),
}


@dataclass
class RunFile:
    path: str
    meta: dict
    records: list[dict]

    @property
    def protocol(self) -> str:
        return self.meta.get("protocol", "final" if self.partials() else "preliminary")

    def observations(self) -> list[dict]:
        return [r for r in self.records if r["record"] == "observation"]

    def partials(self) -> list[dict]:
        return [r for r in self.records if r["record"] == "partial"]

    def trials(self) -> list[dict]:
        return [r for r in self.records if r["record"] == "trial"]


def read_run(path) -> RunFile:
    meta: dict = {}
    records: list[dict] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise ParseError(f"{path}:{lineno}: expected a JSON object")
            kind = rec.get("record")
            if kind is None:
                # Bare lines: infer the kind from their keys.
                kind = next((k for k, keys in REQUIRED.items() if all(x in rec for x in keys)), None)
                if kind is None:
                    raise ParseError(f"{path}:{lineno}: unrecognized record")
                rec = {"record": kind, **rec}
            if kind == "meta":
                meta = rec
                continue
            if kind not in REQUIRED:
                raise ParseError(f"{path}:{lineno}: unknown record type {kind!r}")
            missing = [k for k in REQUIRED[kind] if k not in rec]
            if missing:
                raise ParseError(f"{path}:{lineno}: {kind} record missing {missing}")
            records.append(rec)
    if not records:
        raise ParseError(f"{path}:1: run file has an empty history")
    return RunFile(str(Path(path)), meta, records)
