"""Line-delimited JSON record I/O.

Every record file is UTF-8, one JSON object per line. Objects are written
with sorted keys and no extra whitespace so identical inputs produce
byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator

from .core import (
    ExpertStep,
    SchemaError,
    expert_step_from_record,
    expert_step_to_record,
)


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(dumps(rec))
            fh.write("\n")
            n += 1
    return n


def iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, object)``; blank lines are skipped."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", lineno) from exc
            if not isinstance(obj, dict):
                raise SchemaError("expected a JSON object", lineno)
            yield lineno, obj


def write_expert_steps(path: str | Path, steps: Iterable[ExpertStep]) -> int:
    return write_jsonl(path, (expert_step_to_record(s) for s in steps))


def read_expert_steps(path: str | Path) -> list[ExpertStep]:
    return [expert_step_from_record(obj, lineno) for lineno, obj in iter_jsonl(path)]
