"""Greedy value-guided description construction and non-learned baselines.

A value function here is either an object with ``predict(x, task, fs)``
(optionally ``predict_batch(xs, task, fs)``) or a plain callable
``f(x, task, fs) -> float``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import Description, FeatureSet, StateselError, TaskSpec, extend

STOP_EXHAUSTED = "exhausted"
STOP_NO_IMPROVEMENT = "no-improvement"
STOP_LENGTH_CAP = "length-cap"


class ExhaustedFeaturesError(StateselError):
    pass


class MissingKeywordsError(StateselError):
    pass


def _values(V, xs: Sequence[Description], task: TaskSpec, fs: FeatureSet) -> list[float]:
    batch = getattr(V, "predict_batch", None)
    if batch is not None:
        return [float(v) for v in batch(xs, task, fs)]
    predict = getattr(V, "predict", V)
    return [float(predict(x, task, fs)) for x in xs]


def _best_extension(V, x: Description, task: TaskSpec, fs: FeatureSet) -> tuple[int, float]:
    candidates = [i for i in range(len(fs)) if i not in x.selected]
    if not candidates:
        raise ExhaustedFeaturesError("every feature is already in the description")
    vals = _values(V, [extend(x, i, fs) for i in candidates], task, fs)
    best = 0
    for k in range(1, len(candidates)):
        if vals[k] > vals[best]:
            best = k
    return candidates[best], vals[best]


def policy_step(V, x: Description, task: TaskSpec, fs: FeatureSet) -> int:
    """Unused feature whose addition scores highest; lowest id wins ties."""
    return _best_extension(V, x, task, fs)[0]


@dataclass(frozen=True)
class SelectionStep:
    feature: int
    value: float
    accepted: bool


@dataclass(frozen=True)
class SelectionTrace:
    chosen: Description
    initial_value: float
    steps: tuple[SelectionStep, ...]
    stop_reason: str

    @property
    def accepted_values(self) -> list[float]:
        return [s.value for s in self.steps if s.accepted]

    def to_record(self) -> dict:
        return {
            "chosen": {"selected": list(self.chosen.selected), "source": self.chosen.source},
            "initial_value": self.initial_value,
            "steps": [{"feature": s.feature, "value": s.value, "accepted": s.accepted} for s in self.steps],
            "stop_reason": self.stop_reason,
        }


def select(V, task: TaskSpec, fs: FeatureSet, max_len: int) -> SelectionTrace:
    """Grow a description from empty while the value strictly improves.

    The value of the current description is carried over from the step that
    accepted it rather than recomputed.
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    x = fs.empty()
    current = _values(V, [x], task, fs)[0]
    initial = current
    steps: list[SelectionStep] = []
    while True:
        if len(x) == len(fs):
            reason = STOP_EXHAUSTED
            break
        if len(x) >= max_len:
            reason = STOP_LENGTH_CAP
            break
        fid, value = _best_extension(V, x, task, fs)
        if value > current:
            steps.append(SelectionStep(fid, value, True))
            x = extend(x, fid, fs)
            current = value
        else:
            steps.append(SelectionStep(fid, value, False))
            reason = STOP_NO_IMPROVEMENT
            break
    return SelectionTrace(x, initial, tuple(steps), reason)


def full_baseline(fs: FeatureSet) -> Description:
    return fs.full()


def manual_baseline(fs: FeatureSet, keywords: Sequence[str]) -> Description:
    """Every feature containing any keyword (case-insensitive)."""
    kws = [k.lower() for k in keywords if k]
    return Description(
        tuple(f.id for f in fs if any(k in f.text.lower() for k in kws)), fs.source
    )


def random_baseline(fs: FeatureSet, k: int, rng: np.random.Generator) -> Description:
    if k < 0:
        raise ValueError("k must be non-negative")
    k = min(k, len(fs))
    return Description(tuple(int(i) for i in rng.choice(len(fs), size=k, replace=False)), fs.source)


def baseline(
    mode: str,
    fs: FeatureSet,
    task: TaskSpec,
    keywords: Mapping[str, Sequence[str]] | Callable[[TaskSpec], Sequence[str]] | None = None,
    k: int = 0,
    rng: np.random.Generator | None = None,
) -> Description:
    if mode == "full":
        return full_baseline(fs)
    if mode == "manual":
        if callable(keywords):
            kws = keywords(task)
        elif keywords is not None and task.id in keywords:
            kws = keywords[task.id]
        else:
            raise MissingKeywordsError(f"no manual keywords for task {task.id!r}")
        return manual_baseline(fs, kws)
    if mode == "random":
        if rng is None:
            raise ValueError("random baseline needs an rng")
        return random_baseline(fs, k, rng)
    raise ValueError(f"unknown baseline mode {mode!r}")
