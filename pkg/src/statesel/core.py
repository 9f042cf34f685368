"""Domain types for state features, descriptions, tasks and actions.

All types are immutable. A :class:`Description` references features by their
integer id inside a parent :class:`FeatureSet`; the parent is identified by a
content hash so a description can be checked against the set it came from.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence


class StateselError(Exception):
    """Base class for all errors raised by this package."""


class DuplicateFeatureError(StateselError):
    pass


class UnknownFeatureError(StateselError):
    pass


class SchemaError(StateselError):
    """A record does not conform to its documented schema."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


DEFAULT_TEMPLATE = (
    "Describe the relevant information from the game state for the current task. "
    "Your current task is to {task}. {features}"
)


@dataclass(frozen=True)
class Feature:
    id: int
    text: str

    def __post_init__(self):
        if not self.text:
            raise ValueError("feature text must be non-empty")
        if "\n" in self.text or "\r" in self.text:
            raise ValueError(f"feature text must be a single line: {self.text!r}")


@dataclass(frozen=True)
class FeatureSet:
    features: tuple[Feature, ...]
    source: str = field(init=False, compare=False)

    def __post_init__(self):
        feats = tuple(self.features)
        object.__setattr__(self, "features", feats)
        seen = set()
        for i, f in enumerate(feats):
            if f.id != i:
                raise ValueError(f"feature ids must be 0..n-1 in order; got {f.id} at {i}")
            if f.text in seen:
                raise ValueError(f"duplicate feature text: {f.text!r}")
            seen.add(f.text)
        digest = hashlib.sha1("\n".join(f.text for f in feats).encode("utf-8")).hexdigest()
        object.__setattr__(self, "source", digest[:16])

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> FeatureSet:
        return cls(tuple(Feature(i, t) for i, t in enumerate(texts)))

    def __len__(self) -> int:
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def __getitem__(self, i: int) -> Feature:
        return self.features[i]

    @property
    def texts(self) -> list[str]:
        return [f.text for f in self.features]

    def subset(self, ids: Sequence[int]) -> FeatureSet:
        """A new FeatureSet holding only ``ids`` (re-indexed 0..k-1)."""
        return FeatureSet.from_texts(self.features[i].text for i in ids)

    def empty(self) -> Description:
        return Description((), self.source)

    def full(self) -> Description:
        return Description(tuple(range(len(self))), self.source)


@dataclass(frozen=True)
class Description:
    """An ordered selection of feature ids; order is insertion order."""

    selected: tuple[int, ...]
    source: str

    def __post_init__(self):
        sel = tuple(int(i) for i in self.selected)
        if len(set(sel)) != len(sel):
            raise DuplicateFeatureError(f"duplicate feature ids in {sel}")
        object.__setattr__(self, "selected", sel)

    def __len__(self) -> int:
        return len(self.selected)

    def __contains__(self, fid: int) -> bool:
        return fid in self.selected

    def texts(self, fs: FeatureSet) -> list[str]:
        check_subset(self, fs)
        return [fs.features[i].text for i in self.selected]


@dataclass(frozen=True)
class TaskSpec:
    id: str
    description: str

    def __post_init__(self):
        if not self.description:
            raise ValueError("task description must be non-empty")


@dataclass(frozen=True)
class ActionLabel:
    text: str

    def __post_init__(self):
        if not self.text:
            raise ValueError("action label must be non-empty")


@dataclass(frozen=True)
class ExpertStep:
    feature_set: FeatureSet
    task: TaskSpec
    expert_action: ActionLabel
    admissible: tuple[ActionLabel, ...]

    def __post_init__(self):
        adm = tuple(self.admissible)
        object.__setattr__(self, "admissible", adm)
        if len({a.text for a in adm}) != len(adm):
            raise ValueError("admissible actions must be unique")
        if self.expert_action not in adm:
            raise ValueError(f"expert action {self.expert_action.text!r} is not admissible")


def check_subset(x: Description, fs: FeatureSet) -> None:
    if x.source != fs.source:
        raise UnknownFeatureError(
            f"description references feature set {x.source}, not {fs.source}"
        )
    n = len(fs)
    for i in x.selected:
        if not 0 <= i < n:
            raise UnknownFeatureError(f"feature id {i} not in feature set of size {n}")


def extend(x: Description, fid: int, fs: FeatureSet) -> Description:
    """Append feature ``fid`` to ``x``; ``x`` is left untouched."""
    if x.source != fs.source:
        raise UnknownFeatureError("description and feature set do not match")
    if not 0 <= fid < len(fs):
        raise UnknownFeatureError(f"feature id {fid} not in feature set of size {len(fs)}")
    if fid in x.selected:
        raise DuplicateFeatureError(f"feature {fid} already selected")
    return Description(x.selected + (fid,), x.source)


def join_features(texts: Iterable[str]) -> str:
    return " ".join(texts)


def render(
    x: Description, task: TaskSpec, fs: FeatureSet, template: str = DEFAULT_TEMPLATE
) -> str:
    return template.format(task=task.description, features=join_features(x.texts(fs)))


# -- record (de)serialization ------------------------------------------------


def feature_set_to_record(fs: FeatureSet) -> dict:
    return {"features": [{"id": f.id, "text": f.text} for f in fs.features]}


def description_to_record(x: Description) -> dict:
    return {"selected": list(x.selected), "source": x.source}


def task_to_record(t: TaskSpec) -> dict:
    return {"id": t.id, "description": t.description}


def expert_step_to_record(step: ExpertStep) -> dict:
    return {
        "feature_set": feature_set_to_record(step.feature_set),
        "task": task_to_record(step.task),
        "expert_action": {"text": step.expert_action.text},
        "admissible": [{"text": a.text} for a in step.admissible],
    }


def _require(obj, key, kind, line=None, path=""):
    if not isinstance(obj, dict):
        raise SchemaError(f"expected an object at {path or 'top level'}", line, path or None)
    if key not in obj:
        raise SchemaError("missing", line, f"{path}{key}")
    val = obj[key]
    if not isinstance(val, kind) or (kind is int and isinstance(val, bool)):
        raise SchemaError(f"expected {getattr(kind, '__name__', kind)}", line, f"{path}{key}")
    return val


def feature_set_from_record(rec, line: int | None = None, path: str = "") -> FeatureSet:
    items = _require(rec, "features", list, line, path)
    texts = []
    for i, item in enumerate(items):
        p = f"{path}features[{i}]."
        fid = _require(item, "id", int, line, p)
        text = _require(item, "text", str, line, p)
        if fid != i:
            raise SchemaError(f"id {fid} out of order (expected {i})", line, p + "id")
        texts.append(text)
    try:
        return FeatureSet.from_texts(texts)
    except ValueError as exc:
        raise SchemaError(str(exc), line, path + "features") from exc


def description_from_record(rec, line: int | None = None) -> Description:
    sel = _require(rec, "selected", list, line)
    src = _require(rec, "source", str, line)
    if not all(isinstance(i, int) and not isinstance(i, bool) for i in sel):
        raise SchemaError("ids must be integers", line, "selected")
    try:
        return Description(tuple(sel), src)
    except DuplicateFeatureError as exc:
        raise SchemaError(str(exc), line, "selected") from exc


def task_from_record(rec, line: int | None = None, path: str = "") -> TaskSpec:
    tid = _require(rec, "id", str, line, path)
    desc = _require(rec, "description", str, line, path)
    if not desc:
        raise SchemaError("must be non-empty", line, path + "description")
    return TaskSpec(tid, desc)


def expert_step_from_record(rec, line: int | None = None) -> ExpertStep:
    fs = feature_set_from_record(_require(rec, "feature_set", dict, line), line, "feature_set.")
    task = task_from_record(_require(rec, "task", dict, line), line, "task.")
    expert = _require(_require(rec, "expert_action", dict, line), "text", str, line, "expert_action.")
    adm_raw = _require(rec, "admissible", list, line)
    adm = [_require(a, "text", str, line, f"admissible[{i}].") for i, a in enumerate(adm_raw)]
    if not expert:
        raise SchemaError("must be non-empty", line, "expert_action.text")
    if any(not a for a in adm):
        raise SchemaError("action labels must be non-empty", line, "admissible")
    if len(set(adm)) != len(adm):
        raise SchemaError("duplicate admissible actions", line, "admissible")
    if expert not in adm:
        raise SchemaError(f"{expert!r} is not among the admissible actions", line, "expert_action")
    return ExpertStep(fs, task, ActionLabel(expert), tuple(ActionLabel(a) for a in adm))
