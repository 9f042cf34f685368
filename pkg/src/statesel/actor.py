"""Actors: map a state description and task to a distribution over actions.

Two actors ship here. :class:`ScriptedActor` is a deterministic stand-in whose
expert-action likelihood rises with task-relevant sentences and falls with
distracting ones. :class:`RemoteActor` posts queries to an HTTP endpoint that
returns one score per admissible action and normalizes them locally with a
softmax.

Remote wire protocol (JSON over HTTP POST)::

    request  {"state_text": str, "task_description": str,
              "actions": [str, ...], "fewshot": [str, ...]}
    response {"scores": [float, ...]}   # one per action, same order

Any monotone per-action score works (mean token logit, mean log-prob, ...).
"""

from __future__ import annotations

import json
import math
import os
import re
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

from .core import ActionLabel, StateselError, TaskSpec

ENDPOINT_ENV = "STATESEL_ACTOR_URL"


class ActorError(StateselError):
    pass


class UnknownTaskError(ActorError):
    pass


class EndpointUnreachableError(ActorError):
    pass


class MalformedResponseError(ActorError):
    pass


@dataclass(frozen=True)
class ActorQuery:
    state_text: str
    task: TaskSpec
    admissible: tuple[ActionLabel, ...]
    fewshot: tuple[str, ...] = ()
    # Privileged hint for oracle actors; never sent over the wire.
    oracle_action: ActionLabel | None = None

    def __post_init__(self):
        object.__setattr__(self, "admissible", tuple(self.admissible))
        object.__setattr__(self, "fewshot", tuple(self.fewshot))
        if not self.admissible:
            raise ValueError("a query needs at least one admissible action")

    def to_wire(self) -> dict:
        return {
            "state_text": self.state_text,
            "task_description": self.task.description,
            "actions": [a.text for a in self.admissible],
            "fewshot": list(self.fewshot),
        }


@dataclass(frozen=True)
class ActionDistribution:
    actions: tuple[ActionLabel, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.actions) != len(self.probs) or not self.actions:
            raise ValueError("need one probability per action")
        if any(not (p >= 0.0) for p in self.probs):
            raise ValueError("probabilities must be non-negative")
        if abs(math.fsum(self.probs) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {math.fsum(self.probs)!r}, not 1")

    @classmethod
    def from_weights(cls, actions: Sequence[ActionLabel], weights: Sequence[float]) -> ActionDistribution:
        total = math.fsum(weights)
        return cls(tuple(actions), tuple(w / total for w in weights))

    @classmethod
    def from_scores(cls, actions: Sequence[ActionLabel], scores: Sequence[float]) -> ActionDistribution:
        """Softmax over ``scores``."""
        top = max(scores)
        return cls.from_weights(actions, [math.exp(s - top) for s in scores])

    def as_dict(self) -> dict[ActionLabel, float]:
        return dict(zip(self.actions, self.probs))

    def prob(self, action: ActionLabel) -> float:
        try:
            return self.probs[self.actions.index(action)]
        except ValueError:
            return 0.0


class Actor(Protocol):
    def score(self, query: ActorQuery) -> ActionDistribution: ...


def score_actions(actor: Actor, query: ActorQuery) -> ActionDistribution:
    return actor.score(query)


def sample_action(
    dist: ActionDistribution, rng: np.random.Generator, greedy: bool = False
) -> ActionLabel:
    """Draw an action; ``greedy`` takes the argmax, earliest listed on ties."""
    if greedy:
        best = max(range(len(dist.probs)), key=lambda i: (dist.probs[i], -i))
        return dist.actions[best]
    u = rng.random()
    acc = 0.0
    for action, p in zip(dist.actions, dist.probs):
        acc += p
        if u < acc:
            return action
    # u landed in the rounding gap above the cumulative sum
    return next(a for a, p in zip(reversed(dist.actions), reversed(dist.probs)) if p > 0)


# -- scripted actor ------------------------------------------------------------

_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


def split_sentences(text: str) -> list[str]:
    """Distinct sentences of a joined description, in first-seen order."""
    text = text.strip()
    if not text:
        return []
    return list(dict.fromkeys(s for s in _SENTENCE_END.split(text) if s))


@dataclass(frozen=True)
class FeatureRules:
    relevant: Callable[[str], bool]
    distractor: Callable[[str], bool]


def _never(_: str) -> bool:
    return False


def _always(_: str) -> bool:
    return True


ALL_RELEVANT = FeatureRules(relevant=_always, distractor=_never)


def keyword_rules(relevant: Sequence[str], distractor: Sequence[str] = ()) -> FeatureRules:
    rel = tuple(k.lower() for k in relevant)
    dis = tuple(k.lower() for k in distractor)
    return FeatureRules(
        relevant=lambda s: any(k in s.lower() for k in rel),
        distractor=lambda s: any(k in s.lower() for k in dis),
    )


def _mentions(sentence: str, name: str) -> bool:
    return re.search(rf"\bthe {re.escape(name)}\b", sentence) is not None


def arrangement_rules(task: TaskSpec) -> FeatureRules:
    """Relevance for "arrange:<t1>,<t2>,..." tasks.

    Relevant: relates two targets, or a target and an empty position.
    Distractor: mentions no target at all.
    """
    if not task.id.startswith("arrange:"):
        raise UnknownTaskError(f"no arrangement rules for task {task.id!r}")
    targets = task.id[len("arrange:"):].split(",")

    def n_targets(s: str) -> int:
        return sum(_mentions(s, t) for t in targets)

    def relevant(s: str) -> bool:
        n = n_targets(s)
        return n >= 2 or (n == 1 and "position " in s)

    return FeatureRules(relevant=relevant, distractor=lambda s: n_targets(s) == 0)


@dataclass(frozen=True)
class ScriptedActorSpec:
    rules: Mapping[str, FeatureRules] = field(default_factory=dict)
    fallback: Callable[[TaskSpec], FeatureRules] | None = None
    boost: float = 3.0
    penalty: float = 0.5

    def __post_init__(self):
        if not self.boost > 1.0:
            raise ValueError("boost must exceed 1")
        if not 0.0 < self.penalty < 1.0:
            raise ValueError("penalty must lie in (0, 1)")
        if self.boost * self.penalty == 1.0:
            raise ValueError("boost * penalty == 1 lets evidence cancel exactly")

    def rules_for(self, task: TaskSpec) -> FeatureRules:
        if task.id in self.rules:
            return self.rules[task.id]
        if self.fallback is not None:
            return self.fallback(task)
        raise UnknownTaskError(f"scripted actor has no rules for task {task.id!r}")


def evidence_counts(rules: FeatureRules, state_text: str) -> tuple[int, int]:
    """(relevant, distractor) sentence counts; relevant takes precedence."""
    n_rel = n_dis = 0
    for s in split_sentences(state_text):
        if rules.relevant(s):
            n_rel += 1
        elif rules.distractor(s):
            n_dis += 1
    return n_rel, n_dis


def scripted_score(spec: ScriptedActorSpec, query: ActorQuery) -> ActionDistribution:
    if query.oracle_action is None:
        raise ActorError("the scripted actor needs the expert action on the query")
    if query.oracle_action not in query.admissible:
        raise ActorError(f"expert action {query.oracle_action.text!r} is not admissible")
    n_rel, n_dis = evidence_counts(spec.rules_for(query.task), query.state_text)
    expert_w = spec.boost**n_rel * spec.penalty**n_dis
    weights = [expert_w if a == query.oracle_action else 1.0 for a in query.admissible]
    return ActionDistribution.from_weights(query.admissible, weights)


class ScriptedActor:
    def __init__(self, spec: ScriptedActorSpec):
        self.spec = spec

    def score(self, query: ActorQuery) -> ActionDistribution:
        return scripted_score(self.spec, query)


def arrangement_actor(boost: float = 3.0, penalty: float = 0.5) -> ScriptedActor:
    return ScriptedActor(ScriptedActorSpec(fallback=arrangement_rules, boost=boost, penalty=penalty))


# -- remote actor --------------------------------------------------------------


def parse_scores(payload: object, n_actions: int) -> list[float]:
    if not isinstance(payload, dict) or not isinstance(payload.get("scores"), list):
        raise MalformedResponseError("response must be an object with a 'scores' list")
    scores = payload["scores"]
    if len(scores) != n_actions:
        raise MalformedResponseError(f"expected {n_actions} scores, got {len(scores)}")
    out = []
    for s in scores:
        if isinstance(s, bool) or not isinstance(s, (int, float)) or not math.isfinite(s):
            raise MalformedResponseError(f"score {s!r} is not a finite number")
        out.append(float(s))
    return out


class RemoteActor:
    """Client for a scoring endpoint speaking the wire protocol above.

    Transport failures and malformed payloads are retried ``retries`` times
    with exponential backoff before being raised.
    """

    def __init__(
        self,
        url: str | None = None,
        timeout: float = 30.0,
        retries: int = 3,
        backoff: float = 0.5,
        max_workers: int = 4,
    ):
        url = url or os.environ.get(ENDPOINT_ENV)
        if not url:
            raise ActorError(f"no endpoint URL given and ${ENDPOINT_ENV} is unset")
        self.url = url
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.max_workers = max_workers

    def _post(self, body: bytes) -> object:
        req = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}, method="POST"
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            raw = resp.read()
        try:
            return json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise MalformedResponseError(f"response is not JSON: {exc}") from exc

    def score(self, query: ActorQuery) -> ActionDistribution:
        body = json.dumps(query.to_wire()).encode("utf-8")
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                scores = parse_scores(self._post(body), len(query.admissible))
            except MalformedResponseError as exc:
                last = exc
            except (urllib.error.URLError, OSError, TimeoutError) as exc:
                last = EndpointUnreachableError(f"{self.url}: {exc}")
            else:
                return ActionDistribution.from_scores(query.admissible, scores)
        assert last is not None
        raise last

    def score_many(self, queries: Sequence[ActorQuery]) -> list[ActionDistribution]:
        """Score queries concurrently; results come back in input order."""
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            return list(pool.map(self.score, queries))
