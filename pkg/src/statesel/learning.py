"""Reward, value-dataset collection, upsampling and value-model training."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .actor import Actor, ActorQuery
from .config import Config, ConfigError
from .core import (
    Description,
    ExpertStep,
    FeatureSet,
    SchemaError,
    StateselError,
    TaskSpec,
    UnknownFeatureError,
    check_subset,
    description_from_record,
    description_to_record,
    expert_step_from_record,
    expert_step_to_record,
    join_features,
    task_from_record,
    task_to_record,
)
from .value import LinearValueModel, to_csr


class EmptyDatasetError(StateselError):
    pass


class TrainingDivergedError(StateselError):
    pass


# -- reward --------------------------------------------------------------------


def reward(x_f: Description, step: ExpertStep, actor: Actor) -> float:
    """Actor likelihood of the step's expert action given the terminal description."""
    try:
        check_subset(x_f, step.feature_set)
    except UnknownFeatureError as exc:
        raise UnknownFeatureError(f"terminal description is not a subset of the step: {exc}") from exc
    query = ActorQuery(
        state_text=join_features(x_f.texts(step.feature_set)),
        task=step.task,
        admissible=step.admissible,
        oracle_action=step.expert_action,
    )
    return actor.score(query).prob(step.expert_action)


def expected_reward(x_f: Description, steps: Sequence[ExpertStep], actor: Actor) -> float:
    """Mean reward over expert steps sharing one (feature set, task)."""
    if not steps:
        raise EmptyDatasetError("no expert steps to average over")
    return math.fsum(reward(x_f, s, actor) for s in steps) / len(steps)


def trajectory_rewards(prefixes: Sequence[Description], step: ExpertStep, actor: Actor) -> list[float]:
    """Per-step rewards of a built-up description: zero until the terminal one."""
    if not prefixes:
        return []
    return [0.0] * (len(prefixes) - 1) + [reward(prefixes[-1], step, actor)]


# -- value dataset -------------------------------------------------------------


@dataclass(frozen=True)
class ValueExample:
    task: TaskSpec
    prefix: Description
    label: float
    source_step: int

    def __post_init__(self):
        if not 0.0 <= self.label <= 1.0:
            raise ValueError(f"label {self.label} outside [0, 1]")


@dataclass(frozen=True)
class ValueDataset:
    """Labeled prefixes plus the expert steps they were built from."""

    steps: tuple[ExpertStep, ...]
    examples: tuple[ValueExample, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        object.__setattr__(self, "examples", tuple(self.examples))
        for ex in self.examples:
            if not 0 <= ex.source_step < len(self.steps):
                raise ValueError(f"example points at missing step {ex.source_step}")
            check_subset(ex.prefix, self.steps[ex.source_step].feature_set)

    def __len__(self) -> int:
        return len(self.examples)

    def feature_set(self, ex: ValueExample) -> FeatureSet:
        return self.steps[ex.source_step].feature_set

    def action_of(self, ex: ValueExample) -> str:
        return self.steps[ex.source_step].expert_action.text

    def to_records(self):
        for i, s in enumerate(self.steps):
            yield {"kind": "step", "index": i, "step": expert_step_to_record(s)}
        for ex in self.examples:
            yield {
                "kind": "example",
                "task": task_to_record(ex.task),
                "prefix": description_to_record(ex.prefix),
                "label": ex.label,
                "source_step": ex.source_step,
            }

    @classmethod
    def from_records(cls, items) -> ValueDataset:
        """Build from ``(line_number, record)`` pairs."""
        steps: list[ExpertStep] = []
        examples: list[ValueExample] = []
        for line, rec in items:
            kind = rec.get("kind")
            if kind == "step":
                if rec.get("index") != len(steps):
                    raise SchemaError("step records must be numbered 0..n-1 in order", line, "index")
                steps.append(expert_step_from_record(rec.get("step"), line))
            elif kind == "example":
                label = rec.get("label")
                src = rec.get("source_step")
                if isinstance(label, bool) or not isinstance(label, (int, float)):
                    raise SchemaError("expected a number", line, "label")
                if not isinstance(src, int) or not 0 <= src < len(steps):
                    raise SchemaError("must index an earlier step record", line, "source_step")
                try:
                    examples.append(ValueExample(
                        task_from_record(rec.get("task"), line, "task."),
                        description_from_record(rec.get("prefix"), line),
                        float(label),
                        src,
                    ))
                    check_subset(examples[-1].prefix, steps[src].feature_set)
                except (ValueError, UnknownFeatureError) as exc:
                    raise SchemaError(str(exc), line) from exc
            else:
                raise SchemaError(f"unknown record kind {kind!r}", line, "kind")
        return cls(tuple(steps), tuple(examples))


def collect_value_dataset(
    steps: Sequence[ExpertStep], actor: Actor, config: Config, rng: np.random.Generator
) -> ValueDataset:
    """Random-policy rollouts labeled with their terminal reward.

    For every expert step, ``trajectories_per_step`` descriptions are built by
    drawing a length uniformly from ``1..max_len`` and that many distinct
    features in random order. With a discount of 1 and a reward paid only at
    the end, every prefix (the empty one included) has the terminal reward as
    its Monte Carlo return.
    """
    if config.gamma != 1.0:
        raise ConfigError("Monte Carlo labels need gamma = 1")
    if not steps:
        raise EmptyDatasetError("no expert steps to collect from")
    groups: dict[tuple[str, str], list[ExpertStep]] = defaultdict(list)
    for s in steps:
        groups[(s.feature_set.source, s.task.id)].append(s)
    examples: list[ValueExample] = []
    for i, step in enumerate(steps):
        fs = step.feature_set
        n = len(fs)
        if n == 0:
            raise EmptyDatasetError(f"expert step {i} has an empty feature set")
        peers = groups[(fs.source, step.task.id)]
        for _ in range(config.trajectories_per_step):
            length = int(rng.integers(1, min(config.max_len, n) + 1))
            order = rng.permutation(n)[:length].tolist()
            x_f = Description(tuple(order), fs.source)
            r_f = reward(x_f, step, actor) if len(peers) == 1 else expected_reward(x_f, peers, actor)
            for t in range(length + 1):
                examples.append(ValueExample(step.task, Description(tuple(order[:t]), fs.source), r_f, i))
    return ValueDataset(tuple(steps), tuple(examples))


def upsample(dataset: ValueDataset, rng: np.random.Generator | None = None) -> ValueDataset:
    """Duplicate examples of rare expert actions.

    Each action's example count is raised to at least half of the most common
    action's count. Extra copies cycle through a seeded shuffle of that
    action's examples.
    """
    if not len(dataset):
        raise EmptyDatasetError("cannot upsample an empty dataset")
    rng = rng if rng is not None else np.random.default_rng(0)
    by_action: dict[str, list[int]] = defaultdict(list)
    for i, ex in enumerate(dataset.examples):
        by_action[dataset.action_of(ex)].append(i)
    top = max(len(v) for v in by_action.values())
    floor = -(-top // 2)
    extra: list[ValueExample] = []
    for action in sorted(by_action):
        idx = by_action[action]
        need = floor - len(idx)
        if need <= 0:
            continue
        perm = rng.permutation(len(idx))
        extra.extend(dataset.examples[idx[perm[k % len(idx)]]] for k in range(need))
    return ValueDataset(dataset.steps, dataset.examples + tuple(extra))


# -- training ------------------------------------------------------------------


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    regularizer: float = 0.0
    kl_coefficient: float = 0.0
    n_examples: int = 0
    n_examples_upsampled: int = 0
    backend: str = kernels.BACKEND

    def to_record(self) -> dict:
        return {
            "epoch_losses": self.epoch_losses,
            "regularizer": self.regularizer,
            "kl_coefficient": self.kl_coefficient,
            "n_examples": self.n_examples,
            "n_examples_upsampled": self.n_examples_upsampled,
        }


def encode_dataset(model: LinearValueModel, dataset: ValueDataset):
    rows = [
        model.featurizer.encode(ex.prefix.texts(dataset.feature_set(ex)), ex.task.description)
        for ex in dataset.examples
    ]
    labels = np.array([ex.label for ex in dataset.examples], dtype=np.float64)
    return to_csr(rows), labels


def train(
    model: LinearValueModel,
    dataset: ValueDataset,
    config: Config,
    rng: np.random.Generator | None = None,
    regularize: bool = True,
) -> tuple[LinearValueModel, TrainReport]:
    """Minibatch SGD on mean squared error plus a pull toward the initial parameters.

    The objective per example is ``(V - label)^2 + c/(2N) * ||theta - theta_0||^2``
    with ``c = kl_coefficient`` and ``N`` the dataset size, so ``c`` acts as
    the strength of a Gaussian prior centred on the starting model. The input
    model is not modified.
    """
    if config.loss != "squared":
        raise ConfigError(f"unsupported loss {config.loss!r}")
    if not len(dataset):
        raise EmptyDatasetError("cannot train on an empty dataset")
    rng = rng if rng is not None else np.random.default_rng(config.rng_seed)
    report = TrainReport(kl_coefficient=config.kl_coefficient, n_examples=len(dataset))
    if config.upsample:
        dataset = upsample(dataset, rng)
    report.n_examples_upsampled = len(dataset)

    out = model.copy()
    (indptr, indices, data), labels = encode_dataset(out, dataset)
    n = len(labels)
    reg = config.kl_coefficient / n if regularize else 0.0
    bias = np.array([out.bias, out.init_bias], dtype=np.float64)
    grad = np.zeros_like(out.weights)
    for epoch in range(config.epochs):
        order = rng.permutation(n).astype(np.int64)
        sse = kernels.sgd_epoch(
            indptr, indices, data, labels, order, config.batch_size,
            config.learning_rate, reg, out.weights, out.init_weights, bias, grad,
        )
        loss = sse / n
        if not math.isfinite(loss) or not np.isfinite(bias[0]):
            raise TrainingDivergedError(
                f"non-finite loss at epoch {epoch} (lr={config.learning_rate}, "
                f"batch_size={config.batch_size}); lower the learning rate"
            )
        report.epoch_losses.append(loss)
    out.bias = float(bias[0])
    report.regularizer = out.regularizer()
    return out, report


def mse(model: LinearValueModel, dataset: ValueDataset) -> float:
    (indptr, indices, data), labels = encode_dataset(model, dataset)
    pred = kernels.csr_predict(indptr, indices, data, model.weights, model.bias)
    return float(np.mean((pred - labels) ** 2))
