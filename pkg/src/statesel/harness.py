"""Episode runner, evaluation matrix, metrics and dataset ingestion."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .actor import Actor, ActorQuery, arrangement_rules, sample_action
from .arrangement import (
    ArrangementTask,
    Grid,
    MoveAction,
    Vocabulary,
    admissible_labels,
    apply,
    expert_policy,
    expert_steps,
    generate_features,
    is_success,
    sample_scene,
)
from .config import Config, ConfigError
from .core import Description, ExpertStep, FeatureSet, StateselError, TaskSpec, join_features
from .learning import EmptyDatasetError
from .records import dumps, read_expert_steps, write_jsonl
from .selector import full_baseline, manual_baseline, random_baseline, select

SelectorFn = Callable[[FeatureSet, TaskSpec, np.random.Generator], Description]


# -- demonstrations ------------------------------------------------------------


def generate_demonstrations(
    n_demos: int,
    rng: np.random.Generator,
    targets: Sequence[int] = (2, 3),
    n_objects: Sequence[int] = (7, 8, 9),
    split: str = "train",
    vocab: Vocabulary | None = None,
) -> list[list[ExpertStep]]:
    """Expert trajectories on freshly sampled scenes, one list per demo."""
    demos = []
    for _ in range(n_demos):
        k = int(rng.choice(targets))
        n = int(rng.choice(n_objects))
        grid, task = sample_scene(rng, k, n - k, split, vocab)
        demos.append(expert_steps(grid, task))
    return demos


# -- selectors -----------------------------------------------------------------


def arrangement_keywords(task: TaskSpec) -> list[str]:
    return [f"the {t}" for t in ArrangementTask.from_task_spec(task).targets]


def make_selector(variant: str, model=None, max_len: int = 5) -> SelectorFn:
    """Selector for a variant name.

    ``full``, ``manual`` (target names as keywords), ``random:K``,
    ``learned`` (greedy selection with ``model``) and ``relevant`` (the
    scripted actor's relevant sentences; an oracle upper reference).
    """
    if variant == "full":
        return lambda fs, task, rng: full_baseline(fs)
    if variant == "manual":
        return lambda fs, task, rng: manual_baseline(fs, arrangement_keywords(task))
    if variant.startswith("random:"):
        try:
            k = int(variant.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad random variant {variant!r}; use random:K") from None
        return lambda fs, task, rng: random_baseline(fs, k, rng)
    if variant == "learned":
        if model is None:
            raise ConfigError("the learned variant needs a value-model checkpoint")
        return lambda fs, task, rng: select(model, task, fs, max_len).chosen
    if variant == "relevant":
        def relevant(fs, task, rng):
            rules = arrangement_rules(task)
            return Description(tuple(f.id for f in fs if rules.relevant(f.text)), fs.source)
        return relevant
    raise ConfigError(f"unknown selector variant {variant!r}")


# -- episodes ------------------------------------------------------------------


@dataclass(frozen=True)
class StepRecord:
    n_features: int
    n_selected: int
    chars: int
    full_chars: int
    action: str

    @property
    def reduction(self) -> float:
        return 1.0 - self.n_selected / self.n_features if self.n_features else 0.0


@dataclass
class EpisodeResult:
    task_id: str
    variant: str
    episode_id: int
    seed: int
    success: bool = False
    steps_taken: int = 0
    steps: list[StepRecord] = field(default_factory=list)
    error: str | None = None

    def to_record(self) -> dict:
        return {
            "task_id": self.task_id,
            "variant": self.variant,
            "episode_id": self.episode_id,
            "seed": self.seed,
            "success": self.success,
            "steps_taken": self.steps_taken,
            "steps": [
                {"n_features": s.n_features, "n_selected": s.n_selected,
                 "chars": s.chars, "full_chars": s.full_chars, "action": s.action}
                for s in self.steps
            ],
            "error": self.error,
        }

    @classmethod
    def from_record(cls, rec: dict) -> EpisodeResult:
        return cls(
            rec["task_id"], rec["variant"], rec["episode_id"], rec["seed"], rec["success"],
            rec["steps_taken"], [StepRecord(**s) for s in rec["steps"]], rec.get("error"),
        )


def run_episode(
    grid: Grid,
    task: ArrangementTask,
    selector_fn: SelectorFn,
    actor: Actor,
    budget: int,
    rng: np.random.Generator,
    greedy: bool = False,
    variant: str = "",
    episode_id: int = 0,
    seed: int = 0,
) -> EpisodeResult:
    """Select, act and step until success or ``budget`` actions.

    Errors from the actor or environment end the episode and are recorded in
    ``error``; they are not counted as task failures.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    spec = task.task_spec()
    result = EpisodeResult(spec.id, variant, episode_id, seed)
    try:
        while not is_success(grid, task) and result.steps_taken < budget:
            fs = generate_features(grid)
            x_f = selector_fn(fs, spec, rng)
            state_text = join_features(x_f.texts(fs))
            query = ActorQuery(
                state_text, spec, tuple(admissible_labels(grid)),
                oracle_action=expert_policy(grid, task).label,
            )
            action = sample_action(actor.score(query), rng, greedy=greedy)
            grid = apply(grid, MoveAction.parse(action))
            result.steps_taken += 1
            result.steps.append(StepRecord(
                len(fs), len(x_f), len(state_text), len(join_features(fs.texts)), action.text
            ))
        result.success = is_success(grid, task)
    except StateselError as exc:
        result.success = False
        result.error = f"{type(exc).__name__}: {exc}"
    return result


# -- metrics -------------------------------------------------------------------


@dataclass(frozen=True)
class VariantMetrics:
    n_episodes: int
    n_errors: int
    success_rate: float
    success_se: float
    reduction_ratio: float
    mean_features: float
    mean_chars: float
    per_seed_success: dict[int, float]

    def to_record(self) -> dict:
        return {
            "n_episodes": self.n_episodes,
            "n_errors": self.n_errors,
            "success_rate": self.success_rate,
            "success_se": self.success_se,
            "reduction_ratio": self.reduction_ratio,
            "mean_features": self.mean_features,
            "mean_chars": self.mean_chars,
            "per_seed_success": {str(k): v for k, v in sorted(self.per_seed_success.items())},
        }


@dataclass(frozen=True)
class Metrics:
    variants: dict[str, VariantMetrics]

    def to_record(self) -> dict:
        return {"variants": {k: v.to_record() for k, v in self.variants.items()}}

    def table(self) -> str:
        head = f"{'variant':<12} {'episodes':>8} {'errors':>6} {'success':>8} {'+/-se':>6} {'reduction':>9} {'features':>8} {'chars':>7}"
        lines = [head, "-" * len(head)]
        for name, m in self.variants.items():
            lines.append(
                f"{name:<12} {m.n_episodes:>8d} {m.n_errors:>6d} {m.success_rate:>8.3f} "
                f"{m.success_se:>6.3f} {m.reduction_ratio:>9.3f} {m.mean_features:>8.1f} {m.mean_chars:>7.0f}"
            )
        return "\n".join(lines) + "\n"


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs) if xs else 0.0


def compute_metrics(results: Sequence[EpisodeResult]) -> Metrics:
    """Fold episode records into per-variant metrics.

    Episodes that ended in an error are left out of success rates and counted
    in ``n_errors``; the standard error is taken across seeds.
    """
    by_variant: dict[str, list[EpisodeResult]] = {}
    for r in results:
        by_variant.setdefault(r.variant, []).append(r)
    out = {}
    for name, rs in by_variant.items():
        ok = [r for r in rs if r.error is None]
        seeds: dict[int, list[bool]] = {}
        for r in ok:
            seeds.setdefault(r.seed, []).append(r.success)
        per_seed = {s: _mean([float(v) for v in vs]) for s, vs in seeds.items()}
        rates = list(per_seed.values())
        se = float(np.std(rates, ddof=1) / math.sqrt(len(rates))) if len(rates) > 1 else 0.0
        steps = [s for r in rs for s in r.steps]
        out[name] = VariantMetrics(
            n_episodes=len(rs),
            n_errors=len(rs) - len(ok),
            success_rate=_mean([float(r.success) for r in ok]),
            success_se=se,
            reduction_ratio=_mean([s.reduction for s in steps]),
            mean_features=_mean([float(s.n_selected) for s in steps]),
            mean_chars=_mean([float(s.chars) for s in steps]),
            per_seed_success=per_seed,
        )
    return Metrics(out)


def episode_scenes(config: Config, vocab: Vocabulary | None = None):
    """The (seed, episode id, grid, task) matrix shared by every variant."""
    for seed in config.seeds:
        for e in range(config.episodes):
            rng = np.random.default_rng([seed, e])
            k = int(rng.choice(config.eval_targets))
            n = int(rng.choice(config.n_objects))
            grid, task = sample_scene(rng, k, n - k, "test", vocab, config.budget)
            yield seed, e, grid, task


def evaluate(
    config: Config,
    actor: Actor,
    model=None,
    out_dir: str | Path | None = None,
    vocab: Vocabulary | None = None,
) -> tuple[list[EpisodeResult], Metrics]:
    """Run every variant on the same held-out scenes and aggregate.

    Each episode's sampling stream depends only on (seed, episode id), so all
    variants face the same scenes with common random numbers. With
    ``out_dir`` set, writes ``episodes.jsonl``, ``metrics.json`` and
    ``metrics.txt``; episodes finished before an exception are still written.
    """
    selectors = {v: make_selector(v, model, config.max_len) for v in config.variants}
    jobs = [
        (v, seed, e, grid, task)
        for seed, e, grid, task in episode_scenes(config, vocab)
        for v in config.variants
    ]

    def work(job):
        v, seed, e, grid, task = job
        rng = np.random.default_rng([seed, e, 1])
        return run_episode(grid, task, selectors[v], actor, config.budget, rng,
                           config.greedy, v, e, seed)

    results: list[EpisodeResult] = []
    try:
        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                results.extend(pool.map(work, jobs))
        else:
            results.extend(work(j) for j in jobs)
    finally:
        order = {v: i for i, v in enumerate(config.variants)}
        results.sort(key=lambda r: (order[r.variant], r.seed, r.episode_id))
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            write_jsonl(out / "episodes.jsonl", (r.to_record() for r in results))
    metrics = compute_metrics(results)
    if out_dir is not None:
        (out / "metrics.json").write_text(dumps(metrics.to_record()) + "\n", encoding="utf-8")
        (out / "metrics.txt").write_text(metrics.table(), encoding="utf-8")
    return results, metrics


# -- ingestion -----------------------------------------------------------------


def ingest_external_trajectories(path: str | Path) -> list[ExpertStep]:
    """Read and validate externally produced expert steps (one record per line)."""
    steps = read_expert_steps(path)
    if not steps:
        raise EmptyDatasetError(f"{path} contains no expert steps")
    return steps
