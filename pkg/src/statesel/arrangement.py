"""Tabletop rearrangement simulator on a 2x5 grid.

Cell layout. Row 0 is the front row (nearest the camera), row 1 the back row;
"behind" means a larger row index and "beyond" a smaller one. Each cell has a
fixed letter, assigned column by column from the left with the back row first::

    row 1 (back)   A  C  E  G  I
    row 0 (front)  B  D  F  H  J

Cell indices 0..9 follow the same letter order and double as the reading
order used for deterministic listings. Only empty cells are referred to by
letter ("position E"); occupied cells are referred to by their object
("the apple").
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ActionLabel, ExpertStep, FeatureSet, StateselError, TaskSpec

ROWS = 2
COLS = 5
N_CELLS = ROWS * COLS
LETTERS = "ABCDEFGHIJ"
DEFAULT_BUDGET = 10


class ArrangementError(StateselError):
    pass


class InadmissibleActionError(ArrangementError):
    pass


class NoEmptyCellError(ArrangementError):
    pass


class MissingTargetError(ArrangementError):
    pass


class CapacityError(ArrangementError):
    pass


class StuckError(ArrangementError):
    pass


class AlreadySolvedError(ArrangementError):
    pass


def cell_index(row: int, col: int) -> int:
    if not (0 <= row < ROWS and 0 <= col < COLS):
        raise ValueError(f"cell ({row}, {col}) outside the {ROWS}x{COLS} grid")
    return 2 * col + (ROWS - 1 - row)


def cell_coords(idx: int) -> tuple[int, int]:
    """(row, col) of cell ``idx``."""
    return ROWS - 1 - idx % 2, idx // 2


def cell_letter(idx: int) -> str:
    return LETTERS[idx]


def cell_column(idx: int) -> int:
    return idx // 2


@dataclass(frozen=True)
class Grid:
    cells: tuple[str | None, ...]

    def __post_init__(self):
        cells = tuple(self.cells)
        if len(cells) != N_CELLS:
            raise ValueError(f"grid needs exactly {N_CELLS} cells, got {len(cells)}")
        names = [c for c in cells if c is not None]
        if any(not isinstance(c, str) or not c for c in names):
            raise ValueError("object labels must be non-empty strings")
        if len(set(names)) != len(names):
            raise ValueError("object labels must be unique on the table")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_placements(cls, placements: dict[str, tuple[int, int]]) -> Grid:
        cells: list[str | None] = [None] * N_CELLS
        for name, (row, col) in placements.items():
            idx = cell_index(row, col)
            if cells[idx] is not None:
                raise ValueError(f"cell ({row}, {col}) is occupied twice")
            cells[idx] = name
        return cls(tuple(cells))

    @property
    def objects(self) -> list[str]:
        """Objects in reading order."""
        return [c for c in self.cells if c is not None]

    @property
    def empty_names(self) -> dict[str, int]:
        return {LETTERS[i]: i for i, c in enumerate(self.cells) if c is None}

    def locate(self, name: str) -> int:
        try:
            return self.cells.index(name)
        except ValueError:
            raise MissingTargetError(f"{name!r} is not on the grid") from None

    def column_of(self, name: str) -> int:
        return cell_column(self.locate(name))

    def to_record(self) -> dict:
        return {"cells": list(self.cells)}

    @classmethod
    def from_record(cls, rec: dict) -> Grid:
        return cls(tuple(rec["cells"]))


@dataclass(frozen=True)
class ArrangementTask:
    targets: tuple[str, ...]
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        targets = tuple(self.targets)
        object.__setattr__(self, "targets", targets)
        if not 2 <= len(targets) <= 4:
            raise ValueError("an arrangement task orders 2 to 4 targets")
        if len(set(targets)) != len(targets):
            raise ValueError("targets must be distinct")
        if self.budget < 1:
            raise ValueError("budget must be positive")

    def task_spec(self) -> TaskSpec:
        return TaskSpec(
            "arrange:" + ",".join(self.targets),
            "arrange the objects in the order: " + ", ".join(self.targets),
        )

    @classmethod
    def from_task_spec(cls, spec: TaskSpec, budget: int = DEFAULT_BUDGET) -> ArrangementTask:
        if not spec.id.startswith("arrange:"):
            raise ValueError(f"not an arrangement task id: {spec.id!r}")
        return cls(tuple(spec.id[len("arrange:"):].split(",")), budget)

    def to_record(self) -> dict:
        return {"targets": list(self.targets), "budget": self.budget}

    @classmethod
    def from_record(cls, rec: dict) -> ArrangementTask:
        return cls(tuple(rec["targets"]), rec.get("budget", DEFAULT_BUDGET))


@dataclass(frozen=True)
class MoveAction:
    object: str
    destination: str

    @property
    def label(self) -> ActionLabel:
        return ActionLabel(f"move the {self.object} to position {self.destination}.")

    _PATTERN = re.compile(r"^move the (.+) to position ([A-J])\.$")

    @classmethod
    def parse(cls, label: ActionLabel | str) -> MoveAction:
        text = label.text if isinstance(label, ActionLabel) else label
        m = cls._PATTERN.match(text)
        if m is None:
            raise InadmissibleActionError(f"cannot parse move action {text!r}")
        return cls(m.group(1), m.group(2))


# -- features ----------------------------------------------------------------


def _referent(grid: Grid, idx: int) -> str:
    name = grid.cells[idx]
    return f"position {LETTERS[idx]}" if name is None else f"the {name}"


def relation(a: int, b: int) -> str:
    """Spatial relation of cell ``a`` with respect to cell ``b``."""
    ra, ca = cell_coords(a)
    rb, cb = cell_coords(b)
    horiz = "to the left of" if ca < cb else "to the right of" if ca > cb else None
    vert = "behind" if ra > rb else "beyond" if ra < rb else None
    if horiz and vert:
        return f"{horiz} and {vert}"
    if horiz:
        return horiz
    if vert:
        return vert
    raise ValueError("a cell has no relation to itself")


def generate_features(grid: Grid) -> FeatureSet:
    """One sentence per ordered pair of distinct cells, sorted by text."""
    names = [_referent(grid, i) for i in range(N_CELLS)]
    texts = [
        f"{names[a]} is {relation(a, b)} {names[b]}."
        for a in range(N_CELLS)
        for b in range(N_CELLS)
        if a != b
    ]
    texts.sort()
    return FeatureSet.from_texts(texts)


# -- dynamics ----------------------------------------------------------------


def admissible_actions(grid: Grid) -> list[MoveAction]:
    empties = [LETTERS[i] for i, c in enumerate(grid.cells) if c is None]
    if not empties:
        raise NoEmptyCellError("the grid has no empty cell")
    return [MoveAction(obj, dest) for obj in grid.objects for dest in empties]


def admissible_labels(grid: Grid) -> list[ActionLabel]:
    return [a.label for a in admissible_actions(grid)]


def apply(grid: Grid, action: MoveAction) -> Grid:
    if action.object not in grid.cells:
        raise InadmissibleActionError(f"object {action.object!r} is not on the grid")
    if action.destination not in LETTERS:
        raise InadmissibleActionError(f"unknown position {action.destination!r}")
    dest = LETTERS.index(action.destination)
    if grid.cells[dest] is not None:
        raise InadmissibleActionError(
            f"position {action.destination} is occupied by {grid.cells[dest]!r}"
        )
    cells = list(grid.cells)
    cells[cells.index(action.object)] = None
    cells[dest] = action.object
    return Grid(tuple(cells))


def is_success(grid: Grid, task: ArrangementTask) -> bool:
    cols = [grid.column_of(t) for t in task.targets]
    return all(a < b for a, b in zip(cols, cols[1:]))


def inversions(cols: Sequence[int]) -> int:
    """Target pairs not strictly left-to-right in goal order."""
    return sum(1 for i, j in combinations(range(len(cols)), 2) if cols[i] >= cols[j])


# -- expert ------------------------------------------------------------------


@lru_cache(maxsize=4096)
def _distance_map(free: frozenset[int], k: int) -> dict[tuple[int, ...], int]:
    """Moves-to-goal for every placement of ``k`` ordered targets on ``free``.

    Only targets move; the other cells are fixed obstacles. Moves are
    reversible, so a multi-source BFS outward from all goal placements gives
    exact shortest-plan lengths.
    """
    cells = sorted(free)
    by_col: dict[int, list[int]] = {}
    for c in cells:
        by_col.setdefault(cell_column(c), []).append(c)
    dist: dict[tuple[int, ...], int] = {}
    queue: deque = deque()
    for cols in combinations(sorted(by_col), k):
        stack = [()]
        for col in cols:
            stack = [s + (c,) for s in stack for c in by_col[col]]
        for s in stack:
            dist[s] = 0
            queue.append(s)
    while queue:
        s = queue.popleft()
        d = dist[s] + 1
        occupied = set(s)
        for i in range(k):
            for c in cells:
                if c in occupied:
                    continue
                n = s[:i] + (c,) + s[i + 1:]
                if n not in dist:
                    dist[n] = d
                    queue.append(n)
    return dist


def plan_length(grid: Grid, task: ArrangementTask) -> int | None:
    """Shortest target-only plan length, or None if targets alone cannot succeed."""
    state = tuple(grid.locate(t) for t in task.targets)
    free = frozenset(i for i, c in enumerate(grid.cells) if c is None or c in task.targets)
    return _distance_map(free, len(state)).get(state)


def expert_policy(grid: Grid, task: ArrangementTask) -> MoveAction:
    """Next move of a shortest plan to success.

    Targets only are moved when that can succeed; among shortest-plan moves the
    one removing the most order inversions wins, then the leftmost target,
    then the lowest destination letter. If the other objects leave too few
    free columns, the shortest sequence that frees enough columns (it may
    move distractors) is started instead.
    """
    if is_success(grid, task):
        raise AlreadySolvedError("task is already solved")
    empties = [i for i, c in enumerate(grid.cells) if c is None]
    if not empties:
        raise NoEmptyCellError("the grid has no empty cell")
    targets = task.targets
    state = tuple(grid.locate(t) for t in targets)
    free = frozenset(state) | frozenset(empties)
    dist = _distance_map(free, len(targets))
    here = dist.get(state)
    if here is not None:
        base_inv = inversions([cell_column(c) for c in state])
        best = None
        for i, src in sorted(enumerate(state), key=lambda p: p[1]):
            for dest in empties:
                nxt = state[:i] + (dest,) + state[i + 1:]
                if dist.get(nxt) != here - 1:
                    continue
                gain = base_inv - inversions([cell_column(c) for c in nxt])
                key = (-gain, src, dest)
                if best is None or key < best[0]:
                    best = (key, MoveAction(targets[i], LETTERS[dest]))
        if best is None:
            raise StuckError("no move shortens the plan")
        return best[1]
    return _unblocking_move(grid, task)


def _unblocking_move(grid: Grid, task: ArrangementTask, max_depth: int = 3) -> MoveAction:
    """First move of the cheapest short sequence after which targets alone can succeed.

    Cost is sequence length plus the remaining target-only plan length.
    Searched by iterative deepening over all admissible moves.
    """

    def cost_from(g: Grid, depth: int) -> int | None:
        d = plan_length(g, task)
        if d is not None:
            return d
        if depth == 0:
            return None
        best = None
        for a in admissible_actions(g):
            c = cost_from(apply(g, a), depth - 1)
            if c is not None and (best is None or c + 1 < best):
                best = c + 1
        return best

    for depth in range(max_depth):
        best = None
        for a in admissible_actions(grid):
            c = cost_from(apply(grid, a), depth)
            if c is not None and (best is None or c < best[0]):
                best = (c, a)
        if best is not None:
            return best[1]
    raise StuckError(f"no sequence of up to {max_depth} moves makes the task solvable")


def expert_rollout(grid: Grid, task: ArrangementTask) -> list[tuple[Grid, MoveAction]]:
    """Expert (state, action) pairs from ``grid`` until success or budget."""
    steps = []
    while not is_success(grid, task):
        if len(steps) >= task.budget:
            raise StuckError(f"expert exceeded the budget of {task.budget} actions")
        action = expert_policy(grid, task)
        steps.append((grid, action))
        grid = apply(grid, action)
    return steps


def expert_steps(grid: Grid, task: ArrangementTask) -> list[ExpertStep]:
    spec = task.task_spec()
    return [
        ExpertStep(generate_features(g), spec, a.label, tuple(admissible_labels(g)))
        for g, a in expert_rollout(grid, task)
    ]


# -- scenes ------------------------------------------------------------------


@dataclass(frozen=True)
class Vocabulary:
    train: tuple[str, ...]
    test: tuple[str, ...]

    def __post_init__(self):
        if set(self.train) & set(self.test):
            raise ValueError("train and test vocabularies must be disjoint")

    def pool(self, split: str) -> tuple[str, ...]:
        if split not in ("train", "test"):
            raise ValueError(f"unknown vocabulary split {split!r}")
        return self.train if split == "train" else self.test


def load_vocabulary(path: str | Path | None = None) -> Vocabulary:
    if path is None:
        raw = resources.files("statesel").joinpath("data/vocab.json").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    data = json.loads(raw)
    return Vocabulary(tuple(data["train"]), tuple(data["test"]))


def _free_columns(grid: Grid, task: ArrangementTask) -> int:
    return len({cell_column(i) for i, c in enumerate(grid.cells) if c is None or c in task.targets})


def sample_scene(
    rng: np.random.Generator,
    n_targets: int,
    n_distractors: int,
    split: str = "train",
    vocab: Vocabulary | None = None,
    budget: int = DEFAULT_BUDGET,
) -> tuple[Grid, ArrangementTask]:
    """Random scene that is unsolved but solvable by moving targets only."""
    if not 2 <= n_targets <= 4:
        raise ValueError("n_targets must be between 2 and 4")
    if n_distractors < 0:
        raise ValueError("n_distractors must be non-negative")
    n = n_targets + n_distractors
    if n > N_CELLS - 1:
        raise CapacityError(f"{n} objects leave no empty cell on a {N_CELLS}-cell grid")
    pool = (vocab or load_vocabulary()).pool(split)
    if n > len(pool):
        raise CapacityError(f"{split} vocabulary has only {len(pool)} names, need {n}")
    for _ in range(1000):
        names = [pool[i] for i in rng.choice(len(pool), size=n, replace=False)]
        places = rng.permutation(N_CELLS)[:n]
        cells: list[str | None] = [None] * N_CELLS
        for name, idx in zip(names, places):
            cells[int(idx)] = name
        grid = Grid(tuple(cells))
        task = ArrangementTask(tuple(names[:n_targets]), budget)
        if not is_success(grid, task) and _free_columns(grid, task) >= n_targets:
            return grid, task
    raise CapacityError("could not sample an unsolved, solvable scene")
