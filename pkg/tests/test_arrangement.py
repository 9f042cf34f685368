import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from statesel.arrangement import (
    LETTERS,
    N_CELLS,
    AlreadySolvedError,
    ArrangementTask,
    CapacityError,
    Grid,
    InadmissibleActionError,
    MissingTargetError,
    MoveAction,
    NoEmptyCellError,
    admissible_actions,
    apply,
    cell_coords,
    cell_index,
    expert_policy,
    expert_rollout,
    expert_steps,
    generate_features,
    inversions,
    is_success,
    load_vocabulary,
    relation,
    sample_scene,
)
from statesel.core import join_features

NAMES = [f"obj{i}" for i in range(N_CELLS)]


def grid_from_cells(occupied):
    cells = [None] * N_CELLS
    for name, idx in zip(NAMES, occupied):
        cells[idx] = name
    return Grid(tuple(cells))


grids = st.integers(1, 9).flatmap(
    lambda n: st.permutations(range(N_CELLS)).map(lambda p: grid_from_cells(p[:n]))
)


# -- features ----------------------------------------------------------------


def test_full_description_matches_published_listing(sample_grid, published_listing):
    fs = generate_features(sample_grid)
    assert len(fs) == 90
    assert join_features(fs.texts) == published_listing + "."


def test_fruit_row_sentences():
    g = Grid.from_placements({"apple": (0, 0), "banana": (0, 1), "orange": (0, 2)})
    texts = set(generate_features(g).texts)
    assert "the orange is to the right of the apple." in texts
    assert "the banana is to the left of the orange." in texts


def test_back_corner_sentences_exist():
    g = Grid.from_placements({
        "ball": (0, 2), "soda": (0, 1), "doughnut": (1, 3), "cup": (0, 0),
        "apple": (1, 1), "lemon": (1, 2), "spoon": (0, 4), "mug": (0, 3),
    })
    texts = set(generate_features(g).texts)
    assert "position A is to the left of the doughnut." in texts
    assert "position A is to the left of and behind the ball." in texts


@settings(max_examples=200)
@given(grids)
def test_ninety_unique_sorted(g):
    fs = generate_features(g)
    assert len(fs) == 90 and len(set(fs.texts)) == 90
    assert list(fs.texts) == sorted(fs.texts)


def test_empty_positions_are_named():
    g = grid_from_cells(range(8))
    fs = generate_features(g)
    assert sum("position I" in t for t in fs.texts) == 18
    assert not any("position A" in t for t in fs.texts)


_OPPOSITE = {"left": "right", "right": "left", "behind": "beyond", "beyond": "behind"}


@pytest.mark.parametrize("a,b", [(a, b) for a in range(N_CELLS) for b in range(N_CELLS) if a != b])
def test_relation_antisymmetric(a, b):
    words = [w for w in relation(a, b).split() if w in _OPPOSITE]
    back = [w for w in relation(b, a).split() if w in _OPPOSITE]
    assert [_OPPOSITE[w] for w in words] == back


def test_relation_conventions():
    back0, front0, front1 = cell_index(1, 0), cell_index(0, 0), cell_index(0, 1)
    assert relation(back0, front0) == "behind"
    assert relation(front0, back0) == "beyond"
    assert relation(front0, front1) == "to the left of"
    assert relation(back0, front1) == "to the left of and behind"
    with pytest.raises(ValueError):
        relation(3, 3)


def test_letters_fixed_per_cell():
    assert [LETTERS[cell_index(1, c)] for c in range(5)] == list("ACEGI")
    assert [LETTERS[cell_index(0, c)] for c in range(5)] == list("BDFHJ")
    for i in range(N_CELLS):
        assert cell_index(*cell_coords(i)) == i


# -- dynamics ----------------------------------------------------------------


@pytest.mark.parametrize("n, expected", [(7, 21), (8, 16), (9, 9)])
def test_admissible_counts(n, expected):
    g = grid_from_cells(range(n))
    assert len(admissible_actions(g)) == expected


def test_admissible_needs_empty_cell():
    with pytest.raises(NoEmptyCellError):
        admissible_actions(grid_from_cells(range(10)))


def test_apply_sole_object():
    g = Grid.from_placements({"ball": (0, 0)})
    dest = LETTERS[cell_index(1, 4)]
    out = apply(g, MoveAction("ball", dest))
    assert out.locate("ball") == cell_index(1, 4)
    assert out.cells[cell_index(0, 0)] is None


def test_apply_round_trip():
    g = Grid.from_placements({"ball": (0, 0), "cup": (1, 2)})
    src = LETTERS[g.locate("ball")]
    out = apply(apply(g, MoveAction("ball", "J")), MoveAction("ball", src))
    assert out == g


def test_apply_errors():
    g = Grid.from_placements({"ball": (0, 0), "cup": (1, 2)})
    with pytest.raises(InadmissibleActionError, match="occupied"):
        apply(g, MoveAction("ball", LETTERS[g.locate("cup")]))
    with pytest.raises(InadmissibleActionError, match="not on the grid"):
        apply(g, MoveAction("mug", "A"))
    with pytest.raises(InadmissibleActionError, match="unknown position"):
        apply(g, MoveAction("ball", "Z"))
    with pytest.raises(InadmissibleActionError):
        MoveAction.parse("put the ball somewhere")


@settings(max_examples=200)
@given(grids, st.data())
def test_apply_preserves_objects(g, data):
    a = data.draw(st.sampled_from(admissible_actions(g)))
    out = apply(g, a)
    assert sorted(out.objects) == sorted(g.objects)
    assert len(out.cells) == N_CELLS
    moved = {i for i in range(N_CELLS) if out.cells[i] != g.cells[i]}
    assert moved == {g.locate(a.object), LETTERS.index(a.destination)}


def test_label_parse_round_trip():
    a = MoveAction("water bottle", "E")
    assert a.label.text == "move the water bottle to position E."
    assert MoveAction.parse(a.label) == a


# -- success -----------------------------------------------------------------


def test_success_examples():
    task = ArrangementTask(("ball", "soda", "doughnut"))
    ok = Grid.from_placements({"ball": (1, 0), "soda": (0, 2), "doughnut": (1, 4), "cup": (0, 0)})
    assert is_success(ok, task)
    bad = Grid.from_placements({"ball": (1, 2), "soda": (0, 0), "doughnut": (1, 4)})
    assert not is_success(bad, task)
    with pytest.raises(MissingTargetError):
        is_success(Grid.from_placements({"ball": (0, 0)}), task)


def test_success_two_objects_exhaustive():
    task = ArrangementTask(("a", "b"))
    for ia, ib in itertools.permutations(range(N_CELLS), 2):
        (ra, ca), (rb, cb) = cell_coords(ia), cell_coords(ib)
        g = Grid.from_placements({"a": (ra, ca), "b": (rb, cb)})
        assert is_success(g, task) == (ca < cb)


@settings(max_examples=200)
@given(st.permutations(range(N_CELLS)), st.integers(2, 4), st.integers(0, 3))
def test_success_ignores_rows(perm, k, flip):
    g = grid_from_cells(perm[:7])
    task = ArrangementTask(tuple(NAMES[:k]))
    target = NAMES[flip % k]
    r, c = cell_coords(g.locate(target))
    other = cell_index(1 - r, c)
    cells = list(g.cells)
    cells[g.locate(target)], cells[other] = cells[other], cells[g.locate(target)]
    assert is_success(Grid(tuple(cells)), task) == is_success(g, task)


# -- scenes ------------------------------------------------------------------


def test_sample_scene_counts():
    g, task = sample_scene(np.random.default_rng(0), 3, 5)
    assert len(g.objects) == 8 and len(g.empty_names) == 2
    assert len(admissible_actions(g)) == len(g.objects) * len(g.empty_names) == 16
    assert len(task.targets) == 3 and not is_success(g, task)


def test_sample_scene_deterministic():
    a = sample_scene(np.random.default_rng(123), 2, 7)
    b = sample_scene(np.random.default_rng(123), 2, 7)
    assert a == b


def test_sample_scene_capacity():
    with pytest.raises(CapacityError):
        sample_scene(np.random.default_rng(0), 4, 6)


def test_sample_scene_splits_disjoint():
    vocab = load_vocabulary()
    assert not set(vocab.train) & set(vocab.test)
    rng = np.random.default_rng(1)
    for _ in range(20):
        g, _ = sample_scene(rng, 2, 6, "test")
        assert set(g.objects) <= set(vocab.test)


# -- expert ------------------------------------------------------------------


def test_expert_first_move_to_back_corner():
    g = Grid.from_placements({
        "ball": (0, 2), "soda": (0, 1), "doughnut": (1, 3), "cup": (0, 0),
        "apple": (1, 1), "lemon": (1, 2), "spoon": (0, 4), "mug": (0, 3),
    })
    task = ArrangementTask(("ball", "soda", "doughnut"))
    assert expert_policy(g, task).label.text == "move the ball to position A."


def _inversion_reducing(g, task):
    base = inversions([g.column_of(t) for t in task.targets])
    out = set()
    for a in admissible_actions(g):
        h = apply(g, a)
        if inversions([h.column_of(t) for t in task.targets]) < base:
            out.add(a)
    return out


def test_expert_swapped_pair_with_space_on_left():
    # a and b swapped in the front row; column 0 entirely free
    g = Grid.from_placements({"b": (0, 1), "a": (0, 2), "x": (1, 1), "y": (1, 2),
                              "z": (0, 3), "w": (1, 3), "v": (0, 4), "u": (1, 4)})
    task = ArrangementTask(("a", "b"))
    pick = expert_policy(g, task)
    assert pick in _inversion_reducing(g, task)
    assert is_success(apply(g, pick), task)


def test_expert_rejects_solved():
    g = Grid.from_placements({"a": (0, 0), "b": (0, 1)})
    with pytest.raises(AlreadySolvedError):
        expert_policy(g, ArrangementTask(("a", "b")))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(7, 9))
def test_expert_rollout_reaches_success(seed, k, n):
    g, task = sample_scene(np.random.default_rng(seed), k, n - k)
    steps = expert_rollout(g, task)
    assert 1 <= len(steps) <= task.budget
    for grid, action in steps:
        assert action in admissible_actions(grid)
        g = apply(grid, action)
    assert is_success(g, task)


def test_expert_steps_records():
    g, task = sample_scene(np.random.default_rng(5), 3, 5)
    steps = expert_steps(g, task)
    assert steps[0].task == task.task_spec()
    for s in steps:
        assert len(s.feature_set) == 90
        assert s.expert_action in s.admissible
