import numpy as np
import pytest
from hypothesis import given, strategies as st

from statesel.core import Description, FeatureSet, TaskSpec
from statesel.selector import (
    STOP_EXHAUSTED,
    STOP_LENGTH_CAP,
    STOP_NO_IMPROVEMENT,
    ExhaustedFeaturesError,
    MissingKeywordsError,
    baseline,
    full_baseline,
    manual_baseline,
    policy_step,
    random_baseline,
    select,
)

from brute import greedy_trace

TASK = TaskSpec("t", "do it")


def fs_of(n):
    return FeatureSet.from_texts([f"feature {i:03d}." for i in range(n)])


def count(x, task, fs):
    return float(len(x))


def test_policy_step_tie_lowest_id():
    fs = fs_of(5)
    assert policy_step(count, fs.empty(), TASK, fs) == 0


def test_policy_step_dominant_feature():
    fs = fs_of(10)
    assert policy_step(lambda x, t, f: float(7 in x.selected), fs.empty(), TASK, fs) == 7


def test_policy_step_exhausted():
    fs = fs_of(2)
    with pytest.raises(ExhaustedFeaturesError):
        policy_step(count, fs.full(), TASK, fs)


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=8, max_size=8), st.lists(st.integers(0, 7), unique=True, max_size=4))
def test_policy_step_brute_force_argmax(vals, start):
    fs = fs_of(8)
    V = lambda x, t, f: sum(vals[i] * (k + 1) for k, i in enumerate(x.selected))
    x = Description(tuple(start), fs.source)
    if len(start) == 8:
        return
    pick = policy_step(V, x, TASK, fs)
    scores = {i: V(Description(x.selected + (i,), fs.source), TASK, fs) for i in range(8) if i not in start}
    best = max(scores.values())
    assert pick == min(i for i, v in scores.items() if v == best)


def test_select_negative_length_empty():
    fs = fs_of(6)
    tr = select(lambda x, t, f: -float(len(x)), TASK, fs, 5)
    assert tr.chosen.selected == () and tr.stop_reason == STOP_NO_IMPROVEMENT


def test_select_additive_relevant():
    fs = fs_of(10)
    relevant = {2, 5, 9}
    tr = select(lambda x, t, f: float(len(relevant & set(x.selected))), TASK, fs, 5)
    assert set(tr.chosen.selected) == relevant
    assert tr.stop_reason == STOP_NO_IMPROVEMENT


def test_select_length_cap():
    fs = fs_of(90)
    tr = select(count, TASK, fs, 5)
    assert len(tr.chosen) == 5 and tr.stop_reason == STOP_LENGTH_CAP


def test_select_exhausted():
    fs = fs_of(3)
    tr = select(count, TASK, fs, 5)
    assert tr.chosen.selected == (0, 1, 2) and tr.stop_reason == STOP_EXHAUSTED


def test_select_rejects_bad_cap():
    with pytest.raises(ValueError):
        select(count, TASK, fs_of(3), 0)


def test_select_additive_orders_by_gain():
    fs = fs_of(8)
    gains = [0.5, -1.0, 2.0, 0.0, 1.5, -0.2, 0.1, 3.0]
    tr = select(lambda x, t, f: sum(gains[i] for i in x.selected), TASK, fs, 4)
    assert tr.chosen.selected == (7, 2, 4, 0)
    tr = select(lambda x, t, f: sum(gains[i] for i in x.selected), TASK, fs, 8)
    assert tr.chosen.selected == (7, 2, 4, 0, 6)


@given(st.integers(1, 8), st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_select_matches_brute_greedy(n, max_len, seed):
    fs = fs_of(n)
    rng = np.random.default_rng(seed)
    # tabulated over ordered prefixes, coarse values to provoke ties
    table = {}

    def value(ids):
        if ids not in table:
            table[ids] = float(rng.integers(0, 6))
        return table[ids]

    chosen, steps, reason = greedy_trace(value, n, max_len)
    tr = select(lambda x, t, f: value(x.selected), TASK, fs, max_len)
    assert tr.chosen.selected == chosen
    assert [(s.feature, s.value, s.accepted) for s in tr.steps] == steps
    assert tr.stop_reason == reason
    acc = tr.accepted_values
    assert all(a < b for a, b in zip([tr.initial_value] + acc, acc))
    assert len(tr.chosen) <= min(n, max_len)


def test_select_uses_batch_when_available():
    fs = fs_of(4)

    class Model:
        calls = 0

        def predict_batch(self, xs, task, f):
            Model.calls += 1
            return np.array([float(len(x)) for x in xs])

    tr = select(Model(), TASK, fs, 2)
    assert tr.chosen.selected == (0, 1) and Model.calls == 3


def test_select_trace_record():
    fs = fs_of(3)
    rec = select(count, TASK, fs, 1).to_record()
    assert rec["chosen"]["selected"] == [0]
    assert rec["stop_reason"] == STOP_LENGTH_CAP
    assert rec["steps"] == [{"feature": 0, "value": 1.0, "accepted": True}]


# -- baselines -----------------------------------------------------------------


def test_full_baseline():
    fs = fs_of(90)
    assert len(full_baseline(fs)) == 90
    assert baseline("full", fs, TASK).selected == tuple(range(90))


def test_manual_baseline_keyword():
    fs = FeatureSet.from_texts(["You see a apple very near east southeast.", "You see a newt far west."])
    x = baseline("manual", fs, TASK, {"t": ["Apple"]})
    assert x.texts(fs) == ["You see a apple very near east southeast."]
    assert manual_baseline(fs, ["newt", "apple"]).selected == (0, 1)
    with pytest.raises(MissingKeywordsError):
        baseline("manual", fs, TASK, {})
    assert baseline("manual", fs, TASK, lambda t: ["newt"]).selected == (1,)


def test_random_baseline():
    fs = fs_of(10)
    assert len(baseline("random", fs, TASK, k=0, rng=np.random.default_rng(0))) == 0
    x = random_baseline(fs, 4, np.random.default_rng(1))
    assert len(set(x.selected)) == 4
    assert x == random_baseline(fs, 4, np.random.default_rng(1))
    assert len(random_baseline(fs, 50, np.random.default_rng(1))) == 10
    with pytest.raises(ValueError):
        baseline("random", fs, TASK, k=2)
    with pytest.raises(ValueError):
        baseline("beam", fs, TASK)
