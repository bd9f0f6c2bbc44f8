"""Diff algebra checks: frozen examples, brute-force oracles, and properties."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from got import (
    DELETED,
    MODIFIED,
    NEW,
    ApplyError,
    ComposeError,
    Diff,
    ObjectDelta,
    ObjectState,
    State,
    apply_diff,
    compose_diffs,
    detect_conflicts,
    diff_states,
    update_not_conflicting,
)

from conftest import DIM_NAMES, N_PKEYS, TYPE_NAMES, random_diff, random_state


# -- Application --


def line_state(n: int) -> State:
    return State(
        ObjectState("Line", i, {"line_num": i, "line": f"text{i}"}) for i in range(n)
    )


def test_apply_new_line():
    state = line_state(5)
    diff = Diff({("Line", 5): ObjectDelta(NEW, {"line_num": 5, "line": "bar"})})
    out = apply_diff(state, diff)
    assert len(out.of_type("Line")) == 6
    assert out.get("Line", 5).dims["line"] == "bar"
    assert len(state.of_type("Line")) == 5  # input untouched


def test_apply_empty_diff_is_identity():
    state = line_state(3)
    assert apply_diff(state, Diff()) == state


def test_apply_strictness():
    state = line_state(1)
    with pytest.raises(ApplyError):
        apply_diff(state, Diff({("Line", 0): ObjectDelta(NEW, {"line_num": 0, "line": "x"})}))
    with pytest.raises(ApplyError):
        apply_diff(state, Diff({("Line", 9): ObjectDelta(MODIFIED, {"line": "x"})}))
    with pytest.raises(ApplyError):
        apply_diff(state, Diff({("Line", 9): ObjectDelta(DELETED)}))


def oracle_apply(state: State, diff: Diff) -> State:
    """Construct the expected result object by object, from first principles."""
    objects = []
    keys = set(state.keys()) | set(diff.keys())
    for type_name, pkey in keys:
        delta = diff.get((type_name, pkey))
        existing = state.get(type_name, pkey)
        if delta is None:
            objects.append(existing)
        elif delta.kind == NEW:
            objects.append(ObjectState(type_name, pkey, delta.dims))
        elif delta.kind == MODIFIED:
            dims = dict(existing.dims)
            dims.update(delta.dims)
            objects.append(ObjectState(type_name, pkey, dims))
        # DELETED contributes nothing
    return State(objects)


def test_apply_matches_object_by_object_oracle():
    rng = random.Random(1)
    for _ in range(200):
        state = random_state(rng)
        diff = random_diff(rng, state)
        assert apply_diff(state, diff) == oracle_apply(state, diff)


# -- Composition --


def test_compose_new_then_modified():
    d1 = Diff({("WordCount", "w"): ObjectDelta(NEW, {"word": "w", "count": 0})})
    d2 = Diff({("WordCount", "w"): ObjectDelta(MODIFIED, {"count": 1})})
    combined = compose_diffs(d1, d2)
    delta = combined.get(("WordCount", "w"))
    assert delta.kind == NEW
    assert delta.dims == {"word": "w", "count": 1}


def test_compose_with_empty_is_identity():
    d1 = Diff({("Line", 5): ObjectDelta(NEW, {"line_num": 5, "line": "bar"})})
    assert compose_diffs(d1, Diff()) == d1
    assert compose_diffs(Diff(), d1) == d1


def test_compose_new_then_deleted_cancels():
    d1 = Diff({("T", 1): ObjectDelta(NEW, {"k": 1})})
    d2 = Diff({("T", 1): ObjectDelta(DELETED)})
    assert compose_diffs(d1, d2).empty


def test_compose_deleted_then_new_is_full_overwrite():
    d1 = Diff({("T", 1): ObjectDelta(DELETED)})
    d2 = Diff({("T", 1): ObjectDelta(NEW, {"k": 1, "d0": 7})})
    delta = compose_diffs(d1, d2).get(("T", 1))
    assert delta.kind == MODIFIED
    assert delta.dims == {"k": 1, "d0": 7}


def test_compose_incompatible_sequences():
    for first, second in [
        (ObjectDelta(DELETED), ObjectDelta(MODIFIED, {"d0": 1})),
        (ObjectDelta(DELETED), ObjectDelta(DELETED)),
        (ObjectDelta(NEW, {"k": 1}), ObjectDelta(NEW, {"k": 1})),
    ]:
        with pytest.raises(ComposeError):
            compose_diffs(Diff({("T", 1): first}), Diff({("T", 1): second}))


def test_compose_soundness_randomized():
    rng = random.Random(2)
    for _ in range(300):
        state = random_state(rng)
        d1 = random_diff(rng, state)
        mid = apply_diff(state, d1)
        d2 = random_diff(rng, mid)
        two_steps = apply_diff(mid, d2)
        one_step = apply_diff(state, compose_diffs(d1, d2))
        assert two_steps == one_step


# -- Differencing --


def test_diff_identical_states_is_empty():
    state = line_state(4)
    assert diff_states(state, state).empty


def test_diff_counts_change():
    before = State([ObjectState("WordCount", "bar", {"word": "bar", "count": 2})])
    after = State([ObjectState("WordCount", "bar", {"word": "bar", "count": 3})])
    diff = diff_states(before, after)
    assert diff.entries() == {("WordCount", "bar"): ObjectDelta(MODIFIED, {"count": 3})}


def test_diff_round_trip_randomized():
    rng = random.Random(3)
    for _ in range(300):
        a = random_state(rng)
        b = random_state(rng)
        assert apply_diff(a, diff_states(a, b)) == b


def test_diff_minimality():
    before = State([ObjectState("T", 1, {"k": 1, "d0": 5, "d1": 6})])
    after = State([ObjectState("T", 1, {"k": 1, "d0": 5, "d1": 7})])
    delta = diff_states(before, after).get(("T", 1))
    assert delta.dims == {"d1": 7}


# -- Conflict detection --


def wc(count: int) -> dict:
    return {"word": "bar", "count": count}


def test_equal_concurrent_writes_conflict():
    # Two concurrent writes to one dimension both represent an update; value
    # equality does not make them safe to collapse (counter semantics), so the
    # pair is handed to the resolver.
    base = State([ObjectState("WordCount", "bar", wc(2))])
    yours = Diff({("WordCount", "bar"): ObjectDelta(MODIFIED, {"count": 3})})
    theirs = Diff({("WordCount", "bar"): ObjectDelta(MODIFIED, {"count": 3})})
    report = detect_conflicts(base, yours, theirs)
    assert report.conflicting == {("WordCount", "bar")}
    assert report.nonconflicting_theirs.empty


def test_both_new_conflict():
    base = State()
    yours = Diff({("WordCount", "bar"): ObjectDelta(NEW, wc(3))})
    theirs = Diff({("WordCount", "bar"): ObjectDelta(NEW, wc(2))})
    report = detect_conflicts(base, yours, theirs)
    assert report.conflicting == {("WordCount", "bar")}


def test_disjoint_dimensions_auto_merge():
    base = State([ObjectState("T", 1, {"k": 1, "d0": 0, "d1": 0})])
    yours = Diff({("T", 1): ObjectDelta(MODIFIED, {"d0": 5})})
    theirs = Diff({("T", 1): ObjectDelta(MODIFIED, {"d1": 9})})
    report = detect_conflicts(base, yours, theirs)
    assert not report.conflicting
    assert report.nonconflicting_theirs.get(("T", 1)).dims == {"d1": 9}


def test_delete_vs_modify_conflicts():
    base = State([ObjectState("T", 1, {"k": 1, "d0": 0})])
    yours = Diff({("T", 1): ObjectDelta(DELETED)})
    theirs = Diff({("T", 1): ObjectDelta(MODIFIED, {"d0": 4})})
    assert detect_conflicts(base, yours, theirs).conflicting == {("T", 1)}


def test_double_delete_agrees():
    base = State([ObjectState("T", 1, {"k": 1, "d0": 0})])
    both = Diff({("T", 1): ObjectDelta(DELETED)})
    report = detect_conflicts(base, both, both)
    assert not report.conflicting
    # Yours already removed the object; nothing of theirs remains to apply.
    assert report.nonconflicting_theirs.empty


def oracle_conflicts(yours: Diff, theirs: Diff) -> set:
    """Per-(type, pkey, dimension) brute-force scan."""
    conflicting = set()
    for key in set(yours.keys()) & set(theirs.keys()):
        y, t = yours.get(key), theirs.get(key)
        y_del, t_del = y.kind == DELETED, t.kind == DELETED
        if y_del and t_del:
            continue
        if y_del or t_del:
            conflicting.add(key)
            continue
        for dim in ["k"] + DIM_NAMES:
            if (y.dims and dim in y.dims) and (t.dims and dim in t.dims):
                conflicting.add(key)
                break
    return conflicting


def test_conflicts_match_brute_force_oracle():
    rng = random.Random(4)
    for _ in range(300):
        base = random_state(rng)
        yours = random_diff(rng, base)
        theirs = random_diff(rng, base)
        report = detect_conflicts(base, yours, theirs)
        assert set(report.conflicting) == oracle_conflicts(yours, theirs)


def test_conflict_symmetry():
    rng = random.Random(5)
    for _ in range(200):
        base = random_state(rng)
        a = random_diff(rng, base)
        b = random_diff(rng, base)
        assert detect_conflicts(base, a, b).conflicting == detect_conflicts(base, b, a).conflicting


def test_nonconflicting_theirs_applies_cleanly():
    rng = random.Random(6)
    for _ in range(200):
        base = random_state(rng)
        yours = random_diff(rng, base)
        theirs = random_diff(rng, base)
        report = detect_conflicts(base, yours, theirs)
        merged = apply_diff(apply_diff(base, yours), report.nonconflicting_theirs)
        # Dimension-level union: non-conflicting incoming changes land intact.
        for key, delta in report.nonconflicting_theirs.items():
            if delta.kind == DELETED:
                assert not merged.contains(*key)
            else:
                for dim, value in delta.dims.items():
                    assert merged.get(*key).dims[dim] == value


def test_update_not_conflicting():
    orig = State([ObjectState("WordCount", "bar", wc(2))])
    yours = apply_diff(orig, Diff({("WordCount", "bar"): ObjectDelta(MODIFIED, {"count": 3})}))
    theirs = State(
        [
            ObjectState("WordCount", "bar", wc(3)),
            ObjectState("WordCount", "foo", {"word": "foo", "count": 1}),
        ]
    )
    merged = update_not_conflicting(orig, yours, theirs)
    assert merged.get("WordCount", "foo").dims["count"] == 1  # accepted
    assert merged.get("WordCount", "bar").dims["count"] == 3  # left for the resolver


# -- Property tests --

values = st.integers(min_value=0, max_value=9)


@st.composite
def states(draw) -> State:
    objects = []
    for t in TYPE_NAMES:
        for p in range(N_PKEYS):
            if draw(st.booleans()):
                dims = {"k": p}
                for d in DIM_NAMES:
                    dims[d] = draw(values)
                objects.append(ObjectState(t, p, dims))
    return State(objects)


@settings(max_examples=60, deadline=None)
@given(states())
def test_apply_identity_property(state):
    assert apply_diff(state, Diff()) == state


@settings(max_examples=60, deadline=None)
@given(states(), states())
def test_round_trip_property(a, b):
    assert apply_diff(a, diff_states(a, b)) == b


@settings(max_examples=60, deadline=None)
@given(states())
def test_self_diff_is_empty_property(state):
    assert diff_states(state, state).empty
