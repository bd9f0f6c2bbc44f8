"""Word-counter app pieces: merges, apps, tokenizer, oracle."""

import pytest

from got import ConflictTriple, ObjectState, State
from got.harness import run_wordcount_direct
from got.wordcount import (
    Line,
    buggy_merge,
    fixed_merge,
    sequential_counts,
)


def wc(count: int) -> ObjectState:
    return ObjectState("WordCount", "bar", {"word": "bar", "count": count})


def conflict(orig, yours, theirs) -> list[ConflictTriple]:
    return [
        ConflictTriple(
            type_name="WordCount",
            pkey="bar",
            orig=wc(orig) if orig is not None else None,
            yours=wc(yours),
            theirs=wc(theirs),
        )
    ]


def merge_inputs(orig_count):
    orig = State([wc(orig_count)] if orig_count is not None else [])
    yours = State([wc(3)])
    theirs = State([wc(3)])
    return orig, yours, theirs


def test_buggy_merge_doubles():
    orig, yours, theirs = merge_inputs(2)
    merged = buggy_merge(conflict(2, 3, 3), orig, yours, theirs)
    assert merged.get("WordCount", "bar").dims["count"] == 6


def test_fixed_merge_subtracts_base():
    orig, yours, theirs = merge_inputs(2)
    merged = fixed_merge(conflict(2, 3, 3), orig, yours, theirs)
    assert merged.get("WordCount", "bar").dims["count"] == 4


def test_fixed_merge_on_fresh_objects_sums():
    orig, yours, theirs = merge_inputs(None)
    for a, b in [(1, 1), (2, 5)]:
        merged = fixed_merge(
            conflict(None, a, b),
            State(),
            State([wc(a)]),
            State([wc(b)]),
        )
        assert merged.get("WordCount", "bar").dims["count"] == a + b


def test_merges_accept_nonconflicting_changes():
    orig = State([wc(2)])
    yours = State([wc(3)])
    theirs = State(
        [wc(3), ObjectState("WordCount", "foo", {"word": "foo", "count": 1})]
    )
    merged = buggy_merge(conflict(2, 3, 3), orig, yours, theirs)
    assert merged.get("WordCount", "foo").dims["count"] == 1
    assert merged.get("WordCount", "bar").dims["count"] == 6


def test_non_wordcount_conflict_asserts():
    triple = [
        ConflictTriple(
            type_name="Stop",
            pkey=0,
            orig=None,
            yours=ObjectState("Stop", 0, {"index": 0, "accepted": True}),
            theirs=ObjectState("Stop", 0, {"index": 0, "accepted": False}),
        )
    ]
    with pytest.raises(AssertionError):
        buggy_merge(triple, State(), State(), State())
    with pytest.raises(AssertionError):
        fixed_merge(triple, State(), State(), State())


def test_tokenizer():
    assert Line(0, "  foo  bar \n").process() == ["foo", "bar"]
    assert Line(1, "\n").process() == []


def test_sequential_oracle():
    assert sequential_counts(["foo", "bar bar", "baz bar"]) == {
        "foo": 1,
        "bar": 3,
        "baz": 1,
    }


def test_grouper_output_order_is_first_appearance():
    lines = ["zed alpha", "alpha zed", "beta"]
    output = run_wordcount_direct(lines, workers=2, merge="fixed")
    assert output == ["zed 2", "alpha 2", "beta 1"]


def test_zero_workers_prints_immediately():
    output = run_wordcount_direct(["foo bar"], workers=0, merge="fixed")
    assert output == []


def test_empty_input_single_worker():
    output = run_wordcount_direct([], workers=1, merge="fixed")
    assert output == []


def test_six_line_sample_direct():
    output = run_wordcount_direct(
        ["foo", "bar", "bar", "baz", "bar", "bar"], workers=2, merge="fixed"
    )
    assert output == ["foo 1", "bar 4", "baz 1"]


def test_twenty_seeded_interleavings_always_converge():
    from got.harness import run_wordcount_debug

    lines = ["foo", "bar", "bar", "baz", "bar", "bar"]
    for seed in range(20):
        output = run_wordcount_debug(lines, workers=2, merge="fixed", seed=seed)
        assert output == ["foo 1", "bar 4", "baz 1"], f"seed {seed}: {output}"


def test_buggy_merge_is_correct_when_pushes_never_race():
    """Workers run one at a time: no conflicts, so even the buggy merge is right."""
    import os
    import time

    from got.harness import LocalCluster, _write_lines
    from got.wordcount import WORDCOUNT_TYPES, grouper_app, worker_app, MERGE_FUNCTIONS

    lines = ["foo", "bar", "bar", "baz", "bar", "bar"]
    path = _write_lines(lines)
    cluster = LocalCluster()
    try:
        cluster.add_node(
            grouper_app, name="Grouper", types=WORDCOUNT_TYPES,
            resolver=MERGE_FUNCTIONS["buggy"],
        )
        for i in range(2):
            cluster.add_node(
                worker_app, name=f"WordCounter{i + 1}", types=WORDCOUNT_TYPES,
                remote="Grouper",
            )
        cluster.start("Grouper", path, 2)
        cluster.start("WordCounter1", 0, 2)
        cluster.start("WordCounter2", 1, 2)
        priority = ["WordCounter1", "WordCounter2", "Grouper"]
        deadline = time.monotonic() + 60
        while not cluster.core.all_exited():
            assert time.monotonic() < deadline, "serialized run stalled"
            statuses = cluster.core.statuses()
            ready = cluster.core.ready_nodes()
            if not ready:
                time.sleep(0.001)
                continue
            # worker 2 may not start until worker 1 has fully finished
            if statuses["WordCounter1"] == "running":
                allowed = [n for n in ready if n != "WordCounter2"]
            else:
                allowed = ready
            if not allowed:
                time.sleep(0.001)
                continue
            allowed.sort(key=priority.index)
            cluster.step(allowed[0])
        cluster.join_all(timeout=30)
        assert cluster.nodes["Grouper"].result == ["foo 1", "bar 4", "baz 1"]
    finally:
        os.unlink(path)
