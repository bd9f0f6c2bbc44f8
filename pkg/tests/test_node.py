"""Node runtime: lifecycle, debug rerouting, in-process clusters."""

import pytest

from got.harness import LocalCluster, run_wordcount_debug, run_wordcount_direct
from got.node import Node, NodeError
from got.wordcount import WORDCOUNT_TYPES, Line, sequential_counts


def test_node_requires_types():
    with pytest.raises(NodeError):
        Node(lambda df: None, types=[], name="empty").start()


def test_start_returns_app_result():
    def app(df):
        df.add_one(Line(0, "x"))
        df.commit()
        return "done"

    node = Node(app, types=WORDCOUNT_TYPES, name="solo")
    assert node.start() == "done"


def test_join_on_completed_node_returns_immediately():
    def app(df):
        return 42

    node = Node(app, types=WORDCOUNT_TYPES, name="quick").start_async()
    assert node.join(timeout=10) == 42
    assert node.join(timeout=0.1) == 42  # already finished


def test_app_exception_propagates_on_join():
    def app(df):
        raise ValueError("boom")

    node = Node(app, types=WORDCOUNT_TYPES, name="crasher").start_async()
    with pytest.raises(NodeError, match="boom"):
        node.join(timeout=10)


def test_double_start_rejected():
    def app(df):
        return None

    node = Node(app, types=WORDCOUNT_TYPES, name="once")
    node.start()
    with pytest.raises(NodeError):
        node.start()


def test_direct_run_matches_oracle_single_worker():
    lines = ["alpha beta", "beta", "gamma alpha beta"]
    output = run_wordcount_direct(lines, workers=1, merge="fixed")
    counts = {w.split()[0]: int(w.split()[1]) for w in output}
    assert counts == sequential_counts(lines)


def test_registration_precedes_first_step():
    """An unregistered node is rejected at its first gate."""
    from got.controller import ControllerCore, ControllerError
    from got.harness import LocalDebugChannel

    core = ControllerCore()
    channel = LocalDebugChannel(core)
    with pytest.raises(ControllerError):
        channel.gate(
            {
                "node": "ghost",
                "step_id": "s",
                "kind": "commit",
                "phase_index": 0,
                "phases": ["receive-data", "extend-graph", "garbage-collect"],
            }
        )


def test_debug_cluster_records_steps_and_histories():
    cluster = LocalCluster()

    def app(df):
        df.add_one(Line(0, "hello"))
        df.commit()
        df.checkout()

    cluster.add_node(app, name="Solo", types=WORDCOUNT_TYPES)
    cluster.core.play()
    cluster.start("Solo")
    cluster.join_all(timeout=30)
    steps = cluster.core.get_steps("Solo")
    assert [s["kind"] for s in steps["executed"]] == ["commit", "checkout"]
    assert steps["pending"] == []
    history = cluster.core.get_history("Solo")
    assert history["head"] != "ROOT"
    state = cluster.core.get_state("Solo")
    assert state["Line"]["i:0"]["line"] == "hello"


def test_free_run_debug_equals_direct_run():
    lines = ["foo", "bar", "bar", "baz", "bar", "bar"]
    assert run_wordcount_debug(lines, merge="fixed") == run_wordcount_direct(
        lines, merge="fixed"
    )


def test_random_interleaving_matches_oracle():
    lines = ["red green", "blue red", "green red blue"]
    for seed in (1, 2):
        output = run_wordcount_debug(lines, workers=2, merge="fixed", seed=seed)
        counts = {w.split()[0]: int(w.split()[1]) for w in output}
        assert counts == sequential_counts(lines)
