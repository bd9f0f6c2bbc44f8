"""Acceptance criteria, one test per criterion, each printing PASS or FAIL.

The two scenario criteria run the full stack: a controller web service plus
three OS processes driven over HTTP. The volume criteria use the in-process
harness (threads + direct controller calls) to keep 200+ sessions fast.
"""

import itertools
import queue
import random
import time
from contextlib import contextmanager

import pytest

from got import (
    DELETED,
    MODIFIED,
    NEW,
    Diff,
    ObjectDelta,
    ObjectState,
    ROOT,
    SNAPSHOT_REF,
    State,
    VersionGraph,
    apply_diff,
    compose_diffs,
    detect_conflicts,
    diff_states,
)
from got.harness import LocalCluster, run_wordcount_debug, run_wordcount_direct
from got.scenario import run_scenario
from got.wordcount import sequential_counts

from conftest import random_diff, random_state
from test_graph import random_graph

SAMPLE_LINES = ["foo", "bar", "bar", "baz", "bar", "bar"]
LISTING_EXPECTED = ["foo 1", "bar 4", "baz 1"]
LISTING_OBSERVED = ["foo 1", "bar 6", "baz 1"]


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {name}: FAIL")
        raise
    print(f"\nACCEPTANCE {name}: PASS")


def counts_of(output: list[str]) -> dict[str, int]:
    return {line.split()[0]: int(line.split()[1]) for line in output}


def test_bug_reproduction_scripted_scenario():
    with criterion("bug-reproduction"):
        buggy = run_scenario("buggy")
        assert buggy.output == LISTING_OBSERVED
        assert buggy.elapsed < 30.0
        buggy_again = run_scenario("buggy")
        assert buggy_again.output == LISTING_OBSERVED  # deterministic
        fixed = run_scenario("fixed")
        assert fixed.output == LISTING_EXPECTED
        assert fixed.elapsed < 30.0


def test_breakpoint_walkthrough():
    with criterion("breakpoint-walkthrough"):
        result = run_scenario("buggy", breakpoint_text="exists(WordCount, count == 6)")
        assert result.paused_on is not None
        assert result.paused_on["node"] == "Grouper"
        assert result.paused_on["step_kind"] == "respond-to-push"
        pending = result.paused_steps["pending"]
        assert pending, "the matched step must still be pending"
        head = pending[0]
        assert head["kind"] == "respond-to-push"
        assert head["phases"][head["current_phase"]] == "garbage-collect"
        assert "run-merge" in head["phases"]  # the conflicting merge ran
        # the paused HEAD shows the merge: three counted words, bar doubled to 6
        state = result.paused_state
        assert state["WordCount"]["s:bar"]["count"] == 6
        assert len(state["WordCount"]) == 3
        # history at the pause: a fork (two concurrent pushes) into a merge HEAD
        graph = VersionGraph.from_wire(result.paused_history)
        assert graph.in_degree(graph.head) == 2
        assert any(graph.out_degree(v) >= 2 for v in graph.vertices)
        # the session still finishes with the observed buggy output
        assert result.output == LISTING_OBSERVED


def test_convergence_on_random_inputs_and_interleavings():
    with criterion("convergence"):
        rng = random.Random(2026)
        vocabulary = ["ash", "birch", "cedar", "dune", "elm", "fern", "gale", "holt"]
        for case in range(20):
            words = rng.sample(vocabulary, rng.randint(1, 8))
            lines = [
                " ".join(rng.choice(words) for _ in range(rng.randint(1, 4)))
                for _ in range(rng.randint(2, 30))
            ]
            expected = sequential_counts(lines)
            for run in range(10):
                output = run_wordcount_debug(
                    lines, workers=2, merge="fixed", seed=rng.randrange(2**31)
                )
                assert counts_of(output) == expected, (
                    f"case {case} run {run}: {output} != {expected}"
                )


def exhaustive_compose_cases():
    """Every delta-kind sequence over one object with two dimensions."""
    dims = ("a", "b")
    values = (0, 1)

    def deltas_for(present: bool):
        out = []
        if present:
            for subset in (("a",), ("b",), ("a", "b")):
                for vals in itertools.product(values, repeat=len(subset)):
                    out.append(ObjectDelta(MODIFIED, dict(zip(subset, vals))))
            out.append(ObjectDelta(DELETED))
        else:
            for vals in itertools.product(values, repeat=2):
                out.append(ObjectDelta(NEW, dict(zip(dims, vals))))
        return out

    bases = [State(), State([ObjectState("T", 1, {"a": 0, "b": 0})])]
    for base in bases:
        present = base.contains("T", 1)
        for d1 in deltas_for(present):
            mid = apply_diff(base, Diff({("T", 1): d1}))
            for d2 in deltas_for(mid.contains("T", 1)):
                yield base, Diff({("T", 1): d1}), Diff({("T", 1): d2})


def test_diff_algebra_suite():
    with criterion("diff-algebra"):
        failures = 0
        # exhaustive kind-rule core
        for base, d1, d2 in exhaustive_compose_cases():
            two_step = apply_diff(apply_diff(base, d1), d2)
            one_step = apply_diff(base, compose_diffs(d1, d2))
            failures += two_step != one_step
        # randomized coverage over the bounded universe
        rng = random.Random(99)
        for _ in range(500):
            state = random_state(rng)
            failures += apply_diff(state, Diff()) != state  # application identity
            d1 = random_diff(rng, state)
            mid = apply_diff(state, d1)
            d2 = random_diff(rng, mid)
            failures += apply_diff(mid, d2) != apply_diff(state, compose_diffs(d1, d2))
            other = random_state(rng)
            failures += apply_diff(state, diff_states(state, other)) != other
        # conflict detection vs per-dimension brute force
        from test_diff import oracle_conflicts

        for _ in range(500):
            base = random_state(rng)
            yours = random_diff(rng, base)
            theirs = random_diff(rng, base)
            report = detect_conflicts(base, yours, theirs)
            failures += set(report.conflicting) != oracle_conflicts(yours, theirs)
            sym = detect_conflicts(base, theirs, yours)
            failures += report.conflicting != sym.conflicting
        assert failures == 0


def test_gc_safety():
    with criterion("gc-safety"):
        rng = random.Random(424242)
        for _ in range(40):
            g = random_graph(rng, size=rng.randint(5, 50))
            retained_expect = {ROOT, g.head} | set(g.refs.values())
            pre = {v: g.state_at(v) for v in g.vertices}
            g.garbage_collect()
            assert retained_expect <= g.vertices
            for v in g.vertices:
                assert g.state_at(v) == pre[v]
            for v in g.vertices:  # no unreferenced linear interior survives
                if v not in retained_expect:
                    assert g.in_degree(v) > 1 or g.out_degree(v) != 1
        # the documented collapse: a mid-chain version disappears once unreferenced
        g = VersionGraph()
        for i in range(5):
            g.extend(g.head, Diff({("Line", i): ObjectDelta(NEW, {"line_num": i, "line": "x"})}))
        middle = g.head
        g.extend(
            g.head, Diff({("Line", 5): ObjectDelta(NEW, {"line_num": 5, "line": "bar"})})
        )
        g.update_ref(SNAPSHOT_REF, g.head)
        pre_state = g.state_at(g.head)
        removed = g.garbage_collect()
        assert middle in removed
        assert g.vertices == {ROOT, g.head}
        assert g.state_at(g.head) == pre_state


def test_free_run_transparency():
    with criterion("free-run-transparency"):
        direct = run_wordcount_direct(SAMPLE_LINES, workers=2, merge="fixed")
        debug = run_wordcount_debug(SAMPLE_LINES, workers=2, merge="fixed")
        assert direct == debug == LISTING_EXPECTED


class Item:
    from got import dimension, primarykey

    key = primarykey(int)
    value = dimension(int)

    def __init__(self, key, value):
        self.key = key
        self.value = value


def producer_app(df, cues: queue.Queue, rounds: int):
    for i in range(int(rounds)):
        cues.get()  # advance only when the scenario wants the history to move
        df.add_one(Item(i, i * 10))
        df.commit()


def observer_app(df, cues: queue.Queue, probes: queue.Queue, rounds: int):
    for _ in range(int(rounds)):
        df.pull()
        probes.put([o.key for o in df.read_all(Item)])
        cues.get()  # the producer's history advances while we hold still
        probes.put([o.key for o in df.read_all(Item)])


def test_read_stability_under_remote_activity():
    with criterion("read-stability"):
        cluster = LocalCluster()
        producer_cues: queue.Queue = queue.Queue()
        observer_cues: queue.Queue = queue.Queue()
        probes: queue.Queue = queue.Queue()
        rounds = 3
        cluster.add_node(producer_app, name="Producer", types=[Item])
        cluster.add_node(observer_app, name="Observer", types=[Item], remote="Producer")
        cluster.start("Producer", producer_cues, rounds)
        cluster.start("Observer", observer_cues, probes, rounds)

        def drain(until=None, timeout: float = 30.0):
            """Step every grantable phase until quiet (or ``until()`` holds)."""
            deadline = time.monotonic() + timeout
            idle_since = None
            while time.monotonic() < deadline:
                if until is not None and until():
                    return
                ready = cluster.core.ready_nodes()
                if ready:
                    idle_since = None
                    cluster.step(ready[0])
                    continue
                if until is None:
                    if idle_since is None:
                        idle_since = time.monotonic()
                    elif time.monotonic() - idle_since > 0.2:
                        return  # apps are parked on their cue queues
                time.sleep(0.002)
            raise AssertionError("scenario stalled")

        history_sizes = []
        for round_index in range(rounds):
            drain(until=lambda: not probes.empty())  # observer completes its pull
            after_pull = probes.get()
            producer_cues.put(None)  # remote history advances...
            drain()
            graph = VersionGraph.from_wire(cluster.core.get_history("Producer"))
            history_sizes.append(len(graph.state_at(graph.head).of_type("Item")))
            observer_cues.put(None)  # ...and the observer re-reads without pulling
            deadline = time.monotonic() + 30
            while probes.empty() and time.monotonic() < deadline:
                time.sleep(0.002)
            between_pulls = probes.get()
            assert after_pull == between_pulls, (
                f"round {round_index}: reads changed without a pull: "
                f"{after_pull} -> {between_pulls}"
            )
            assert len(after_pull) == round_index  # last round's commit not yet pulled
        cluster.core.play()
        cluster.join_all(timeout=30)
        assert history_sizes == [1, 2, 3]  # the remote really did advance each round


FRONTEND = __import__("pathlib").Path(__file__).resolve().parents[1] / "frontend"


@pytest.mark.skipif(
    not (FRONTEND / "node_modules").is_dir(), reason="frontend not installed"
)
def test_ui_fidelity_secondary():
    with criterion("ui-fidelity [SECONDARY]"):
        import subprocess

        from test_ui_fixtures import build_fig5_controller

        from fastapi.testclient import TestClient
        from got.gotcha_server import build_app

        client = TestClient(build_app(build_fig5_controller(), ui_dir=None))
        live_state = client.get("/nodes/Grouper/state?version=3a27").content
        fixture = (FRONTEND / "tests" / "fixtures" / "fig5-state-3a27.json").read_bytes()
        assert live_state == fixture  # tooltip bytes == controller endpoint bytes
        proc = subprocess.run(
            ["npx", "vitest", "run"],
            cwd=FRONTEND,
            capture_output=True,
            text=True,
            timeout=240,
        )
        assert proc.returncode == 0, proc.stdout + proc.stderr
