"""Scripted multi-process debugging sessions for the word-frequency counter.

The driver launches the controller web service plus three OS processes (one
Grouper, two WordCounters), then steps every phase over the HTTP API in a
fixed order that forces the schedule where both workers fork from the same
version holding bar=2 and concurrently push bar=3. Under the buggy resolver
that merge yields bar=6; under the fixed one, bar=4.

The forced schedule, in terms of granted steps:

1. Grouper runs its seven commits (six lines, then the stops).
2. Each worker completes two full cycles (pull, count, commit, push),
   interleaved worker 1 first, so both see foo=1, bar=2, baz=1.
3. Both workers pull, count their third line (bar), and commit — but their
   pushes are held.
4. Worker 1's push is granted: a fast-forward at the Grouper (bar=3).
5. Worker 2's push is granted: its start version is no longer HEAD, the
   per-dimension write overlaps, and the resolver decides the count.
6. Everything remaining free-runs to completion.

With a breakpoint registered before stage 5 and play pressed instead, the
controller pauses all nodes mid respond-to-push at the Grouper, right before
its garbage-collect phase.
"""

from __future__ import annotations

import argparse
import logging
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field

import requests

from . import steps
from .gotcha_server import GotchaServer
from .sync import find_free_port

logger = logging.getLogger(__name__)

SAMPLE_LINES = ["foo", "bar", "bar", "baz", "bar", "bar"]

GROUPER = "Grouper"
WORKER1 = "WordCounter1"
WORKER2 = "WordCounter2"


class ScenarioError(RuntimeError):
    pass


class GotchaClient:
    """Thin typed client for the controller HTTP API."""

    def __init__(self, address: str, timeout: float = 30.0):
        self.base = f"http://{address}"
        self.timeout = timeout
        self.session = requests.Session()

    def _get(self, path: str) -> dict | list:
        resp = self.session.get(self.base + path, timeout=self.timeout)
        resp.raise_for_status()
        return resp.json()

    def _post(self, path: str, payload: dict) -> dict:
        resp = self.session.post(self.base + path, json=payload, timeout=self.timeout)
        if resp.status_code >= 400:
            raise ScenarioError(f"{path}: {resp.status_code} {resp.text}")
        return resp.json()

    def topology(self) -> dict:
        return self._get("/topology")

    def steps(self, node: str) -> dict:
        return self._get(f"/nodes/{node}/steps")

    def pending(self, node: str) -> list[dict]:
        return self.steps(node)["pending"]

    def history(self, node: str) -> dict:
        return self._get(f"/nodes/{node}/history")

    def state(self, node: str, version: str | None = None) -> dict:
        suffix = f"?version={version}" if version else ""
        return self._get(f"/nodes/{node}/state{suffix}")

    def step_node(self, node: str) -> None:
        self._post("/control", {"action": "step_node", "node": node})

    def play(self) -> None:
        self._post("/control", {"action": "play"})

    def pause(self) -> None:
        self._post("/control", {"action": "pause"})

    def add_breakpoint(self, predicate: str) -> int:
        return self._post("/breakpoints", {"predicate": predicate})["id"]

    def remove_breakpoint(self, bp_id: int) -> None:
        resp = self.session.delete(f"{self.base}/breakpoints/{bp_id}", timeout=self.timeout)
        resp.raise_for_status()

    def reorder(self, node: str, step_id: str, direction: str) -> None:
        self._post(f"/nodes/{node}/reorder", {"step_id": step_id, "direction": direction})


@dataclass
class Transcript:
    """What the driver observed, grant by grant."""

    grants: list[dict] = field(default_factory=list)
    histories: list[dict] = field(default_factory=list)

    def record(self, node: str, step: dict, history: dict) -> None:
        self.grants.append(
            {
                "node": node,
                "kind": step["kind"],
                "phase": step["phases"][min(step["current_phase"], len(step["phases"]) - 1)],
                "step_id": step["step_id"],
            }
        )
        self.histories.append(history)


@dataclass
class ScenarioResult:
    output: list[str]
    transcript: Transcript
    merge: str
    paused_on: dict | None = None
    paused_steps: dict | None = None
    paused_history: dict | None = None
    paused_state: dict | None = None
    elapsed: float = 0.0


class ScenarioDriver:
    """Steps a registered cluster phase by phase over the controller API."""

    def __init__(self, client: GotchaClient, poll: float = 0.004, timeout: float = 30.0):
        self.client = client
        self.poll = poll
        self.timeout = timeout
        self.transcript = Transcript()

    def _deadline(self):
        return time.monotonic() + self.timeout

    def wait_for_nodes(self, names: list[str]) -> None:
        deadline = self._deadline()
        while time.monotonic() < deadline:
            registered = {n["name"] for n in self.client.topology()["nodes"]}
            if set(names) <= registered:
                return
            time.sleep(self.poll)
        raise ScenarioError(f"nodes never registered: {names}")

    def wait_for_head(self, node: str, kind: str | None = None) -> dict:
        deadline = self._deadline()
        while time.monotonic() < deadline:
            pending = self.client.pending(node)
            if pending:
                head = pending[0]
                if kind is None or head["kind"] == kind:
                    return head
                if head["kind"] != kind:
                    raise ScenarioError(
                        f"expected {kind} at {node}, found {head['kind']} "
                        f"(step {head['step_id']})"
                    )
            time.sleep(self.poll)
        raise ScenarioError(f"timed out waiting for a {kind or 'step'} at {node}")

    def step_once(self, node: str) -> dict:
        """Grant one phase at a node and wait until it has executed."""
        before = self.wait_for_head(node)
        self.client.step_node(node)
        deadline = self._deadline()
        while time.monotonic() < deadline:
            pending = self.client.pending(node)
            current = next(
                (s for s in pending if s["step_id"] == before["step_id"]), None
            )
            if current is None:
                self.transcript.record(node, before, self.client.history(node))
                return before  # step completed and left the queue
            if (
                not current["mid_phase"]
                and current["current_phase"] > before["current_phase"]
            ):
                self.transcript.record(node, current, self.client.history(node))
                return current
            time.sleep(self.poll)
        raise ScenarioError(f"granted phase at {node} did not execute")

    def run_head_step(self, node: str, kind: str) -> None:
        """Step the head step at a node through all its remaining phases."""
        head = self.wait_for_head(node, kind)
        step_id = head["step_id"]
        deadline = self._deadline()
        while time.monotonic() < deadline:
            pending = self.client.pending(node)
            if not any(s["step_id"] == step_id for s in pending):
                return
            self.step_once(node)
        raise ScenarioError(f"{kind} at {node} did not finish")

    def drive_responder(self, responder: str, origin: str, kind: str) -> None:
        """Step the responder until the respond step for ``origin`` completes.

        Steps execute in queue order, so any local steps ahead of the respond
        step (the Grouper's checkout loop) are stepped through first.
        """
        deadline = self._deadline()
        while time.monotonic() < deadline:
            pending = self.client.pending(responder)
            respond = next(
                (s for s in pending if s["kind"] == kind and s["origin"] == origin), None
            )
            if respond is None:
                return
            self.step_once(responder)
        raise ScenarioError(f"{kind} from {origin} at {responder} did not finish")

    # -- worker primitives --

    def run_commit(self, node: str) -> None:
        self.run_head_step(node, steps.COMMIT)

    def run_checkout(self, node: str) -> None:
        self.run_head_step(node, steps.CHECKOUT)

    def run_fetch(self, worker: str, responder: str) -> None:
        head = self.wait_for_head(worker, steps.FETCH)
        self.step_once(worker)  # send-request: queues respond-to-fetch
        self.drive_responder(responder, worker, steps.RESPOND_FETCH)
        self.run_head_step(worker, steps.FETCH)

    def run_pull(self, worker: str, responder: str) -> None:
        self.run_fetch(worker, responder)
        self.run_checkout(worker)

    def start_push(self, worker: str) -> dict:
        """Grant only the push's send-request; returns the push step view."""
        self.wait_for_head(worker, steps.PUSH)
        return self.step_once(worker)

    def finish_push(self, worker: str, responder: str, push_step: dict) -> None:
        if not push_step.get("noop"):
            self.drive_responder(responder, worker, steps.RESPOND_PUSH)
        self.run_head_step(worker, steps.PUSH)

    def run_push(self, worker: str, responder: str) -> None:
        push_step = self.start_push(worker)
        self.finish_push(worker, responder, push_step)

    def worker_cycle(self, worker: str, responder: str, push: bool = True) -> None:
        self.run_pull(worker, responder)
        self.run_commit(worker)
        if push:
            self.run_push(worker, responder)


def _spawn(args: list[str]) -> subprocess.Popen:
    return subprocess.Popen(
        [sys.executable, "-m", "got.wordcount_cli", *args],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )


def run_scenario(
    merge: str = "buggy",
    breakpoint_text: str | None = None,
    lines: list[str] | None = None,
    timeout: float = 120.0,
) -> ScenarioResult:
    """Run the scripted session end to end; returns the Grouper's output."""
    started = time.monotonic()
    lines = lines if lines is not None else SAMPLE_LINES
    with tempfile.NamedTemporaryFile("w", suffix=".txt", delete=False) as fh:
        fh.write("".join(line + "\n" for line in lines))
        input_path = fh.name

    gcn = GotchaServer(port=find_free_port()).start_background()
    client = GotchaClient(gcn.address)
    grouper_port = find_free_port()
    procs: list[subprocess.Popen] = []
    paused_on = None
    paused_steps = None
    paused_history = None
    paused_state = None
    try:
        procs.append(
            _spawn(
                [
                    "grouper", input_path, "2",
                    "--port", str(grouper_port),
                    "--debug", gcn.address,
                    "--name", GROUPER,
                    "--merge", merge,
                ]
            )
        )
        for i, name in enumerate([WORKER1, WORKER2]):
            procs.append(
                _spawn(
                    [
                        "worker", f"127.0.0.1:{grouper_port}", str(i), "2",
                        "--debug", gcn.address,
                        "--name", name,
                    ]
                )
            )

        driver = ScenarioDriver(client)
        driver.wait_for_nodes([GROUPER, WORKER1, WORKER2])
        for _ in range(7):
            driver.run_commit(GROUPER)
        for _ in range(2):
            for worker in (WORKER1, WORKER2):
                driver.worker_cycle(worker, GROUPER)
        for worker in (WORKER1, WORKER2):
            driver.worker_cycle(worker, GROUPER, push=False)

        driver.run_push(WORKER1, GROUPER)  # fast-forward: bar=3 at the Grouper

        bp_id = None
        if breakpoint_text is not None:
            bp_id = client.add_breakpoint(breakpoint_text)
            client.play()
            deadline = time.monotonic() + 30
            while time.monotonic() < deadline:
                topo = client.topology()
                if topo["mode"] == "paused" and topo["paused_on"]:
                    break
                time.sleep(0.01)
            else:
                raise ScenarioError("breakpoint never paused the application")
            paused_on = client.topology()["paused_on"]
            paused_steps = client.steps(GROUPER)
            paused_history = client.history(GROUPER)
            paused_state = client.state(GROUPER)
            client.remove_breakpoint(bp_id)
        else:
            driver.run_push(WORKER2, GROUPER)  # the conflicting merge

        client.play()
        output: list[str] = []
        for proc in procs:
            try:
                stdout, stderr = proc.communicate(timeout=timeout)
            except subprocess.TimeoutExpired:
                proc.kill()
                stdout, stderr = proc.communicate()
                raise ScenarioError(
                    f"node process did not finish; stderr:\n{stderr[-2000:]}"
                )
            if proc.returncode != 0:
                raise ScenarioError(
                    f"node process failed rc={proc.returncode}; stderr:\n{stderr[-2000:]}"
                )
            if proc is procs[0]:
                output = [ln for ln in stdout.splitlines() if ln.strip()]
        return ScenarioResult(
            output=output,
            transcript=driver.transcript,
            merge=merge,
            paused_on=paused_on,
            paused_steps=paused_steps,
            paused_history=paused_history,
            paused_state=paused_state,
            elapsed=time.monotonic() - started,
        )
    finally:
        for proc in procs:
            if proc.poll() is None:
                proc.kill()
        gcn.stop()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="got-wordcount scenario", description="Scripted debugging session."
    )
    parser.add_argument("merge", choices=["buggy", "fixed"])
    parser.add_argument("--seed", type=int, default=None,
                        help="run extra randomized in-process sessions with this seed")
    parser.add_argument("--breakpoint", dest="breakpoint_text", default=None)
    opts = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    result = run_scenario(opts.merge, breakpoint_text=opts.breakpoint_text)
    for line in result.output:
        print(line)
    print(f"# merge={result.merge} grants={len(result.transcript.grants)} "
          f"elapsed={result.elapsed:.1f}s")
    if result.paused_on:
        print(f"# paused on breakpoint at {result.paused_on['node']} "
              f"during {result.paused_on['step_kind']}")
    if opts.seed is not None:
        from .harness import run_wordcount_debug

        out = run_wordcount_debug(SAMPLE_LINES, workers=2, merge=opts.merge, seed=opts.seed)
        print(f"# randomized in-process run (seed={opts.seed}): {out}")
    return 0
