"""In-process cluster harness: many nodes, one controller, no sockets.

Used for deterministic replay experiments and volume testing: node
applications run on threads, the controller core is called directly, and
direct-mode messages travel over an in-memory network. Grant interleavings
can be driven step by step (scripted) or sampled randomly from the set of
grantable phases (seeded), which is how schedule-dependent behaviour gets
explored without multi-process overhead.
"""

from __future__ import annotations

import os
import random
import tempfile
import time

from .controller import ControllerCore
from .node import Node
from .sync import InProcessNetwork
from .wordcount import MERGE_FUNCTIONS, WORDCOUNT_TYPES, grouper_app, worker_app


class HarnessError(RuntimeError):
    pass


class LocalDebugChannel:
    """Debug channel calling the controller core directly (no HTTP)."""

    def __init__(self, core: ControllerCore, poll_timeout: float = 0.25):
        self.core = core
        self.poll_timeout = poll_timeout

    def register(self, name, address, remote, schemas) -> None:
        self.core.register_node(name, address, remote, schemas)

    def gate(self, envelope: dict) -> tuple[str, dict | None]:
        while True:
            action, reply = self.core.gate_phase(
                node=envelope["node"],
                step_id=envelope["step_id"],
                kind=envelope["kind"],
                phase_index=envelope["phase_index"],
                phases=envelope["phases"],
                payload=envelope.get("payload"),
                history=envelope.get("history"),
                noop=envelope.get("noop", False),
                timeout=self.poll_timeout,
            )
            if action != "hold":
                return action, reply

    def get_work(self, node: str) -> dict:
        return self.core.get_work(node, timeout=self.poll_timeout)

    def report(self, node, step_id, phase_index, phases, history, reply, done) -> None:
        self.core.report_phase(
            node=node, step_id=step_id, phase_index=phase_index,
            phases=phases, history=history, reply=reply, done=done,
        )

    def report_command(self, node, history, error) -> None:
        self.core.report_command(node, history, error)

    def notify_exit(self, node, error) -> None:
        self.core.node_exited(node, error)


class LocalCluster:
    """A controller core plus thread-hosted nodes in one process."""

    def __init__(self):
        self.core = ControllerCore()
        self.network = InProcessNetwork()
        self.nodes: dict[str, Node] = {}

    def add_node(
        self,
        app,
        *,
        name: str,
        types,
        remote: str | None = None,
        serves: bool = False,
        resolver=None,
        debug: bool = True,
    ) -> Node:
        if name in self.nodes:
            raise HarnessError(f"duplicate node name {name!r}")
        node = Node(
            app,
            types=types,
            remote=remote,
            resolver=resolver,
            name=name,
            channel=LocalDebugChannel(self.core) if debug else None,
            transport=None if debug else self.network.transport(),
        )
        node.ensure_setup()
        if serves and not debug:
            self.network.register(f"local:{name}", node.df)
        self.nodes[name] = node
        return node

    def start(self, name: str, *args) -> Node:
        return self.nodes[name].start_async(*args)

    def join_all(self, timeout: float = 60.0) -> None:
        deadline = time.monotonic() + timeout
        for node in self.nodes.values():
            node.join(max(0.1, deadline - time.monotonic()))

    # -- driving --

    def step(self, name: str) -> None:
        self.core.step_node(name)
        if not self.core.wait_quiescent(timeout=30.0):
            raise HarnessError("cluster did not settle after a step")

    def run_random(self, seed: int, max_grants: int = 200_000) -> int:
        """Grant one ready phase at a time, chosen uniformly at random."""
        rng = random.Random(seed)
        grants = 0
        stall_deadline = time.monotonic() + 60.0
        while not self.core.all_exited():
            ready = self.core.ready_nodes()
            if not ready:
                if time.monotonic() > stall_deadline:
                    raise HarnessError("no grantable work and nodes are still running")
                time.sleep(0.0005)
                continue
            stall_deadline = time.monotonic() + 60.0
            self.step(rng.choice(ready))
            grants += 1
            if grants > max_grants:
                raise HarnessError("grant budget exhausted")
        return grants


def _write_lines(lines) -> str:
    fd, path = tempfile.mkstemp(prefix="wordcount-", suffix=".txt")
    with os.fdopen(fd, "w") as fh:
        for line in lines:
            fh.write(line.rstrip("\n") + "\n")
    return path


def run_wordcount_direct(lines, workers: int = 2, merge: str = "fixed") -> list[str]:
    """The counter app over the in-memory network, no debugger involved."""
    path = _write_lines(lines)
    try:
        network = InProcessNetwork()
        grouper = Node(
            grouper_app,
            types=WORDCOUNT_TYPES,
            resolver=MERGE_FUNCTIONS[merge],
            name="Grouper",
        )
        grouper.ensure_setup()
        network.register("local:Grouper", grouper.df)
        grouper.start_async(path, workers)
        worker_nodes = []
        for i in range(workers):
            w = Node(
                worker_app,
                types=WORDCOUNT_TYPES,
                remote="local:Grouper",
                transport=network.transport(),
                name=f"WordCounter{i + 1}",
            )
            worker_nodes.append(w.start_async(i, workers))
        output = grouper.join(timeout=120)
        for w in worker_nodes:
            w.join(timeout=120)
        return output
    finally:
        os.unlink(path)


def run_wordcount_debug(
    lines,
    workers: int = 2,
    merge: str = "fixed",
    seed: int | None = None,
) -> list[str]:
    """The counter app under the controller.

    With a seed, phases are granted one at a time in a seeded-random order;
    without one the controller free-runs.
    """
    path = _write_lines(lines)
    cluster = LocalCluster()
    try:
        cluster.add_node(
            grouper_app,
            name="Grouper",
            types=WORDCOUNT_TYPES,
            resolver=MERGE_FUNCTIONS[merge],
        )
        for i in range(workers):
            cluster.add_node(
                worker_app,
                name=f"WordCounter{i + 1}",
                types=WORDCOUNT_TYPES,
                remote="Grouper",
            )
        cluster.start("Grouper", path, workers)
        for i in range(workers):
            cluster.start(f"WordCounter{i + 1}", i, workers)
        if seed is None:
            cluster.core.play()
            cluster.join_all(timeout=120)
        else:
            cluster.run_random(seed)
            cluster.join_all(timeout=30)
        return cluster.nodes["Grouper"].result
    finally:
        os.unlink(path)
