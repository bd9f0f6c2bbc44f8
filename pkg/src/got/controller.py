"""The controller: central debugger gating every version-history phase.

Nodes launched in debug mode register here, then ask permission before every
phase of every primitive (commit, checkout, push, fetch). Inter-node messages
are relayed through the controller: granting a push/fetch send-request queues
a respond-to-push/fetch step at the receiving node, whose own agent executes
the response phase by phase under the same gating. The user steps phases one
at a time, reorders pending steps, sets conditional breakpoints, rolls node
histories back, and watches everything through read-only views.

All mutation funnels through one lock; blocked grant requests wait on its
condition variable and are re-examined whenever anything changes. Grants
carry a global sequence number, so stepping produces a total order of phase
executions across the application.
"""

from __future__ import annotations

import itertools
import logging
import queue
import threading
import time
from dataclasses import dataclass, field

from . import steps
from .breakpoints import Predicate, compile_predicate
from .graph import ROOT, VersionGraph
from .wire import state_to_wire

logger = logging.getLogger(__name__)

PAUSED = "paused"
FREE_RUN = "free-run"

RESPOND_KINDS = (steps.RESPOND_PUSH, steps.RESPOND_FETCH)

EVENT_HISTORY = "history-updated"
EVENT_STEP_QUEUED = "step-queued"
EVENT_PHASE = "phase-executed"
EVENT_BREAKPOINT = "breakpoint-hit"
EVENT_MODE = "mode-changed"


class ControllerError(RuntimeError):
    """Invalid controller request (unknown node, bad step, bad mode...)."""


@dataclass
class StepRecord:
    """One intercepted primitive at one node, tracked phase by phase."""

    step_id: str
    node: str
    kind: str
    phases: list[str]
    seq: int
    current_phase: int = 0
    payload: dict | None = None            # inbound message for respond steps
    origin: tuple[str, str] | None = None  # (node, step_id) that caused a respond step
    inbox: dict | None = None              # reply waiting for a receive phase
    reply: dict | None = None
    mid_phase: bool = False
    done: bool = False
    noop: bool = False                     # no reply will ever arrive (empty push)
    grants: list[int] = field(default_factory=list)
    routed_upto: int = -1                  # highest envelope whose payload was relayed

    def to_wire(self) -> dict:
        return {
            "step_id": self.step_id,
            "node": self.node,
            "kind": self.kind,
            "phases": list(self.phases),
            "current_phase": self.current_phase,
            "origin": self.origin[0] if self.origin else None,
            "seq": self.seq,
            "mid_phase": self.mid_phase,
            "done": self.done,
            "noop": self.noop,
            "grants": list(self.grants),
        }


@dataclass
class NodeRecord:
    name: str
    address: str | None
    remote: str | None
    schemas: list[dict]
    seq: int
    history: dict | None = None
    pending: list[StepRecord] = field(default_factory=list)
    executed: list[StepRecord] = field(default_factory=list)
    status: str = "running"
    error: str | None = None
    command: dict | None = None

    def head_step(self) -> StepRecord | None:
        return self.pending[0] if self.pending else None


class ControllerCore:
    """Thread-safe debugger state machine; transports wrap it thinly."""

    def __init__(self, poll_timeout: float = 10.0):
        self._lock = threading.RLock()
        self._cv = threading.Condition(self._lock)
        self.poll_timeout = poll_timeout
        self.nodes: dict[str, NodeRecord] = {}
        self.breakpoints: dict[int, Predicate] = {}
        self.mode = PAUSED
        self.paused_on: dict | None = None
        self._tokens: dict[str, int] = {}
        self._grant_seq = itertools.count(1)
        self._step_seq = itertools.count(1)
        self._node_seq = itertools.count(1)
        self._event_seq = itertools.count(1)
        self._subscribers: list[queue.Queue] = []

    # -- Events --

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=4096)
        with self._lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def _emit(self, event_type: str, **data) -> None:
        event = {"seq": next(self._event_seq), "type": event_type, **data}
        for q in self._subscribers:
            try:
                q.put_nowait(event)
            except queue.Full:
                pass

    # -- Registration and lifecycle --

    def register_node(
        self,
        name: str,
        address: str | None,
        remote: str | None,
        schemas: list[dict] | None = None,
    ) -> None:
        with self._cv:
            if name in self.nodes:
                raise ControllerError(f"node {name!r} is already registered")
            self.nodes[name] = NodeRecord(
                name=name,
                address=address,
                remote=remote,
                schemas=schemas or [],
                seq=next(self._node_seq),
            )
            self._tokens[name] = 0
            self._emit(EVENT_HISTORY, node=name)
            self._cv.notify_all()
        logger.info("registered node %s (address=%s remote=%s)", name, address, remote)

    def node_exited(self, name: str, error: str | None = None) -> None:
        with self._cv:
            rec = self._node(name)
            rec.status = "failed" if error else "exited"
            rec.error = error
            self._emit(EVENT_HISTORY, node=name)
            self._cv.notify_all()

    def _node(self, name: str) -> NodeRecord:
        rec = self.nodes.get(name)
        if rec is None:
            raise ControllerError(f"unknown node {name!r}")
        return rec

    # -- Node-side gate for app-originated steps --

    def gate_phase(
        self,
        node: str,
        step_id: str,
        kind: str,
        phase_index: int,
        phases: list[str],
        payload: dict | None,
        history: dict | None,
        noop: bool = False,
        timeout: float | None = None,
    ) -> tuple[str, dict | None]:
        """Blocking permission request for one phase of an app-originated step.

        Returns ("proceed"|"forward"|"hold", forwarded_reply). The envelope's
        arrival reports the previous phase's completion; phase_index equal to
        the phase count marks the whole step complete and is never blocked.
        """
        deadline = time.monotonic() + (timeout if timeout is not None else self.poll_timeout)
        with self._cv:
            rec = self._node(node)
            step = self._find_step(rec, step_id)
            if step is None or step.done:
                if step is None:
                    step = StepRecord(
                        step_id=step_id, node=node, kind=kind,
                        phases=list(phases), seq=next(self._step_seq),
                    )
                    rec.pending.append(step)
                    self._emit(EVENT_STEP_QUEUED, node=node, step=step.to_wire())
                else:
                    return ("proceed", None)  # duplicate completion poll
            step.phases = list(phases)
            step.noop = noop
            progressed = phase_index > step.current_phase
            step.current_phase = max(step.current_phase, phase_index)
            step.mid_phase = False
            if history is not None:
                rec.history = history
                self._emit(EVENT_HISTORY, node=node)
            if payload is not None and phase_index > step.routed_upto:
                self._route_request(node, step, payload)
            step.routed_upto = max(step.routed_upto, phase_index)
            if progressed:
                self._emit(
                    EVENT_PHASE, node=node, step_id=step_id,
                    phase=phases[phase_index - 1] if 0 < phase_index <= len(phases) else None,
                )
            self._check_breakpoints()
            if phase_index >= len(step.phases):
                self._complete_step(rec, step)
                self._cv.notify_all()
                return ("proceed", None)
            self._cv.notify_all()
            while True:
                grant = self._try_grant(rec, step, agent_side=False)
                if grant is not None:
                    return grant
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return ("hold", None)
                self._cv.wait(remaining)

    def _find_step(self, rec: NodeRecord, step_id: str) -> StepRecord | None:
        for step in rec.pending:
            if step.step_id == step_id:
                return step
        for step in rec.executed:
            if step.step_id == step_id:
                return step
        return None

    def _complete_step(self, rec: NodeRecord, step: StepRecord) -> None:
        step.done = True
        step.mid_phase = False
        if step in rec.pending:
            rec.pending.remove(step)
        rec.executed.append(step)
        if step.reply is not None and step.origin is not None:
            self._deliver_reply(step)

    def _deliver_reply(self, step: StepRecord) -> None:
        origin_node, origin_step_id = step.origin
        rec = self.nodes.get(origin_node)
        if rec is None:
            return
        target = self._find_step(rec, origin_step_id)
        if target is not None and not target.done:
            target.inbox = step.reply

    def _route_request(self, from_node: str, from_step: StepRecord, payload: dict) -> None:
        """Relay an emitted push/fetch request: queue a respond step at the target."""
        msg_type = payload.get("type")
        if msg_type not in ("push-request", "fetch-request"):
            raise ControllerError(f"node {from_node!r} emitted unexpected {msg_type!r}")
        sender = self._node(from_node)
        target = self._resolve_remote(sender)
        kind = steps.RESPOND_PUSH if msg_type == "push-request" else steps.RESPOND_FETCH
        respond = StepRecord(
            step_id=f"{from_step.step_id}:{kind}",
            node=target.name,
            kind=kind,
            phases=list(steps.INITIAL_PHASES[kind]),
            seq=next(self._step_seq),
            payload=payload,
            origin=(from_node, from_step.step_id),
        )
        target.pending.append(respond)
        self._emit(EVENT_STEP_QUEUED, node=target.name, step=respond.to_wire())

    def _resolve_remote(self, sender: NodeRecord) -> NodeRecord:
        if sender.remote is None:
            raise ControllerError(f"node {sender.name!r} has no configured remote")
        for rec in self.nodes.values():
            if rec.name == sender.remote or (rec.address and rec.address == sender.remote):
                return rec
        raise ControllerError(f"no registered node at {sender.remote!r}")

    # -- Agent-side work delivery (respond steps, commands) --

    def get_work(self, node: str, timeout: float | None = None) -> dict:
        """Long-poll for the next granted respond-step phase or command."""
        deadline = time.monotonic() + (timeout if timeout is not None else self.poll_timeout)
        with self._cv:
            rec = self._node(node)
            while True:
                if rec.command is not None and not rec.command.get("running"):
                    rec.command["running"] = True
                    return {
                        "action": "command",
                        "command": {k: v for k, v in rec.command.items()
                                    if k not in ("running", "event")},
                    }
                step = rec.head_step()
                if step is not None and step.kind in RESPOND_KINDS:
                    grant = self._try_grant(rec, step, agent_side=True)
                    if grant is not None:
                        return {
                            "action": "execute",
                            "step_id": step.step_id,
                            "kind": step.kind,
                            "phase_index": step.current_phase,
                            "phase": step.phases[step.current_phase],
                            "phases": list(step.phases),
                            "payload": step.payload,
                        }
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return {"action": "hold"}
                self._cv.wait(remaining)

    def report_phase(
        self,
        node: str,
        step_id: str,
        phase_index: int,
        phases: list[str],
        history: dict | None,
        reply: dict | None = None,
        done: bool = False,
    ) -> None:
        """Agent report: one respond-step phase executed (or a step finished)."""
        with self._cv:
            rec = self._node(node)
            step = self._find_step(rec, step_id)
            if step is None:
                raise ControllerError(f"unknown step {step_id!r} at {node!r}")
            step.phases = list(phases)
            step.current_phase = phase_index + 1
            step.mid_phase = False
            if history is not None:
                rec.history = history
                self._emit(EVENT_HISTORY, node=node)
            if reply is not None:
                step.reply = reply
            self._emit(EVENT_PHASE, node=node, step_id=step_id,
                       phase=phases[phase_index] if phase_index < len(phases) else None)
            if done or step.current_phase >= len(step.phases):
                self._complete_step(rec, step)
            self._check_breakpoints()
            self._cv.notify_all()

    def report_command(self, node: str, history: dict | None, error: str | None = None) -> None:
        with self._cv:
            rec = self._node(node)
            command = rec.command
            rec.command = None
            if history is not None:
                rec.history = history
                self._emit(EVENT_HISTORY, node=node)
            if command is not None:
                command["error"] = error
                command["event"].set()
            self._cv.notify_all()

    # -- Grant machinery --

    def _try_grant(self, rec: NodeRecord, step: StepRecord, agent_side: bool) -> tuple | None:
        if rec.command is not None:
            return None
        if rec.head_step() is not step or step.mid_phase or step.done:
            return None
        if not self._input_ready(step):
            return None
        if self.mode != FREE_RUN:
            if self._tokens.get(rec.name, 0) <= 0:
                return None
            self._tokens[rec.name] -= 1
        step.mid_phase = True
        step.grants.append(next(self._grant_seq))
        if agent_side:
            return ("execute", None)
        if step.inbox is not None:
            reply = step.inbox
            step.inbox = None
            return ("forward", reply)
        return ("proceed", None)

    def _input_ready(self, step: StepRecord) -> bool:
        if step.current_phase >= len(step.phases):
            return True
        phase = step.phases[step.current_phase]
        if step.kind == steps.PUSH and phase == steps.RECEIVE_ACK:
            return step.noop or step.inbox is not None
        if step.kind == steps.FETCH and phase == steps.RECEIVE_DATA:
            return step.inbox is not None
        return True

    # -- Breakpoints --

    def add_breakpoint(self, text: str) -> int:
        predicate = compile_predicate(text)  # syntax errors surface here
        with self._cv:
            bp_id = max(self.breakpoints, default=0) + 1
            self.breakpoints[bp_id] = predicate
            return bp_id

    def remove_breakpoint(self, bp_id: int) -> None:
        with self._cv:
            if bp_id not in self.breakpoints:
                raise ControllerError(f"no breakpoint {bp_id}")
            del self.breakpoints[bp_id]
            self.paused_on = None

    def list_breakpoints(self) -> list[dict]:
        with self._lock:
            return [{"id": i, "text": p.text} for i, p in sorted(self.breakpoints.items())]

    def _check_breakpoints(self) -> None:
        if not self.breakpoints:
            return
        for name, rec in self.nodes.items():
            if rec.history is None:
                continue
            graph = VersionGraph.from_wire(rec.history)
            state = graph.state_at(graph.head)
            for bp_id, predicate in self.breakpoints.items():
                if predicate.matches(state):
                    step = rec.head_step()
                    hit = {
                        "breakpoint": bp_id,
                        "text": predicate.text,
                        "node": name,
                        "step_id": step.step_id if step else None,
                        "step_kind": step.kind if step else None,
                    }
                    if self.mode == FREE_RUN:
                        self.mode = PAUSED
                        self.paused_on = hit
                        self._tokens = {n: 0 for n in self._tokens}
                        self._emit(EVENT_BREAKPOINT, **hit)
                        self._emit(EVENT_MODE, mode=self.mode)
                    elif self.paused_on != hit:
                        self.paused_on = hit
                        self._emit(EVENT_BREAKPOINT, **hit)
                    return

    # -- User controls --

    def step_node(self, name: str) -> None:
        with self._cv:
            if self.mode != PAUSED:
                raise ControllerError("stepping requires paused mode")
            rec = self._node(name)
            step = rec.head_step()
            if step is None:
                raise ControllerError(f"node {name!r} has no pending phase")
            if step.mid_phase:
                raise ControllerError(f"node {name!r} is mid-phase")
            if not self._input_ready(step):
                raise ControllerError(
                    f"node {name!r} is waiting on its peer's reply; step the peer first"
                )
            self._tokens[name] += 1
            self._cv.notify_all()

    def step_all(self) -> list[str]:
        with self._cv:
            if self.mode != PAUSED:
                raise ControllerError("stepping requires paused mode")
            stepped = []
            for name, rec in self.nodes.items():
                step = rec.head_step()
                if step is not None and not step.mid_phase and self._input_ready(step):
                    self._tokens[name] += 1
                    stepped.append(name)
            self._cv.notify_all()
            return stepped

    def play(self) -> None:
        with self._cv:
            self.mode = FREE_RUN
            self.paused_on = None
            self._emit(EVENT_MODE, mode=self.mode)
            self._cv.notify_all()

    def pause(self) -> None:
        with self._cv:
            self.mode = PAUSED
            self._tokens = {n: 0 for n in self._tokens}
            self._emit(EVENT_MODE, mode=self.mode)
            self._cv.notify_all()

    def reorder_step(self, name: str, step_id: str, direction: str) -> None:
        if direction not in ("promote", "demote"):
            raise ControllerError(f"direction must be promote or demote, not {direction!r}")
        with self._cv:
            rec = self._node(name)
            index = next(
                (i for i, s in enumerate(rec.pending) if s.step_id == step_id), None
            )
            if index is None:
                raise ControllerError(f"step {step_id!r} is not pending at {name!r}")
            step = rec.pending[index]
            if step.mid_phase or step.current_phase > 0:
                raise ControllerError("cannot reorder a step that has started executing")
            target = index - 1 if direction == "promote" else index + 1
            if target < 0 or target >= len(rec.pending):
                raise ControllerError(f"cannot {direction} step at position {index}")
            other = rec.pending[target]
            if other.mid_phase or other.current_phase > 0:
                raise ControllerError("cannot displace a step that has started executing")
            rec.pending[index], rec.pending[target] = rec.pending[target], rec.pending[index]
            self._emit(EVENT_STEP_QUEUED, node=name, step=step.to_wire(), reordered=True)
            self._cv.notify_all()

    def rollback_node(self, name: str, version: str, timeout: float = 30.0) -> None:
        with self._cv:
            if self.mode != PAUSED:
                raise ControllerError("rollback requires paused mode")
            rec = self._node(name)
            head = rec.head_step()
            if head is not None and head.mid_phase:
                raise ControllerError(f"node {name!r} is mid-phase")
            if rec.command is not None:
                raise ControllerError(f"node {name!r} already has a command in flight")
            if rec.history is not None:
                graph = VersionGraph.from_wire(rec.history)
                if version not in graph.vertices:
                    raise ControllerError(f"unknown version {version!r} at {name!r}")
                if not graph.is_ancestor(version, graph.head):
                    raise ControllerError(
                        f"{version!r} is not an ancestor of {name!r}'s HEAD"
                    )
            done = threading.Event()
            command = {"type": "rollback", "version": version, "event": done}
            rec.command = command
            self._cv.notify_all()
        if not done.wait(timeout):
            with self._cv:
                rec.command = None
            raise ControllerError(f"rollback command to {name!r} timed out")
        if command.get("error"):
            raise ControllerError(f"rollback at {name!r} failed: {command['error']}")

    # -- Read-only views --

    def get_topology(self) -> dict:
        with self._lock:
            nodes = [
                {
                    "name": rec.name,
                    "address": rec.address,
                    "remote": rec.remote,
                    "status": rec.status,
                }
                for rec in sorted(self.nodes.values(), key=lambda r: r.seq)
            ]
            edges = []
            for rec in self.nodes.values():
                if rec.remote is None:
                    continue
                try:
                    target = self._resolve_remote(rec)
                except ControllerError:
                    continue
                edges.append({"src": rec.name, "dst": target.name})
            return {
                "nodes": nodes,
                "edges": sorted(edges, key=lambda e: (e["src"], e["dst"])),
                "mode": self.mode,
                "paused_on": self.paused_on,
            }

    def get_history(self, name: str) -> dict:
        with self._lock:
            rec = self._node(name)
            if rec.history is None:
                return {"vertices": [ROOT], "edges": [], "head": ROOT, "refs": {}}
            return rec.history

    def get_steps(self, name: str) -> dict:
        with self._lock:
            rec = self._node(name)
            return {
                "executed": [s.to_wire() for s in rec.executed],
                "pending": [s.to_wire() for s in rec.pending],
            }

    def get_state(self, name: str, version: str | None = None) -> dict:
        history = self.get_history(name)
        graph = VersionGraph.from_wire(history)
        target = version or graph.head
        if target not in graph.vertices:
            raise ControllerError(f"unknown version {target!r} at {name!r}")
        return state_to_wire(graph.state_at(target))

    def get_schemas(self, name: str) -> list[dict]:
        with self._lock:
            return list(self._node(name).schemas)

    # -- Driver conveniences (scripted and randomized harnesses) --

    def ready_nodes(self) -> list[str]:
        """Nodes whose head pending phase could be granted right now."""
        with self._lock:
            ready = []
            for name, rec in self.nodes.items():
                step = rec.head_step()
                if (
                    step is not None
                    and not step.mid_phase
                    and rec.command is None
                    and self._input_ready(step)
                ):
                    ready.append(name)
            return sorted(ready)

    def wait_quiescent(self, timeout: float = 10.0) -> bool:
        """Wait until no grant is outstanding and no phase is executing."""
        deadline = time.monotonic() + timeout
        with self._cv:
            while True:
                busy = any(self._tokens.get(n, 0) > 0 for n in self._tokens) or any(
                    s.mid_phase for rec in self.nodes.values() for s in rec.pending
                )
                if not busy:
                    return True
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                self._cv.wait(remaining)

    def statuses(self) -> dict[str, str]:
        with self._lock:
            return {name: rec.status for name, rec in self.nodes.items()}

    def all_exited(self) -> bool:
        with self._lock:
            return bool(self.nodes) and all(
                rec.status in ("exited", "failed") for rec in self.nodes.values()
            )
