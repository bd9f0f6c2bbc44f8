"""The per-node object repository: a staging snapshot plus a version history.

Application code sees an object heap: read objects, add objects, assign to
their dimensions. All of that touches only the local snapshot, so reads are
stable no matter what peers are doing. Publishing and receiving state goes
through four primitives:

* ``commit``  — write staged changes into the local version history
* ``checkout`` — update the snapshot to the version history HEAD
* ``push`` / ``fetch`` — exchange committed history with the remote peer
  (``pull`` is fetch followed by checkout)

Each primitive decomposes into an ordered list of phases. Outside debug mode
the phases run back to back; under a debug controller every phase is granted
individually, which is what makes the whole pipeline steppable.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import steps
from .diff import (
    DELETED,
    MODIFIED,
    NEW,
    Diff,
    ObjectDelta,
    Resolver,
    apply_diff,
    compose_diffs,
    default_resolver,
    diff_states,
)
from .graph import ROOT, SNAPSHOT_REF, VersionGraph
from .messages import (
    ErrorReply,
    FetchRequest,
    FetchResponse,
    PushAck,
    PushRequest,
    SyncError,
    SyncMessage,
)
from .schema import (
    BINDING_ATTR,
    DimensionField,
    ObjectState,
    PrimValue,
    SchemaRegistry,
    TypeSchema,
    check_kind,
)
from .schema import State  # noqa: F401  (re-exported for app code)

logger = logging.getLogger(__name__)


class DataframeError(RuntimeError):
    """Misuse of the repository API."""


class StaleHandleError(DataframeError):
    """A handle from before the last checkout was read or written."""


class Binding:
    """Connects a tracked object to its snapshot generation."""

    __slots__ = ("df", "type_name", "pkey", "generation")

    def __init__(self, df: "Dataframe", type_name: str, pkey: PrimValue, generation: int):
        self.df = df
        self.type_name = type_name
        self.pkey = pkey
        self.generation = generation

    def _check(self) -> None:
        if self.generation != self.df.snapshot.generation:
            raise StaleHandleError(
                f"handle for {self.type_name}[{self.pkey!r}] predates the last checkout"
            )

    def read(self, dim: str) -> PrimValue:
        self._check()
        obj = self.df.snapshot.materialized.get(self.type_name, self.pkey)
        if obj is None:
            raise DataframeError(f"object {self.type_name}[{self.pkey!r}] no longer present")
        return obj.dims[dim]

    def write(self, dim: str, value: PrimValue) -> None:
        self._check()
        self.df._stage_write(self.type_name, self.pkey, dim, value)


@dataclass
class Snapshot:
    """Staging area: a base version, its materialized state, and staged writes."""

    base_version: str
    materialized: State
    staged: Diff
    generation: int = 0


class Dataframe:
    """Repository façade owned by one node."""

    def __init__(
        self,
        types: Sequence[type | TypeSchema],
        *,
        node_name: str = "node",
        resolver: Resolver | None = None,
        remote: str | None = None,
        transport=None,
    ):
        self.node_name = node_name
        self.registry = SchemaRegistry()
        self._classes: dict[str, type] = {}
        for t in types:
            self._register_type(t)
        self.graph = VersionGraph(self.registry)
        self.graph.update_ref(SNAPSHOT_REF, ROOT)
        self.snapshot = Snapshot(base_version=ROOT, materialized=State(), staged=Diff())
        self.resolver = resolver
        self.remote = remote
        self.transport = transport
        self.lock = threading.RLock()
        self.executor = DirectExecutor()
        self._peer_name: str | None = None

    # -- Type plumbing --

    def _register_type(self, t: type | TypeSchema) -> None:
        if isinstance(t, TypeSchema):
            schema = self.registry.add(t)
            namespace = {
                name: DimensionField(kind, primary=(name == schema.primary_key))
                for name, kind in schema.dimensions
            }

            def _init(obj, **dims):
                for k, v in dims.items():
                    setattr(obj, k, v)

            namespace["__init__"] = _init
            self._classes[schema.name] = type(schema.name, (), namespace)
        else:
            schema = self.registry.register_class(t)
            self._classes[schema.name] = t

    def type_class(self, name: str) -> type:
        return self._classes[name]

    def _type_name(self, type_or_name) -> str:
        name = type_or_name if isinstance(type_or_name, str) else type_or_name.__name__
        self.registry.get(name)  # raises UnknownTypeError when unregistered
        return name

    # -- Snapshot reads --

    def _handle(self, obj: ObjectState):
        cls = self._classes[obj.type_name]
        handle = object.__new__(cls)
        handle.__dict__[BINDING_ATTR] = Binding(
            self, obj.type_name, obj.pkey, self.snapshot.generation
        )
        return handle

    def read_one(self, type_or_name, pkey: PrimValue):
        """The snapshot's object of that type and key, or None."""
        name = self._type_name(type_or_name)
        with self.lock:
            obj = self.snapshot.materialized.get(name, pkey)
            return None if obj is None else self._handle(obj)

    def read_all(self, type_or_name) -> list:
        """All snapshot objects of a type, ordered by primary key."""
        name = self._type_name(type_or_name)
        with self.lock:
            return [self._handle(o) for o in self.snapshot.materialized.of_type(name)]

    # -- Snapshot writes --

    def _extract_dims(self, schema: TypeSchema, obj) -> dict:
        if obj.__dict__.get(BINDING_ATTR) is not None:
            raise DataframeError("object is already tracked by a snapshot")
        dims = {}
        for dim, kind in schema.dimensions:
            if dim not in obj.__dict__:
                raise DataframeError(f"{schema.name} object is missing dimension {dim!r}")
            value = obj.__dict__[dim]
            check_kind(value, kind, f"{schema.name}.{dim}")
            dims[dim] = value
        return dims

    def add_one(self, type_or_obj, obj=None) -> None:
        """Stage a new object; it is immediately readable locally."""
        if obj is None:
            obj = type_or_obj
        name = self._type_name(type(obj))
        schema = self.registry.get(name)
        dims = self._extract_dims(schema, obj)
        pkey = dims[schema.primary_key]
        with self.lock:
            if self.snapshot.materialized.contains(name, pkey):
                raise DataframeError(f"object {name}[{pkey!r}] already exists")
            self._stage((name, pkey), ObjectDelta(NEW, dims))
            obj.__dict__[BINDING_ATTR] = Binding(self, name, pkey, self.snapshot.generation)

    def add_many(self, type_or_objs, objs: Iterable | None = None) -> None:
        items = type_or_objs if objs is None else objs
        for obj in items:
            self.add_one(obj)

    def delete_one(self, type_or_name, pkey: PrimValue) -> None:
        name = self._type_name(type_or_name)
        with self.lock:
            if not self.snapshot.materialized.contains(name, pkey):
                raise DataframeError(f"no object {name}[{pkey!r}] to delete")
            self._stage((name, pkey), ObjectDelta(DELETED))

    def delete_all(self, type_or_name) -> None:
        name = self._type_name(type_or_name)
        with self.lock:
            for obj in self.snapshot.materialized.of_type(name):
                self._stage((name, obj.pkey), ObjectDelta(DELETED))

    def _stage_write(self, type_name: str, pkey: PrimValue, dim: str, value: PrimValue) -> None:
        schema = self.registry.get(type_name)
        if dim == schema.primary_key:
            raise DataframeError(f"primary key of {type_name}[{pkey!r}] cannot be reassigned")
        check_kind(value, schema.kind_of(dim), f"{type_name}.{dim}")
        with self.lock:
            if not self.snapshot.materialized.contains(type_name, pkey):
                raise DataframeError(f"object {type_name}[{pkey!r}] no longer present")
            self._stage((type_name, pkey), ObjectDelta(MODIFIED, {dim: value}))

    def _stage(self, key, delta: ObjectDelta) -> None:
        step = Diff({key: delta})
        self.snapshot.staged = compose_diffs(self.snapshot.staged, step)
        self.snapshot.materialized = apply_diff(self.snapshot.materialized, step)

    # -- Version-history primitives --

    def commit(self) -> None:
        """Write staged changes to the version history (no-op when nothing staged)."""
        self.executor.run(self, CommitRun(self))

    def checkout(self) -> None:
        """Update the snapshot to the version history HEAD."""
        with self.lock:
            if not self.snapshot.staged.empty:
                raise DataframeError("checkout with uncommitted staged changes")
        self.executor.run(self, CheckoutRun(self))

    def push(self) -> None:
        """Send committed history the peer does not have yet."""
        self._require_remote()
        self.executor.run(self, PushRun(self))

    def fetch(self) -> None:
        """Bring the peer's committed history into the local version history."""
        self._require_remote()
        self.executor.run(self, FetchRun(self))

    def pull(self) -> None:
        self.fetch()
        self.checkout()

    def _require_remote(self) -> None:
        if self.remote is None:
            raise DataframeError("no remote peer configured")

    # -- Peer bookkeeping --

    def peer_ref(self) -> str | None:
        """Name of the ref tracking the shared sync point with the remote peer."""
        return self._peer_name

    def note_peer_name(self, name: str) -> None:
        if self._peer_name is None:
            self._peer_name = name

    def sync_base(self) -> str:
        """Latest version both we and the peer are known to share."""
        if self._peer_name is None:
            return ROOT
        return self.graph.refs.get(self._peer_name, ROOT)

    # -- Inbound requests (direct transport) --

    def respond_run(self, message: SyncMessage) -> "PrimitiveRun":
        if isinstance(message, PushRequest):
            return RespondPushRun(self, message)
        if isinstance(message, FetchRequest):
            return RespondFetchRun(self, message)
        raise SyncError(f"node cannot serve {type(message).__name__}")

    def handle_sync(self, message: SyncMessage) -> SyncMessage:
        """Serve one inbound request completely; used by the direct transport."""
        run = self.respond_run(message)
        with self.lock:
            i = 0
            while i < len(run.phases):
                run.execute_phase(i)
                i += 1
        return run.reply


class PrimitiveRun:
    """One invocation of a version-history primitive, decomposed into phases."""

    kind: str = ""

    def __init__(self, df: Dataframe):
        self.df = df
        self.phases: list[str] = list(steps.INITIAL_PHASES[self.kind])
        self.inbox: SyncMessage | None = None   # reply delivered before a receive phase
        self.reply: SyncMessage | None = None   # final reply (respond runs)
        self.next_index = 0

    def execute_phase(self, index: int) -> SyncMessage | None:
        """Run one phase; returns a message to transmit, if the phase emits one.

        ``next_index`` points just past the executing phase before the body
        runs, so a body can insert a follow-up phase (run-merge) there.
        """
        phase = self.phases[index]
        self.next_index = index + 1
        return getattr(self, "_phase_" + phase.replace("-", "_"))()


class CommitRun(PrimitiveRun):
    kind = steps.COMMIT

    def _phase_receive_data(self):
        df = self.df
        snap = df.snapshot
        self.base = snap.base_version
        self.diff = snap.staged
        if self.base not in df.graph:
            # The history was rolled back under us; re-base what the app sees
            # onto the graph's snapshot ref so the committed edge stays sound.
            self.base = df.graph.refs.get(SNAPSHOT_REF, df.graph.head)
            self.diff = diff_states(df.graph.state_at(self.base), snap.materialized)
        self.noop = self.diff.empty

    def _phase_extend_graph(self):
        if self.noop:
            return None
        df = self.df
        v = df.graph.extend(self.base, self.diff)
        df.snapshot.base_version = v
        df.snapshot.staged = Diff()
        df.graph.update_ref(SNAPSHOT_REF, v)
        if df.graph.head != v:
            # Remote changes landed since the last checkout: unite them now.
            df.graph.merge_existing(v, df.resolver)
        return None

    def _phase_garbage_collect(self):
        self.df.graph.garbage_collect()
        return None


class CheckoutRun(PrimitiveRun):
    kind = steps.CHECKOUT

    def _phase_read_head(self):
        self.target = self.df.graph.head
        self.state = self.df.graph.state_at(self.target)
        return None

    def _phase_apply_to_snapshot(self):
        snap = self.df.snapshot
        snap.base_version = self.target
        snap.materialized = self.state
        snap.generation += 1
        self.df.graph.update_ref(SNAPSHOT_REF, self.target)
        return None


class PushRun(PrimitiveRun):
    kind = steps.PUSH

    def __init__(self, df: Dataframe):
        super().__init__(df)
        self.noop = False
        self.retried = False
        self.from_root = False

    def _phase_send_request(self):
        df = self.df
        start = ROOT if self.from_root else df.sync_base()
        diff, end = df.graph.delta_between(start)
        if end == start:
            self.noop = True
            return None
        self.sent_end = end
        return PushRequest(sender=df.node_name, start=start, end=end, diff=diff)

    def _phase_receive_ack(self):
        if self.noop:
            return None
        ack = self.inbox
        if isinstance(ack, ErrorReply):
            if ack.code == "unknown-version" and not self.retried:
                # Peer lost our sync point (rolled back): resend the full
                # history from ROOT once.
                self.retried = True
                self.from_root = True
                self.phases += [steps.SEND_REQUEST, steps.RECEIVE_ACK]
                return None
            raise SyncError(f"push rejected: {ack.code}: {ack.detail}")
        if not isinstance(ack, PushAck):
            raise SyncError(f"push expected an ack, got {ack!r}")
        self.df.note_peer_name(ack.responder)
        self.df.graph.update_ref(ack.responder, self.sent_end)
        return None


class FetchRun(PrimitiveRun):
    kind = steps.FETCH

    def __init__(self, df: Dataframe):
        super().__init__(df)
        self.noop = False
        self.plan = None
        self.merged = None

    def _phase_send_request(self):
        df = self.df
        self.from_version = df.sync_base()
        return FetchRequest(requester=df.node_name, from_version=self.from_version)

    def _phase_receive_data(self):
        resp = self.inbox
        if isinstance(resp, ErrorReply):
            raise SyncError(f"fetch rejected: {resp.code}: {resp.detail}")
        if not isinstance(resp, FetchResponse):
            raise SyncError(f"fetch expected a response, got {resp!r}")
        self.resp = resp
        self.df.note_peer_name(resp.responder)
        self.noop = resp.new_head == resp.start_version
        return None

    def _phase_detect_conflict(self):
        if self.noop:
            return None
        self.plan = self.df.graph.plan_receive(
            self.resp.start_version, self.resp.new_head, self.resp.diff
        )
        if self.plan.needs_resolver:
            self.phases.insert(self.next_index, steps.RUN_MERGE)
        return None

    def _phase_run_merge(self):
        fn = self.df.resolver or default_resolver
        self.merged = fn(self.plan.conflicts, self.plan.orig, self.plan.yours, self.plan.theirs)
        return None

    def _phase_extend_graph(self):
        if self.noop:
            return None
        df = self.df
        df.graph.apply_receive(self.plan, self.merged)
        df.graph.update_ref(self.resp.responder, self.resp.new_head)
        return None

    def _phase_garbage_collect(self):
        self.df.graph.garbage_collect()
        return None


class RespondPushRun(PrimitiveRun):
    kind = steps.RESPOND_PUSH

    def __init__(self, df: Dataframe, request: PushRequest):
        super().__init__(df)
        self.request = request
        self.error: ErrorReply | None = None
        self.plan = None
        self.merged = None

    def _phase_receive_data(self):
        if self.request.start not in self.df.graph:
            self.error = ErrorReply(
                code="unknown-version",
                detail=f"start version {self.request.start!r} is not in this history",
            )
        return None

    def _phase_detect_conflict(self):
        if self.error:
            return None
        self.plan = self.df.graph.plan_receive(
            self.request.start, self.request.end, self.request.diff
        )
        if self.plan.needs_resolver:
            self.phases.insert(self.next_index, steps.RUN_MERGE)
        return None

    def _phase_run_merge(self):
        fn = self.df.resolver or default_resolver
        self.merged = fn(self.plan.conflicts, self.plan.orig, self.plan.yours, self.plan.theirs)
        return None

    def _phase_extend_graph(self):
        if self.error:
            return None
        df = self.df
        df.graph.apply_receive(self.plan, self.merged)
        df.graph.update_ref(self.request.sender, self.request.end)
        return None

    def _phase_garbage_collect(self):
        if self.error:
            self.reply = self.error
            return self.reply
        self.df.graph.garbage_collect()
        self.reply = PushAck(accepted_head=self.df.graph.head, responder=self.df.node_name)
        return self.reply


class RespondFetchRun(PrimitiveRun):
    kind = steps.RESPOND_FETCH

    def __init__(self, df: Dataframe, request: FetchRequest):
        super().__init__(df)
        self.request = request

    def _phase_compute_delta(self):
        df = self.df
        from_v = self.request.from_version
        if from_v not in df.graph:
            fallback = df.graph.refs.get(self.request.requester, ROOT)
            from_v = fallback if fallback in df.graph else ROOT
        self.from_version = from_v
        self.delta, self.head_sent = df.graph.delta_between(from_v)
        return None

    def _phase_send_response(self):
        df = self.df
        df.graph.update_ref(self.request.requester, self.head_sent)
        self.reply = FetchResponse(
            start_version=self.from_version,
            diff=self.delta,
            new_head=self.head_sent,
            responder=df.node_name,
        )
        return self.reply


class DirectExecutor:
    """Runs a primitive's phases back to back, doing synchronous request/reply.

    The repository lock is released only around the network exchange, so the
    receive-and-merge section stays atomic with respect to inbound requests
    handled on the node's server thread.
    """

    def run(self, df: Dataframe, run: PrimitiveRun) -> None:
        i = 0
        while i < len(run.phases):
            outbound = None
            with df.lock:
                while i < len(run.phases):
                    emitted = run.execute_phase(i)
                    i += 1
                    if isinstance(emitted, (PushRequest, FetchRequest)):
                        outbound = emitted
                        break
            if outbound is not None:
                if df.transport is None:
                    raise SyncError("no transport configured for remote exchange")
                reply = df.transport.send(df.remote, outbound)
                run.inbox = reply
