"""Per-node version history: a DAG of versions with diff-labeled edges.

Every vertex is one version of the node's published state; every edge carries
the diff that transforms its source version's state into its destination's.
The graph tracks a HEAD (the latest published version) and named refs — the
snapshot's base version plus, per known peer, the most recent version both
sides are known to share. Refs pin versions against garbage collection, which
is what keeps delta-encoded synchronization able to find a common base.

Receiving remote changes whose start version is no longer HEAD triggers a
three-way merge: the fork point (lowest common ancestor of the two tips)
supplies the original state, the local HEAD supplies "yours", and the incoming
version supplies "theirs". Conflicting objects go to a resolver; everything
else is united automatically.
"""

from __future__ import annotations

import logging
import uuid
from dataclasses import dataclass, field

from .diff import (
    ConflictReport,
    ConflictTriple,
    Diff,
    Resolver,
    apply_diff,
    compose_diffs,
    conflict_triples,
    default_resolver,
    detect_conflicts,
    diff_states,
)
from .schema import SchemaRegistry, State
from .wire import diff_from_wire, diff_to_wire

logger = logging.getLogger(__name__)

ROOT = "ROOT"
SNAPSHOT_REF = "SNAPSHOT"


class GraphError(ValueError):
    """Invalid version-graph operation."""


class UnknownVersionError(GraphError):
    """A version id is not present in the graph."""


class RollbackError(GraphError):
    """Rollback target is not an ancestor of HEAD."""


def new_version_id() -> str:
    """Globally unique version id: 128 random bits, hex."""
    return uuid.uuid4().hex


@dataclass(frozen=True)
class MergeReport:
    """What happened when remote changes were received."""

    merged_version: str
    conflicted: bool
    resolver_invoked: bool


@dataclass
class ReceivePlan:
    """Pure precomputation of how an incoming (start, end, diff) lands.

    Splitting planning from graph mutation lets a debugger expose conflict
    detection, resolver execution and graph extension as separate steps.
    """

    start: str
    end: str
    diff: Diff
    fast_forward: bool
    already_known: bool = False
    orig_version: str | None = None
    orig: State | None = None
    yours: State | None = None
    theirs: State | None = None
    report: ConflictReport | None = None
    conflicts: list[ConflictTriple] = field(default_factory=list)

    @property
    def needs_resolver(self) -> bool:
        return bool(self.conflicts)


class VersionGraph:
    """DAG of version ids with diff-labeled edges, a HEAD, and named refs.

    Instances are owned by one node; callers serialize mutation externally
    (the repository holds a lock; in debug mode the controller's one-phase-at-
    a-time granting adds global serialization above that).
    """

    def __init__(self, registry: SchemaRegistry | None = None):
        self.registry = registry
        self._out: dict[str, dict[str, Diff]] = {ROOT: {}}
        self._in: dict[str, dict[str, Diff]] = {ROOT: {}}
        self.head: str = ROOT
        self.refs: dict[str, str] = {}
        self._state_cache: dict[str, State] = {ROOT: State()}

    # -- Introspection --

    @property
    def vertices(self) -> set[str]:
        return set(self._out)

    def __contains__(self, version: str) -> bool:
        return version in self._out

    def edges(self) -> list[tuple[str, str, Diff]]:
        return [(src, dst, d) for src, outs in self._out.items() for dst, d in outs.items()]

    def in_degree(self, v: str) -> int:
        return len(self._in[v])

    def out_degree(self, v: str) -> int:
        return len(self._out[v])

    def parents(self, v: str) -> list[str]:
        return sorted(self._in[v])

    def _require(self, v: str) -> None:
        if v not in self._out:
            raise UnknownVersionError(f"unknown version {v!r}")

    def ancestors(self, v: str, strict: bool = False) -> set[str]:
        """All versions reachable backwards from v (including v unless strict)."""
        self._require(v)
        seen = {v}
        stack = [v]
        while stack:
            for parent in self._in[stack.pop()]:
                if parent not in seen:
                    seen.add(parent)
                    stack.append(parent)
        if strict:
            seen.discard(v)
        return seen

    def descendants(self, v: str, strict: bool = True) -> set[str]:
        self._require(v)
        seen = {v}
        stack = [v]
        while stack:
            for child in self._out[stack.pop()]:
                if child not in seen:
                    seen.add(child)
                    stack.append(child)
        if strict:
            seen.discard(v)
        return seen

    def is_ancestor(self, maybe_ancestor: str, v: str) -> bool:
        """Ancestor-or-equal reachability test."""
        return maybe_ancestor in self.ancestors(v)

    def _lowest_common_ancestor(self, a_ancestors: set[str], b_ancestors: set[str]) -> str:
        common = a_ancestors & b_ancestors
        if not common:
            raise GraphError("versions share no common ancestor")
        lowest = {
            c for c in common if not any(child in common for child in self._out[c])
        }
        # Mutually unrelated candidates tie; break by smallest id.
        return min(lowest)

    # -- State materialization --

    def state_at(self, version: str) -> State:
        """Fold edge diffs along any path from ROOT; all paths agree."""
        self._require(version)
        path: list[str] = []
        v = version
        while v not in self._state_cache:
            path.append(v)
            v = min(self._in[v])  # deterministic parent choice
        state = self._state_cache[v]
        for node in reversed(path):
            parent = min(self._in[node])
            state = apply_diff(state, self._in[node][parent])
            self._state_cache[node] = state
        return state

    # -- Mutation --

    def _add_edge(self, src: str, dst: str, diff: Diff) -> None:
        if dst not in self._out:
            self._out[dst] = {}
            self._in[dst] = {}
        self._out[src][dst] = diff
        self._in[dst][src] = diff

    def extend(self, start: str, diff: Diff, version_id: str | None = None) -> str:
        """Add a fresh version reached from ``start`` by ``diff``.

        Fast-forwards HEAD when extending from it; extending from any other
        version creates a fork and leaves HEAD alone (the caller must merge).
        """
        self._require(start)
        v = version_id or new_version_id()
        if v in self._out:
            raise GraphError(f"version {v!r} already present")
        self._add_edge(start, v, diff)
        if start == self.head:
            self.head = v
        return v

    def update_ref(self, name: str, version: str) -> None:
        self._require(version)
        self.refs[name] = version

    # -- Receiving remote changes --

    def plan_receive(self, start: str, end: str, diff: Diff) -> ReceivePlan:
        """Work out how an incoming update lands, without mutating anything."""
        if end in self._out:
            # Duplicate delivery (possible after rollbacks): nothing to add.
            return ReceivePlan(start=start, end=end, diff=diff, fast_forward=False,
                               already_known=True)
        self._require(start)
        if start == self.head:
            return ReceivePlan(start=start, end=end, diff=diff, fast_forward=True)
        theirs = apply_diff(self.state_at(start), diff)
        end_ancestors = self.ancestors(start)  # plus end itself, which is new
        orig_version = self._lowest_common_ancestor(self.ancestors(self.head), end_ancestors)
        orig = self.state_at(orig_version)
        yours = self.state_at(self.head)
        report = detect_conflicts(orig, diff_states(orig, yours), diff_states(orig, theirs))
        conflicts = conflict_triples(sorted(report.conflicting, key=repr), orig, yours, theirs)
        return ReceivePlan(
            start=start,
            end=end,
            diff=diff,
            fast_forward=False,
            orig_version=orig_version,
            orig=orig,
            yours=yours,
            theirs=theirs,
            report=report,
            conflicts=conflicts,
        )

    def auto_merge_state(self, plan: ReceivePlan) -> State:
        """Merged state when no resolver is needed (disjoint concurrent changes)."""
        return apply_diff(plan.yours, plan.report.nonconflicting_theirs)

    def apply_receive(self, plan: ReceivePlan, merged: State | None = None) -> MergeReport:
        """Materialize a planned reception; ``merged`` is required for merges."""
        if plan.already_known:
            return MergeReport(merged_version=plan.end, conflicted=False, resolver_invoked=False)
        if plan.fast_forward:
            self.extend(plan.start, plan.diff, version_id=plan.end)
            return MergeReport(merged_version=plan.end, conflicted=False, resolver_invoked=False)
        if merged is None:
            merged = self.auto_merge_state(plan)
        if self.registry is not None:
            merged.validate(self.registry)
        self.extend(plan.start, plan.diff, version_id=plan.end)
        old_head = self.head
        m = new_version_id()
        self._add_edge(old_head, m, diff_states(plan.yours, merged))
        self._add_edge(plan.end, m, diff_states(plan.theirs, merged))
        self.head = m
        logger.debug("merged %s + %s -> %s (%d conflicts)",
                     old_head[:8], plan.end[:8], m[:8], len(plan.conflicts))
        return MergeReport(
            merged_version=m,
            conflicted=plan.needs_resolver,
            resolver_invoked=plan.needs_resolver,
        )

    def receive_update(
        self, start: str, end: str, diff: Diff, resolver: Resolver | None = None
    ) -> MergeReport:
        """Receive (start, end, diff) from a peer, merging if HEAD moved on.

        The resolver is invoked only when conflict detection finds objects it
        cannot unite automatically; with no resolver registered, a deterministic
        default (incoming side wins conflicting dimensions) is used.
        """
        plan = self.plan_receive(start, end, diff)
        merged = None
        if not plan.fast_forward and not plan.already_known and plan.needs_resolver:
            fn = resolver or default_resolver
            merged = fn(plan.conflicts, plan.orig, plan.yours, plan.theirs)
        return self.apply_receive(plan, merged)

    def merge_existing(self, tip: str, resolver: Resolver | None = None) -> MergeReport:
        """Merge an already-materialized fork tip into HEAD (commit-onto-stale-base)."""
        self._require(tip)
        if tip == self.head:
            return MergeReport(merged_version=tip, conflicted=False, resolver_invoked=False)
        orig_version = self._lowest_common_ancestor(self.ancestors(self.head), self.ancestors(tip))
        orig = self.state_at(orig_version)
        yours = self.state_at(self.head)
        theirs = self.state_at(tip)
        report = detect_conflicts(orig, diff_states(orig, yours), diff_states(orig, theirs))
        conflicts = conflict_triples(sorted(report.conflicting, key=repr), orig, yours, theirs)
        if conflicts:
            fn = resolver or default_resolver
            merged = fn(conflicts, orig, yours, theirs)
        else:
            merged = apply_diff(yours, report.nonconflicting_theirs)
        if self.registry is not None:
            merged.validate(self.registry)
        old_head = self.head
        m = new_version_id()
        self._add_edge(old_head, m, diff_states(yours, merged))
        self._add_edge(tip, m, diff_states(theirs, merged))
        self.head = m
        return MergeReport(merged_version=m, conflicted=bool(conflicts),
                           resolver_invoked=bool(conflicts))

    # -- Delta extraction --

    def delta_between(self, from_version: str) -> tuple[Diff, str]:
        """Composed diff from a known version to HEAD, plus the HEAD id.

        Composes edge diffs along a directed path when one exists; otherwise
        (no forward path, e.g. after a rollback) falls back to differencing
        the materialized states.
        """
        self._require(from_version)
        if from_version == self.head:
            return Diff(), self.head
        path = self._find_path(from_version, self.head)
        if path is None:
            return diff_states(self.state_at(from_version), self.state_at(self.head)), self.head
        diff = Diff()
        for src, dst in zip(path, path[1:]):
            diff = compose_diffs(diff, self._out[src][dst])
        return diff, self.head

    def _find_path(self, src: str, dst: str) -> list[str] | None:
        if src == dst:
            return [src]
        prev: dict[str, str] = {}
        queue = [src]
        seen = {src}
        while queue:
            v = queue.pop(0)
            for child in sorted(self._out[v]):
                if child in seen:
                    continue
                prev[child] = v
                if child == dst:
                    path = [dst]
                    while path[-1] != src:
                        path.append(prev[path[-1]])
                    return path[::-1]
                seen.add(child)
                queue.append(child)
        return None

    # -- Garbage collection --

    def garbage_collect(self) -> set[str]:
        """Squash linear chains between retained versions.

        Retained: ROOT, HEAD, every ref target, every junction (in- or
        out-degree above one) and every tip. Interior vertices of linear
        chains are removed and each chain's edges are replaced by their
        composition, so the state at every retained version is unchanged.
        Squashing a diamond collapses its parallel edges into one, which can
        turn former junctions into plain interiors, so the pass repeats until
        nothing more can be removed.
        """
        removed: set[str] = set()
        while True:
            pass_removed = self._gc_pass()
            if not pass_removed:
                break
            removed |= pass_removed
        if removed:
            logger.debug("garbage collected %d versions", len(removed))
        return removed

    def _gc_pass(self) -> set[str]:
        retained = {ROOT, self.head} | set(self.refs.values())
        for v in self._out:
            if len(self._in.get(v, {})) > 1 or len(self._out[v]) > 1 or len(self._out[v]) == 0:
                retained.add(v)
        removed: set[str] = set()
        new_out: dict[str, dict[str, Diff]] = {v: {} for v in retained}
        for v in retained:
            for child, diff in self._out[v].items():
                composed = diff
                cursor = child
                while cursor not in retained:
                    removed.add(cursor)
                    (next_child, next_diff), = self._out[cursor].items()
                    composed = compose_diffs(composed, next_diff)
                    cursor = next_child
                new_out[v][cursor] = composed
        self._out = new_out
        self._in = {v: {} for v in retained}
        for src, outs in new_out.items():
            for dst, diff in outs.items():
                self._in[dst][src] = diff
        self._state_cache = {k: v for k, v in self._state_cache.items() if k in retained}
        self._state_cache[ROOT] = State()
        return removed

    # -- Rollback --

    def rollback(self, version: str) -> None:
        """Reset HEAD to an ancestor, dropping its strict descendants.

        Refs pointing at removed versions move to the rollback target. The
        snapshot and application state are deliberately untouched.
        """
        self._require(version)
        if not self.is_ancestor(version, self.head):
            raise RollbackError(f"{version!r} is not an ancestor of HEAD {self.head!r}")
        doomed = self.descendants(version, strict=True)
        for v in doomed:
            for parent in list(self._in[v]):
                self._out[parent].pop(v, None)
            for child in list(self._out[v]):
                self._in[child].pop(v, None)
            del self._out[v]
            del self._in[v]
            self._state_cache.pop(v, None)
        for name, target in list(self.refs.items()):
            if target in doomed:
                self.refs[name] = version
        self.head = version

    # -- Export --

    def to_wire(self) -> dict:
        return {
            "vertices": sorted(self._out),
            "edges": [
                {"src": src, "dst": dst, "diff": diff_to_wire(diff)}
                for src, dst, diff in sorted(self.edges(), key=lambda e: (e[0], e[1]))
            ],
            "head": self.head,
            "refs": dict(sorted(self.refs.items())),
        }

    @classmethod
    def from_wire(cls, data: dict, registry: SchemaRegistry | None = None) -> "VersionGraph":
        graph = cls(registry)
        for v in data["vertices"]:
            if v not in graph._out:
                graph._out[v] = {}
                graph._in[v] = {}
        for edge in data["edges"]:
            graph._add_edge(edge["src"], edge["dst"], diff_from_wire(edge["diff"]))
        graph.head = data["head"]
        graph.refs = dict(data.get("refs", {}))
        return graph
