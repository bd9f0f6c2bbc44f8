"""The diff algebra: application, composition, state differencing, conflicts.

A Diff is a keyed set of object-level deltas — the unit of commit, network
transfer, and version-graph edge labels. Three laws anchor everything built on
top:

* application identity: ``apply_diff(s, Diff()) == s``
* composition soundness: ``apply(apply(s, d1), d2) == apply(s, compose(d1, d2))``
* differencing round-trip: ``apply(a, diff_states(a, b)) == b``

Application is strict: a Modified or Deleted delta aimed at a missing object,
or a New delta aimed at an existing one, raises instead of being dropped.
Protocol bugs surface immediately rather than as silently lost writes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping

from .schema import Key, ObjectState, PrimValue, State

NEW = "new"
MODIFIED = "mod"
DELETED = "del"


class DiffError(ValueError):
    """Base class for diff algebra failures."""


class ApplyError(DiffError):
    """A delta could not be applied to the given state."""


class ComposeError(DiffError):
    """Two deltas cannot be sequenced on the same object."""


@dataclass(frozen=True)
class ObjectDelta:
    """One object's change: New (full dims), Modified (partial dims) or Deleted."""

    kind: str
    dims: dict | None = None

    def __post_init__(self):
        if self.kind == NEW:
            if not self.dims:
                raise DiffError("New delta requires a complete dimension map")
        elif self.kind == MODIFIED:
            if not self.dims:
                raise DiffError("Modified delta requires a non-empty dimension map")
        elif self.kind == DELETED:
            if self.dims:
                raise DiffError("Deleted delta carries no dimensions")
        else:
            raise DiffError(f"unknown delta kind {self.kind!r}")
        if self.dims is not None:
            object.__setattr__(self, "dims", dict(self.dims))

    def written(self) -> frozenset:
        """Dimension names this delta writes (all of them for New)."""
        return frozenset(self.dims) if self.dims else frozenset()


class Diff:
    """Keyed delta set: at most one ObjectDelta per (type name, primary key)."""

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[Key, ObjectDelta] | Iterable[tuple[Key, ObjectDelta]] = ()):
        self._entries: dict[Key, ObjectDelta] = dict(entries)

    @property
    def empty(self) -> bool:
        return not self._entries

    def get(self, key: Key) -> ObjectDelta | None:
        return self._entries.get(key)

    def keys(self) -> Iterator[Key]:
        return iter(self._entries)

    def items(self) -> Iterator[tuple[Key, ObjectDelta]]:
        return iter(self._entries.items())

    def entries(self) -> dict[Key, ObjectDelta]:
        return dict(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: Key) -> bool:
        return key in self._entries

    def __eq__(self, other) -> bool:
        if not isinstance(other, Diff):
            return NotImplemented
        return self._entries == other._entries

    def __repr__(self) -> str:
        parts = [f"{t}[{p!r}]:{d.kind}" for (t, p), d in sorted(self._entries.items(), key=repr)]
        return f"Diff({', '.join(parts)})"


def apply_diff(state: State, diff: Diff) -> State:
    """Transform ``state`` by every delta in ``diff``; the input is untouched."""
    out = state
    for (type_name, pkey), delta in diff.items():
        present = out.contains(type_name, pkey)
        if delta.kind == NEW:
            if present:
                raise ApplyError(f"New delta for existing object {type_name}[{pkey!r}]")
            out = out.with_object(ObjectState(type_name, pkey, delta.dims))
        elif delta.kind == MODIFIED:
            if not present:
                raise ApplyError(f"Modified delta for missing object {type_name}[{pkey!r}]")
            dims = dict(out.get(type_name, pkey).dims)
            dims.update(delta.dims)
            out = out.with_object(ObjectState(type_name, pkey, dims))
        else:  # DELETED
            if not present:
                raise ApplyError(f"Deleted delta for missing object {type_name}[{pkey!r}]")
            out = out.without(type_name, pkey)
    return out


def _compose_entry(first: ObjectDelta, second: ObjectDelta, key: Key) -> ObjectDelta | None:
    """Sequence two deltas on one object; None means the entry cancels out."""
    a, b = first.kind, second.kind
    if a == NEW and b == MODIFIED:
        dims = dict(first.dims)
        dims.update(second.dims)
        return ObjectDelta(NEW, dims)
    if a == NEW and b == DELETED:
        return None
    if a == MODIFIED and b == MODIFIED:
        dims = dict(first.dims)
        dims.update(second.dims)
        return ObjectDelta(MODIFIED, dims)
    if a == MODIFIED and b == DELETED:
        return ObjectDelta(DELETED)
    if a == DELETED and b == NEW:
        # The object existed in any state the first delta applies to, so the
        # net effect is a full overwrite of its dimensions.
        return ObjectDelta(MODIFIED, dict(second.dims))
    raise ComposeError(f"cannot sequence {a} then {b} on {key[0]}[{key[1]!r}]")


def compose_diffs(first: Diff, second: Diff) -> Diff:
    """A single diff equivalent to applying ``first`` then ``second``."""
    out = first.entries()
    for key, delta in second.items():
        prior = out.get(key)
        if prior is None:
            out[key] = delta
        else:
            combined = _compose_entry(prior, delta, key)
            if combined is None:
                del out[key]
            else:
                out[key] = combined
    return Diff(out)


def diff_states(source: State, target: State) -> Diff:
    """Minimal diff transforming ``source`` into ``target``.

    Objects equal in both states produce no entry; Modified entries carry only
    the dimensions whose values changed.
    """
    entries: dict[Key, ObjectDelta] = {}
    source_keys = set(source.keys())
    target_keys = set(target.keys())
    for key in source_keys - target_keys:
        entries[key] = ObjectDelta(DELETED)
    for key in target_keys - source_keys:
        entries[key] = ObjectDelta(NEW, target.get(*key).dims)
    for key in source_keys & target_keys:
        before = source.get(*key).dims
        after = target.get(*key).dims
        changed = {d: v for d, v in after.items() if d not in before or before[d] != v}
        if changed:
            entries[key] = ObjectDelta(MODIFIED, changed)
    return Diff(entries)


@dataclass(frozen=True)
class ConflictReport:
    """Outcome of three-way conflict detection.

    ``conflicting`` holds the object keys that need a resolver;
    ``nonconflicting_theirs`` is the subset of the incoming diff that can be
    applied onto the local side directly (a dimension-level union for objects
    both sides touched on disjoint dimensions).
    """

    conflicting: frozenset
    nonconflicting_theirs: Diff


def detect_conflicts(base: State, yours: Diff, theirs: Diff) -> ConflictReport:
    """Classify every object touched by both diffs as conflicting or mergeable.

    A key conflicts when both sides touched it and either one side deleted
    while the other wrote, or the written dimension sets overlap. Two writes
    to the same dimension conflict regardless of the values written: for
    counter-like dimensions equal concurrent writes still represent two
    updates, and deciding their combination belongs to the resolver, not to
    the transport. Two deletions agree and do not conflict.
    """
    conflicting: set[Key] = set()
    for key, ours in yours.items():
        other = theirs.get(key)
        if other is None:
            continue
        ours_del = ours.kind == DELETED
        other_del = other.kind == DELETED
        if ours_del and other_del:
            continue
        if ours_del or other_del:
            conflicting.add(key)
        elif ours.written() & other.written():
            conflicting.add(key)
    nonconflicting = {
        key: delta
        for key, delta in theirs.items()
        if key not in conflicting and not (delta.kind == DELETED and yours.get(key) is not None)
    }
    return ConflictReport(frozenset(conflicting), Diff(nonconflicting))


@dataclass(frozen=True)
class ConflictTriple:
    """One conflicting object seen from all three merge inputs.

    Absent entries (None) signal the object did not exist at that version —
    either never created (orig) or deleted on that side.
    """

    type_name: str
    pkey: PrimValue
    orig: ObjectState | None
    yours: ObjectState | None
    theirs: ObjectState | None


def conflict_triples(
    keys: Iterable[Key], orig: State, yours: State, theirs: State
) -> list[ConflictTriple]:
    triples = [
        ConflictTriple(
            type_name=t,
            pkey=p,
            orig=orig.get(t, p),
            yours=yours.get(t, p),
            theirs=theirs.get(t, p),
        )
        for (t, p) in keys
    ]
    triples.sort(key=lambda c: (c.type_name, repr(c.pkey)))
    return triples


Resolver = Callable[[list[ConflictTriple], State, State, State], State]


def update_not_conflicting(orig: State, yours: State, theirs: State) -> State:
    """Apply the incoming side's non-conflicting changes on top of the local side.

    This is the standard first step of a three-way merge function: everything
    the incoming side changed that the local side did not contradict is
    accepted as-is; conflicting objects are left for the resolver loop.
    """
    yours_diff = diff_states(orig, yours)
    theirs_diff = diff_states(orig, theirs)
    report = detect_conflicts(orig, yours_diff, theirs_diff)
    return apply_diff(yours, report.nonconflicting_theirs)


def default_resolver(
    conflicts: list[ConflictTriple], orig: State, yours: State, theirs: State
) -> State:
    """Fallback merge when the application registers no resolver.

    Accepts all non-conflicting incoming changes; on conflicting objects the
    incoming side wins dimension-by-dimension (a deletion on the incoming side
    deletes the object).
    """
    merged = update_not_conflicting(orig, yours, theirs)
    for c in conflicts:
        if c.theirs is None:
            if merged.contains(c.type_name, c.pkey):
                merged = merged.without(c.type_name, c.pkey)
            continue
        if not merged.contains(c.type_name, c.pkey):
            merged = merged.with_object(c.theirs)
            continue
        base_dims = c.orig.dims if c.orig is not None else {}
        for dim, value in c.theirs.dims.items():
            if dim not in base_dims or base_dims[dim] != value:
                merged = merged.with_dimension(c.type_name, c.pkey, dim, value)
    return merged
