"""Canonical JSON forms for states, diffs and primary keys.

JSON object keys must be strings, so primary keys are rendered as type-tagged
strings ("i:5", "s:bar", "b:true", "f:1.5") that round-trip bit-exactly. All
canonical dumps sort keys and use compact separators so equal values always
serialize to identical bytes.
"""

from __future__ import annotations

import json

from .diff import Diff, DiffError, ObjectDelta
from .schema import ObjectState, PrimValue, State


class WireError(ValueError):
    """Malformed wire payload."""


def encode_pkey(value: PrimValue) -> str:
    if type(value) is bool:
        return "b:true" if value else "b:false"
    if type(value) is int:
        return f"i:{value}"
    if type(value) is float:
        return f"f:{value!r}"
    if type(value) is str:
        return f"s:{value}"
    raise WireError(f"primary key {value!r} is not a primitive")


def decode_pkey(tagged: str) -> PrimValue:
    tag, _, raw = tagged.partition(":")
    if tag == "i":
        return int(raw)
    if tag == "f":
        return float(raw)
    if tag == "s":
        return raw
    if tag == "b":
        if raw == "true":
            return True
        if raw == "false":
            return False
    raise WireError(f"bad primary-key tag {tagged!r}")


def diff_to_wire(diff: Diff) -> dict:
    out = {}
    for (type_name, pkey), delta in diff.items():
        entry: dict = {"kind": delta.kind}
        if delta.dims is not None:
            entry["dims"] = dict(delta.dims)
        out[f"{type_name}:{encode_pkey(pkey)}"] = entry
    return out


def diff_from_wire(data: dict) -> Diff:
    entries = {}
    for key, entry in data.items():
        type_name, _, tagged = key.partition(":")
        if not type_name or not tagged:
            raise WireError(f"bad diff key {key!r}")
        try:
            delta = ObjectDelta(entry["kind"], entry.get("dims"))
        except (KeyError, DiffError) as exc:
            raise WireError(f"bad diff entry for {key!r}: {exc}") from exc
        entries[(type_name, decode_pkey(tagged))] = delta
    return Diff(entries)


def state_to_wire(state: State) -> dict:
    out: dict[str, dict] = {}
    for obj in state.objects():
        out.setdefault(obj.type_name, {})[encode_pkey(obj.pkey)] = dict(obj.dims)
    return out


def state_from_wire(data: dict) -> State:
    objects = []
    for type_name, bucket in data.items():
        for tagged, dims in bucket.items():
            objects.append(ObjectState(type_name, decode_pkey(tagged), dims))
    return State(objects)


def canonical_dumps(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))
