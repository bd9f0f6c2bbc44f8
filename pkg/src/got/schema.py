"""Shared-type schemas and materialized object state.

A shared type declares a fixed, ordered set of typed dimensions; exactly one
dimension is the primary key objects are addressed by. Dimension values are
plain primitives (int, float, str, bool) so they serialize cleanly and compare
exactly.

Types are declared either directly through ``SchemaRegistry.register_schema``
or, more conveniently, as plain classes whose tracked attributes are created
with :func:`primarykey` and :func:`dimension`::

    class WordCount:
        word = primarykey(str)
        count = dimension(int)

Instances of such classes behave like ordinary objects until they are added to
a repository, at which point attribute reads and writes are routed through the
repository's snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Iterator

PRIMITIVE_KINDS: tuple[type, ...] = (int, float, str, bool)
KIND_NAMES: dict[type, str] = {int: "int", float: "float", str: "str", bool: "bool"}
NAMED_KINDS: dict[str, type] = {v: k for k, v in KIND_NAMES.items()}

PrimValue = Any  # int | float | str | bool
Key = tuple[str, PrimValue]  # (type name, primary key value)

# Instance-dict slot that marks an object as tracked by a snapshot.
BINDING_ATTR = "_got_binding"


class SchemaError(ValueError):
    """Invalid schema declaration, or a value that does not conform to one."""


class UnknownTypeError(SchemaError):
    """An operation referenced a type name that is not registered."""


def check_kind(value: PrimValue, kind: type, context: str = "value") -> None:
    """Require an exact primitive type match (bool is not an int here)."""
    if type(value) is not kind:
        raise SchemaError(
            f"{context} must be {KIND_NAMES.get(kind, kind)}, got {type(value).__name__}: {value!r}"
        )


class DimensionField:
    """Descriptor declaring one tracked dimension on a shared-type class.

    Untracked instances store values in their own ``__dict__``; once an object
    is bound to a snapshot, reads return the snapshot's current value and
    writes stage a modification.
    """

    def __init__(self, kind: type, primary: bool = False):
        if kind not in PRIMITIVE_KINDS:
            raise SchemaError(f"dimension kind must be one of int/float/str/bool, got {kind!r}")
        self.kind = kind
        self.primary = primary
        self.name: str | None = None

    def __set_name__(self, owner: type, name: str) -> None:
        self.name = name

    def __get__(self, obj, objtype=None):
        if obj is None:
            return self
        binding = obj.__dict__.get(BINDING_ATTR)
        if binding is not None:
            return binding.read(self.name)
        try:
            return obj.__dict__[self.name]
        except KeyError:
            raise AttributeError(self.name) from None

    def __set__(self, obj, value) -> None:
        check_kind(value, self.kind, f"dimension {self.name!r}")
        binding = obj.__dict__.get(BINDING_ATTR)
        if binding is not None:
            binding.write(self.name, value)
        else:
            obj.__dict__[self.name] = value


def primarykey(kind: type) -> DimensionField:
    """Declare the primary-key dimension of a shared type."""
    return DimensionField(kind, primary=True)


def dimension(kind: type) -> DimensionField:
    """Declare a tracked dimension of a shared type."""
    return DimensionField(kind)


@dataclass(frozen=True)
class TypeSchema:
    """Declared shape of one shared type: name, primary key, ordered dimensions."""

    name: str
    primary_key: str
    dimensions: tuple[tuple[str, type], ...]

    def __post_init__(self):
        if not self.name or ":" in self.name:
            raise SchemaError(f"invalid type name {self.name!r}")
        names = [n for n, _ in self.dimensions]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate dimension names in {self.name!r}")
        if self.primary_key not in names:
            raise SchemaError(
                f"primary key {self.primary_key!r} is not a dimension of {self.name!r}"
            )
        for n, k in self.dimensions:
            if k not in PRIMITIVE_KINDS:
                raise SchemaError(f"dimension {n!r} of {self.name!r} has invalid kind {k!r}")

    def kind_of(self, dim: str) -> type:
        for n, k in self.dimensions:
            if n == dim:
                return k
        raise SchemaError(f"{self.name!r} has no dimension {dim!r}")

    def dimension_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.dimensions)

    def to_wire(self) -> dict:
        return {
            "name": self.name,
            "primary_key": self.primary_key,
            "dimensions": [[n, KIND_NAMES[k]] for n, k in self.dimensions],
        }

    @classmethod
    def from_wire(cls, data: dict) -> "TypeSchema":
        return cls(
            name=data["name"],
            primary_key=data["primary_key"],
            dimensions=tuple((n, NAMED_KINDS[k]) for n, k in data["dimensions"]),
        )


def schema_of(cls: type) -> TypeSchema:
    """Derive a TypeSchema from a class declared with primarykey()/dimension()."""
    dims: list[tuple[str, type]] = []
    primary: str | None = None
    for name, attr in vars(cls).items():
        if isinstance(attr, DimensionField):
            dims.append((name, attr.kind))
            if attr.primary:
                if primary is not None:
                    raise SchemaError(f"{cls.__name__} declares more than one primary key")
                primary = name
    if primary is None:
        raise SchemaError(f"{cls.__name__} declares no primary key")
    return TypeSchema(name=cls.__name__, primary_key=primary, dimensions=tuple(dims))


class SchemaRegistry:
    """Immutable-once-registered collection of type schemas."""

    def __init__(self):
        self._schemas: dict[str, TypeSchema] = {}

    def register_schema(
        self, name: str, primary_key: str, dims: Iterable[tuple[str, type]]
    ) -> TypeSchema:
        if name in self._schemas:
            raise SchemaError(f"type {name!r} is already registered")
        schema = TypeSchema(name=name, primary_key=primary_key, dimensions=tuple(dims))
        self._schemas[name] = schema
        return schema

    def register_class(self, cls: type) -> TypeSchema:
        schema = schema_of(cls)
        if schema.name in self._schemas:
            raise SchemaError(f"type {schema.name!r} is already registered")
        self._schemas[schema.name] = schema
        return schema

    def add(self, schema: TypeSchema) -> TypeSchema:
        if schema.name in self._schemas:
            raise SchemaError(f"type {schema.name!r} is already registered")
        self._schemas[schema.name] = schema
        return schema

    def get(self, name: str) -> TypeSchema:
        try:
            return self._schemas[name]
        except KeyError:
            raise UnknownTypeError(f"type {name!r} is not registered") from None

    def __contains__(self, name: str) -> bool:
        return name in self._schemas

    def names(self) -> list[str]:
        return list(self._schemas)

    def schemas(self) -> list[TypeSchema]:
        return list(self._schemas.values())


@dataclass(frozen=True)
class ObjectState:
    """One object's full dimension map at some version."""

    type_name: str
    pkey: PrimValue
    dims: dict

    def __post_init__(self):
        object.__setattr__(self, "dims", dict(self.dims))

    def conforms(self, schema: TypeSchema) -> None:
        if set(self.dims) != set(schema.dimension_names()):
            raise SchemaError(
                f"{self.type_name}[{self.pkey!r}] dimensions {sorted(self.dims)} do not match "
                f"schema {sorted(schema.dimension_names())}"
            )
        for dim, value in self.dims.items():
            check_kind(value, schema.kind_of(dim), f"{self.type_name}.{dim}")
        if self.dims[schema.primary_key] != self.pkey:
            raise SchemaError(
                f"{self.type_name}[{self.pkey!r}] primary-key dimension holds "
                f"{self.dims[schema.primary_key]!r}"
            )


class State:
    """The live objects at one version: type name -> primary key -> ObjectState.

    Treated as a value: all update helpers return a new State and never mutate
    the receiver, so states are safe to share across threads.
    """

    __slots__ = ("_types",)

    def __init__(self, objects: Iterable[ObjectState] = ()):
        types: dict[str, dict] = {}
        for obj in objects:
            types.setdefault(obj.type_name, {})[obj.pkey] = obj
        self._types = types

    @classmethod
    def _wrap(cls, types: dict[str, dict]) -> "State":
        state = cls.__new__(cls)
        state._types = types
        return state

    def get(self, type_name: str, pkey: PrimValue) -> ObjectState | None:
        return self._types.get(type_name, {}).get(pkey)

    def contains(self, type_name: str, pkey: PrimValue) -> bool:
        return pkey in self._types.get(type_name, {})

    def of_type(self, type_name: str) -> list[ObjectState]:
        bucket = self._types.get(type_name, {})
        return [bucket[k] for k in sorted(bucket)]

    def objects(self) -> Iterator[ObjectState]:
        for bucket in self._types.values():
            yield from bucket.values()

    def keys(self) -> Iterator[Key]:
        for type_name, bucket in self._types.items():
            for pkey in bucket:
                yield (type_name, pkey)

    def type_names(self) -> list[str]:
        return sorted(self._types)

    def with_object(self, obj: ObjectState) -> "State":
        types = dict(self._types)
        bucket = dict(types.get(obj.type_name, {}))
        bucket[obj.pkey] = obj
        types[obj.type_name] = bucket
        return State._wrap(types)

    def without(self, type_name: str, pkey: PrimValue) -> "State":
        types = dict(self._types)
        bucket = dict(types.get(type_name, {}))
        bucket.pop(pkey, None)
        if bucket:
            types[type_name] = bucket
        else:
            types.pop(type_name, None)
        return State._wrap(types)

    def with_dimension(self, type_name: str, pkey: PrimValue, dim: str, value: PrimValue) -> "State":
        obj = self.get(type_name, pkey)
        if obj is None:
            raise KeyError(f"no object {type_name}[{pkey!r}]")
        dims = dict(obj.dims)
        dims[dim] = value
        return self.with_object(ObjectState(type_name, pkey, dims))

    def validate(self, registry: SchemaRegistry) -> None:
        for obj in self.objects():
            obj.conforms(registry.get(obj.type_name))

    def __len__(self) -> int:
        return sum(len(b) for b in self._types.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, State):
            return NotImplemented
        return self._types == other._types

    def __repr__(self) -> str:
        parts = []
        for type_name in sorted(self._types):
            for pkey in sorted(self._types[type_name]):
                parts.append(f"{type_name}[{pkey!r}]")
        return f"State({', '.join(parts)})"
