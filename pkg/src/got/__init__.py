"""Version-controlled shared objects for distributed nodes.

Nodes share typed objects through a per-node repository (snapshot + version
history) synchronized with commit/checkout/push/fetch and three-way merge.
A companion controller service can intercept every primitive phase for
interactive, breakpointed debugging of a whole application.
"""

from .dataframe import Dataframe, DataframeError, Snapshot, StaleHandleError
from .diff import (
    DELETED,
    MODIFIED,
    NEW,
    ApplyError,
    ComposeError,
    ConflictReport,
    ConflictTriple,
    Diff,
    DiffError,
    ObjectDelta,
    apply_diff,
    compose_diffs,
    default_resolver,
    detect_conflicts,
    diff_states,
    update_not_conflicting,
)
from .graph import (
    ROOT,
    SNAPSHOT_REF,
    GraphError,
    MergeReport,
    RollbackError,
    UnknownVersionError,
    VersionGraph,
)
from .schema import (
    ObjectState,
    SchemaError,
    SchemaRegistry,
    State,
    TypeSchema,
    UnknownTypeError,
    dimension,
    primarykey,
    schema_of,
)

__version__ = "0.1.0"

__all__ = [
    "ApplyError",
    "ComposeError",
    "ConflictReport",
    "ConflictTriple",
    "Dataframe",
    "DataframeError",
    "DELETED",
    "Diff",
    "DiffError",
    "GraphError",
    "MergeReport",
    "MODIFIED",
    "NEW",
    "ObjectDelta",
    "ObjectState",
    "ROOT",
    "RollbackError",
    "SchemaError",
    "SchemaRegistry",
    "Snapshot",
    "SNAPSHOT_REF",
    "StaleHandleError",
    "State",
    "TypeSchema",
    "UnknownTypeError",
    "UnknownVersionError",
    "VersionGraph",
    "apply_diff",
    "compose_diffs",
    "default_resolver",
    "detect_conflicts",
    "diff_states",
    "dimension",
    "primarykey",
    "schema_of",
    "update_not_conflicting",
]
