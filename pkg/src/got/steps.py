"""Step kinds and phase names shared by nodes, the controller and the UI.

Every version-history primitive decomposes into an ordered list of phases;
the debugger grants execution one phase at a time. The run-merge phase is
declared dynamically, only once conflict detection has found objects that
need the resolver.
"""

from __future__ import annotations

COMMIT = "commit"
CHECKOUT = "checkout"
PUSH = "push"
FETCH = "fetch"
RESPOND_PUSH = "respond-to-push"
RESPOND_FETCH = "respond-to-fetch"

RECEIVE_DATA = "receive-data"
EXTEND_GRAPH = "extend-graph"
GARBAGE_COLLECT = "garbage-collect"
READ_HEAD = "read-head"
APPLY_TO_SNAPSHOT = "apply-to-snapshot"
SEND_REQUEST = "send-request"
RECEIVE_ACK = "receive-ack"
DETECT_CONFLICT = "detect-conflict"
RUN_MERGE = "run-merge"
COMPUTE_DELTA = "compute-delta"
SEND_RESPONSE = "send-response"

INITIAL_PHASES: dict[str, list[str]] = {
    COMMIT: [RECEIVE_DATA, EXTEND_GRAPH, GARBAGE_COLLECT],
    CHECKOUT: [READ_HEAD, APPLY_TO_SNAPSHOT],
    PUSH: [SEND_REQUEST, RECEIVE_ACK],
    FETCH: [SEND_REQUEST, RECEIVE_DATA, DETECT_CONFLICT, EXTEND_GRAPH, GARBAGE_COLLECT],
    RESPOND_PUSH: [RECEIVE_DATA, DETECT_CONFLICT, EXTEND_GRAPH, GARBAGE_COLLECT],
    RESPOND_FETCH: [COMPUTE_DELTA, SEND_RESPONSE],
}

STEP_KINDS = tuple(INITIAL_PHASES)
