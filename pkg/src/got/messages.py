"""Wire messages exchanged between nodes (directly or relayed by the debugger)."""

from __future__ import annotations

from dataclasses import dataclass

from .diff import Diff
from .wire import WireError, diff_from_wire, diff_to_wire


class SyncError(RuntimeError):
    """A sync exchange failed; nodes fail stop on these."""


@dataclass(frozen=True)
class FetchRequest:
    requester: str
    from_version: str

    def to_wire(self) -> dict:
        return {"type": "fetch-request", "requester": self.requester,
                "from_version": self.from_version}


@dataclass(frozen=True)
class FetchResponse:
    start_version: str
    diff: Diff
    new_head: str
    responder: str

    def to_wire(self) -> dict:
        return {"type": "fetch-response", "start_version": self.start_version,
                "diff": diff_to_wire(self.diff), "new_head": self.new_head,
                "responder": self.responder}


@dataclass(frozen=True)
class PushRequest:
    sender: str
    start: str
    end: str
    diff: Diff

    def to_wire(self) -> dict:
        return {"type": "push-request", "sender": self.sender, "start": self.start,
                "end": self.end, "diff": diff_to_wire(self.diff)}


@dataclass(frozen=True)
class PushAck:
    accepted_head: str
    responder: str

    def to_wire(self) -> dict:
        return {"type": "push-ack", "accepted_head": self.accepted_head,
                "responder": self.responder}


@dataclass(frozen=True)
class ErrorReply:
    code: str
    detail: str

    def to_wire(self) -> dict:
        return {"type": "error", "code": self.code, "detail": self.detail}


SyncMessage = FetchRequest | FetchResponse | PushRequest | PushAck | ErrorReply


def message_from_wire(data: dict) -> SyncMessage:
    try:
        kind = data["type"]
        if kind == "fetch-request":
            return FetchRequest(data["requester"], data["from_version"])
        if kind == "fetch-response":
            return FetchResponse(data["start_version"], diff_from_wire(data["diff"]),
                                 data["new_head"], data["responder"])
        if kind == "push-request":
            return PushRequest(data["sender"], data["start"], data["end"],
                               diff_from_wire(data["diff"]))
        if kind == "push-ack":
            return PushAck(data["accepted_head"], data["responder"])
        if kind == "error":
            return ErrorReply(data["code"], data["detail"])
    except (KeyError, TypeError, WireError) as exc:
        raise WireError(f"malformed sync message: {exc}") from exc
    raise WireError(f"unknown sync message type {data.get('type')!r}")
