"""Transports carrying sync messages between node repositories.

Outside debug mode a node serves POST /sync over plain HTTP and peers call it
synchronously (push waits for its ack so the shared sync point only advances
on confirmed receipt). The in-process transport wires repositories together
directly for single-process harnesses and tests; both transports run the
exact same request-handling code.
"""

from __future__ import annotations

import json
import logging
import socket
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import requests

from .dataframe import Dataframe
from .messages import ErrorReply, SyncError, SyncMessage, message_from_wire
from .wire import WireError

logger = logging.getLogger(__name__)


def find_free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class HttpTransport:
    """Synchronous request/reply over HTTP; failures are fail-stop."""

    def __init__(self, timeout: float = 60.0):
        self.timeout = timeout

    def send(self, address: str, message: SyncMessage) -> SyncMessage:
        url = f"http://{address}/sync"
        try:
            resp = requests.post(url, json=message.to_wire(), timeout=self.timeout)
            resp.raise_for_status()
            return message_from_wire(resp.json())
        except (requests.RequestException, WireError, ValueError) as exc:
            raise SyncError(f"sync exchange with {address} failed: {exc}") from exc


class InProcessNetwork:
    """Registry of repositories addressable as ``local:<name>``."""

    def __init__(self):
        self._handlers: dict[str, Dataframe] = {}
        self._lock = threading.Lock()

    def register(self, address: str, df: Dataframe) -> None:
        with self._lock:
            self._handlers[address] = df

    def transport(self) -> "InProcessTransport":
        return InProcessTransport(self)

    def deliver(self, address: str, message: SyncMessage) -> SyncMessage:
        with self._lock:
            df = self._handlers.get(address)
        if df is None:
            raise SyncError(f"no repository listening at {address}")
        return df.handle_sync(message)


class InProcessTransport:
    def __init__(self, network: InProcessNetwork):
        self.network = network

    def send(self, address: str, message: SyncMessage) -> SyncMessage:
        return self.network.deliver(address, message)


class _SyncHandler(BaseHTTPRequestHandler):
    df: Dataframe | None = None  # bound per server subclass

    def do_POST(self):  # noqa: N802 (http.server naming)
        if self.path != "/sync":
            self.send_error(404)
            return
        length = int(self.headers.get("Content-Length", 0))
        try:
            message = message_from_wire(json.loads(self.rfile.read(length)))
            reply = self.server.df.handle_sync(message)  # type: ignore[attr-defined]
        except (WireError, ValueError) as exc:
            reply = ErrorReply(code="malformed", detail=str(exc))
        except SyncError as exc:
            reply = ErrorReply(code="rejected", detail=str(exc))
        body = json.dumps(reply.to_wire()).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, fmt, *args):  # route http.server chatter to logging
        logger.debug("sync server: " + fmt, *args)


class SyncServer:
    """Threaded HTTP server exposing one repository's POST /sync endpoint."""

    def __init__(self, df: Dataframe, port: int, host: str = "0.0.0.0"):
        self._server = ThreadingHTTPServer((host, port), _SyncHandler)
        self._server.df = df  # type: ignore[attr-defined]
        self._thread = threading.Thread(
            target=self._server.serve_forever, name=f"sync-{df.node_name}", daemon=True
        )
        self.port = self._server.server_address[1]

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
