"""Node runtime: hosts one repository, runs the application, serves sync.

A node owns a dataframe, runs its application function on a dedicated flow,
and (outside debug mode) serves inbound sync requests over HTTP. When started
with a controller address (``debug=...`` or the GOTCHA_GCN environment
variable), the node registers itself and reroutes every version-history
primitive through the controller: the application flow asks permission before
each phase it executes, while a background agent executes controller-granted
respond steps and commands. If the controller becomes unreachable the node
halts with a diagnostic rather than continuing unobserved.
"""

from __future__ import annotations

import argparse
import importlib
import logging
import os
import threading
import traceback
import uuid

import requests

from .dataframe import Dataframe, PrimitiveRun
from .messages import SyncError, message_from_wire
from .sync import HttpTransport, SyncServer

logger = logging.getLogger(__name__)

GCN_ENV_VAR = "GOTCHA_GCN"


class NodeError(RuntimeError):
    """Node lifecycle failure (bad config, registration failure, app crash)."""


class HttpDebugChannel:
    """Talks to the controller over its HTTP API, re-polling through holds."""

    def __init__(self, address: str, timeout: float = 30.0):
        self.base = f"http://{address}"
        self.timeout = timeout
        self.session = requests.Session()

    def _post(self, path: str, payload: dict) -> dict:
        try:
            resp = self.session.post(self.base + path, json=payload, timeout=self.timeout)
            if resp.status_code >= 400:
                raise SyncError(f"controller rejected {path}: {resp.status_code} {resp.text}")
            return resp.json()
        except requests.RequestException as exc:
            raise SyncError(f"controller unreachable at {self.base}: {exc}") from exc

    def register(self, name, address, remote, schemas) -> None:
        self._post("/register", {
            "name": name, "address": address, "remote": remote, "schemas": schemas,
        })

    def gate(self, envelope: dict) -> tuple[str, dict | None]:
        while True:
            data = self._post("/step", envelope)
            if data["action"] != "hold":
                return data["action"], data.get("forwarded_reply")

    def get_work(self, node: str) -> dict:
        return self._post("/work", {"node": node})

    def report(self, node, step_id, phase_index, phases, history, reply, done) -> None:
        self._post("/report", {
            "node": node, "step_id": step_id, "phase_index": phase_index,
            "phases": phases, "history": history, "reply": reply, "done": done,
        })

    def report_command(self, node, history, error) -> None:
        self._post("/command-result", {"node": node, "history": history, "error": error})

    def notify_exit(self, node, error) -> None:
        try:
            self._post("/exited", {"node": node, "error": error})
        except SyncError:
            logger.warning("could not report exit of %s to the controller", node)


class DebugExecutor:
    """Gates every phase of an app-originated primitive through the controller."""

    def __init__(self, node: "Node"):
        self.node = node

    def run(self, df: Dataframe, run: PrimitiveRun) -> None:
        channel = self.node.channel
        step_id = uuid.uuid4().hex
        payload = None
        i = 0
        while i < len(run.phases):
            action, reply = channel.gate(self._envelope(df, run, step_id, i, payload))
            if action == "forward" and reply is not None:
                run.inbox = message_from_wire(reply)
            with df.lock:
                emitted = run.execute_phase(i)
            payload = emitted.to_wire() if emitted is not None else None
            i += 1
        channel.gate(self._envelope(df, run, step_id, i, payload))  # completion

    def _envelope(self, df, run, step_id, phase_index, payload) -> dict:
        with df.lock:
            history = df.graph.to_wire()
        return {
            "node": self.node.name,
            "step_id": step_id,
            "kind": run.kind,
            "phase_index": phase_index,
            "phases": list(run.phases),
            "payload": payload,
            "history": history,
            "noop": bool(getattr(run, "noop", False)),
        }


class Node:
    """One process-local application node.

    ``start`` blocks until the application function returns; ``start_async``
    runs it on a background flow, to be awaited with ``join``. The sync server
    (when a ``server_port`` is given) and the debug agent run on their own
    threads and only meet the application flow at the repository lock.
    """

    def __init__(
        self,
        app,
        types=None,
        server_port: int | None = None,
        remote=None,
        resolver=None,
        debug: str | None = None,
        name: str | None = None,
        transport=None,
        channel=None,
        Types=None,
    ):
        self.app = app
        self.name = name or app.__name__
        self.types = list(types if types is not None else (Types or []))
        self.server_port = server_port
        self.remote = self._normalize_remote(remote)
        self.resolver = resolver
        self.debug = debug if debug is not None else os.environ.get(GCN_ENV_VAR)
        self.channel = channel
        self._transport = transport
        self.df: Dataframe | None = None
        self.result = None
        self.error: str | None = None
        self._app_thread: threading.Thread | None = None
        self._agent_thread: threading.Thread | None = None
        self._server: SyncServer | None = None
        self._stop = threading.Event()
        self._started = False

    @staticmethod
    def _normalize_remote(remote) -> str | None:
        if remote is None:
            return None
        if isinstance(remote, tuple):
            host, port = remote
            return f"{host}:{port}"
        return str(remote)

    @property
    def address(self) -> str | None:
        if self.server_port is None:
            return None
        return f"127.0.0.1:{self.server_port}"

    def ensure_setup(self) -> "Node":
        """Build the repository and channels without running the app yet."""
        if self.df is None:
            self._setup()
        return self

    def _setup(self) -> None:
        if not self.types:
            raise NodeError("a node needs at least one shared type")
        debug_mode = self.channel is not None or self.debug is not None
        transport = self._transport
        if transport is None and self.remote is not None and not debug_mode:
            transport = HttpTransport()
        self.df = Dataframe(
            self.types,
            node_name=self.name,
            resolver=self.resolver,
            remote=self.remote,
            transport=transport,
        )
        if debug_mode:
            if self.channel is None:
                self.channel = HttpDebugChannel(self.debug)
            schemas = [self.df.registry.get(n).to_wire() for n in self.df.registry.names()]
            self.channel.register(self.name, self.address, self.remote, schemas)
            self.df.executor = DebugExecutor(self)
            self._agent_thread = threading.Thread(
                target=self._agent_loop, name=f"agent-{self.name}", daemon=True
            )
            self._agent_thread.start()
        elif self.server_port is not None:
            self._server = SyncServer(self.df, self.server_port)
            self._server.start()

    def _agent_loop(self) -> None:
        df = self.df
        runs: dict[str, PrimitiveRun] = {}
        while not self._stop.is_set():
            try:
                work = self.channel.get_work(self.name)
            except SyncError as exc:
                if not self._stop.is_set():
                    logger.error("%s: debug agent halting: %s", self.name, exc)
                return
            action = work.get("action")
            if action == "hold":
                continue
            if action == "command":
                self._run_command(work["command"])
                continue
            if action != "execute":
                logger.error("%s: unknown agent instruction %r", self.name, action)
                return
            step_id = work["step_id"]
            run = runs.get(step_id)
            if run is None:
                run = df.respond_run(message_from_wire(work["payload"]))
                runs[step_id] = run
            index = work["phase_index"]
            with df.lock:
                emitted = run.execute_phase(index)
                history = df.graph.to_wire()
            done = index + 1 >= len(run.phases)
            self.channel.report(
                self.name,
                step_id,
                index,
                list(run.phases),
                history,
                reply=emitted.to_wire() if emitted is not None else None,
                done=done,
            )
            if done:
                runs.pop(step_id, None)

    def _run_command(self, command: dict) -> None:
        df = self.df
        error = None
        try:
            if command.get("type") == "rollback":
                with df.lock:
                    df.graph.rollback(command["version"])
            else:
                error = f"unknown command {command.get('type')!r}"
        except Exception as exc:  # reported back, never crashes the agent
            error = str(exc)
        with df.lock:
            history = df.graph.to_wire()
        self.channel.report_command(self.name, history, error)

    def _run_app(self, args) -> None:
        try:
            self.result = self.app(self.df, *args)
        except Exception:
            self.error = traceback.format_exc()
            logger.error("%s: application failed:\n%s", self.name, self.error)
        finally:
            self._shutdown()

    def _shutdown(self) -> None:
        self._stop.set()
        if self.channel is not None:
            self.channel.notify_exit(self.name, self.error)
        if self._server is not None:
            self._server.stop()
            self._server = None

    def start(self, *args):
        """Run the application to completion on the calling flow."""
        if self._started:
            raise NodeError("node already started")
        self._started = True
        self.ensure_setup()
        self._run_app(args)
        if self.error:
            raise NodeError(f"node {self.name} failed:\n{self.error}")
        return self.result

    def start_async(self, *args) -> "Node":
        if self._started:
            raise NodeError("node already started")
        self._started = True
        self.ensure_setup()
        self._app_thread = threading.Thread(
            target=self._run_app, args=(args,), name=f"app-{self.name}", daemon=True
        )
        self._app_thread.start()
        return self

    def join(self, timeout: float | None = None):
        if self._app_thread is not None:
            self._app_thread.join(timeout)
            if self._app_thread.is_alive():
                raise NodeError(f"node {self.name} did not finish within {timeout}s")
        if self.error:
            raise NodeError(f"node {self.name} failed:\n{self.error}")
        return self.result


def _load_app(spec: str):
    module_name, _, attr = spec.partition(":")
    if not attr:
        raise SystemExit(f"--app must look like package.module:function, got {spec!r}")
    module = importlib.import_module(module_name)
    try:
        return getattr(module, attr)
    except AttributeError:
        raise SystemExit(f"{module_name} has no attribute {attr!r}") from None


def _load_types(app) -> list:
    types = getattr(app, "node_types", None)
    if types is None:
        raise SystemExit(
            "the application function must carry a node_types attribute listing its shared types"
        )
    return types


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="got-node", description="Run one application node."
    )
    parser.add_argument("--app", required=True, help="application as module:function")
    parser.add_argument("--name", required=True, help="unique node name")
    parser.add_argument("--port", type=int, default=None, help="sync server port")
    parser.add_argument("--remote", default=None, help="peer address host:port")
    parser.add_argument("--debug", default=None,
                        help=f"controller address host:port (or ${GCN_ENV_VAR})")
    parser.add_argument("--resolver", default=None,
                        help="three-way merge function as module:function")
    parser.add_argument("args", nargs="*", help="arguments passed to the application")
    opts = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    app = _load_app(opts.app)
    resolver = _load_app(opts.resolver) if opts.resolver else None
    node = Node(
        app,
        types=_load_types(app),
        server_port=opts.port,
        remote=opts.remote,
        resolver=resolver,
        debug=opts.debug,
        name=opts.name,
    )
    node.start(*opts.args)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
