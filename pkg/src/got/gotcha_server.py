"""HTTP and WebSocket front end for the debugger controller.

Exposes the node-side gate (POST /step, /work, /report), the user controls
(step/play/pause, breakpoints, reorder, rollback) and the read-only views the
browser UI renders from. GET / serves the built UI bundle when present.
"""

from __future__ import annotations

import argparse
import logging
import queue
import threading
from pathlib import Path

import anyio
import uvicorn
from fastapi import Body, FastAPI, HTTPException, Query, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .breakpoints import BreakpointSyntaxError
from .controller import ControllerCore, ControllerError

logger = logging.getLogger(__name__)

DEFAULT_UI_DIR = Path(__file__).resolve().parents[2] / "frontend" / "dist"


def build_app(core: ControllerCore, ui_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="gotcha", docs_url=None, redoc_url=None)

    def guarded(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except BreakpointSyntaxError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except ControllerError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc

    # -- node-side channel --

    @app.post("/register")
    def register(body: dict = Body(...)):
        guarded(
            core.register_node,
            body["name"],
            body.get("address"),
            body.get("remote"),
            body.get("schemas") or [],
        )
        return {"ok": True}

    @app.post("/step")
    def step_gate(body: dict = Body(...)):
        action, reply = guarded(
            core.gate_phase,
            node=body["node"],
            step_id=body["step_id"],
            kind=body["kind"],
            phase_index=body["phase_index"],
            phases=body["phases"],
            payload=body.get("payload"),
            history=body.get("history"),
            noop=body.get("noop", False),
        )
        return {"action": action, "forwarded_reply": reply}

    @app.post("/work")
    def work(body: dict = Body(...)):
        return guarded(core.get_work, body["node"])

    @app.post("/report")
    def report(body: dict = Body(...)):
        guarded(
            core.report_phase,
            node=body["node"],
            step_id=body["step_id"],
            phase_index=body["phase_index"],
            phases=body["phases"],
            history=body.get("history"),
            reply=body.get("reply"),
            done=body.get("done", False),
        )
        return {"ok": True}

    @app.post("/command-result")
    def command_result(body: dict = Body(...)):
        guarded(core.report_command, body["node"], body.get("history"), body.get("error"))
        return {"ok": True}

    @app.post("/exited")
    def exited(body: dict = Body(...)):
        guarded(core.node_exited, body["node"], body.get("error"))
        return {"ok": True}

    # -- user controls --

    @app.post("/control")
    def control(body: dict = Body(...)):
        action = body.get("action")
        if action == "step_node":
            guarded(core.step_node, body["node"])
        elif action == "step_all":
            guarded(core.step_all)
        elif action == "play":
            core.play()
        elif action == "pause":
            core.pause()
        else:
            raise HTTPException(status_code=400, detail=f"unknown action {action!r}")
        return {"ok": True, "mode": core.mode}

    @app.get("/breakpoints")
    def list_breakpoints():
        return core.list_breakpoints()

    @app.post("/breakpoints")
    def add_breakpoint(body: dict = Body(...)):
        bp_id = guarded(core.add_breakpoint, body["predicate"])
        return {"id": bp_id}

    @app.delete("/breakpoints/{bp_id}")
    def remove_breakpoint(bp_id: int):
        guarded(core.remove_breakpoint, bp_id)
        return {"ok": True}

    @app.post("/nodes/{name}/reorder")
    def reorder(name: str, body: dict = Body(...)):
        guarded(core.reorder_step, name, body["step_id"], body["direction"])
        return {"ok": True}

    @app.post("/nodes/{name}/rollback")
    def rollback(name: str, body: dict = Body(...)):
        guarded(core.rollback_node, name, body["version"])
        return {"ok": True}

    # -- read-only views --

    @app.get("/topology")
    def topology():
        return core.get_topology()

    @app.get("/nodes/{name}/history")
    def history(name: str):
        return guarded(core.get_history, name)

    @app.get("/nodes/{name}/steps")
    def steps(name: str):
        return guarded(core.get_steps, name)

    @app.get("/nodes/{name}/state")
    def state(name: str, version: str | None = Query(default=None)):
        return guarded(core.get_state, name, version)

    @app.get("/nodes/{name}/schemas")
    def schemas(name: str):
        return guarded(core.get_schemas, name)

    # -- events --

    @app.websocket("/events")
    async def events(ws: WebSocket):
        await ws.accept()
        q = core.subscribe()

        def next_event():
            try:
                return q.get(timeout=0.5)
            except queue.Empty:
                return None

        try:
            while True:
                event = await anyio.to_thread.run_sync(next_event)
                if event is not None:
                    await ws.send_json(event)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            core.unsubscribe(q)

    ui = ui_dir if ui_dir is not None else DEFAULT_UI_DIR
    if ui and Path(ui).is_dir():
        app.mount("/", StaticFiles(directory=str(ui), html=True), name="ui")
    else:

        @app.get("/")
        def index():
            return JSONResponse(
                {"service": "gotcha", "ui": "not built", "topology": "/topology"}
            )

    return app


class GotchaServer:
    """Controller plus its web service, runnable in the background for tests."""

    def __init__(
        self,
        core: ControllerCore | None = None,
        host: str = "127.0.0.1",
        port: int = 8800,
        ui_dir: Path | None = None,
    ):
        self.core = core or ControllerCore()
        self.host = host
        self.port = port
        config = uvicorn.Config(
            build_app(self.core, ui_dir), host=host, port=port, log_level="warning"
        )
        self._server = uvicorn.Server(config)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> str:
        return f"{self.host}:{self.port}"

    def start_background(self, timeout: float = 10.0) -> "GotchaServer":
        self._thread = threading.Thread(target=self._server.run, name="gotcha", daemon=True)
        self._thread.start()
        import time

        deadline = time.monotonic() + timeout
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("controller web service did not start")
            time.sleep(0.01)
        return self

    def run(self) -> None:
        self._server.run()

    def stop(self) -> None:
        self._server.should_exit = True
        if self._thread is not None:
            self._thread.join(timeout=10)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gotcha", description="Run the debugger controller.")
    parser.add_argument("--listen", default="127.0.0.1:8800", help="host:port to listen on")
    parser.add_argument("--ui", default=None, help="directory with the built UI bundle")
    opts = parser.parse_args(argv)
    host, _, port = opts.listen.partition(":")
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    server = GotchaServer(
        host=host or "127.0.0.1",
        port=int(port or 8800),
        ui_dir=Path(opts.ui) if opts.ui else None,
    )
    logger.info("controller listening on %s", server.address)
    server.run()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
