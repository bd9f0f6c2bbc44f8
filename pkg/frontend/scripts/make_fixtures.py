"""Regenerate the UI test fixtures from the live controller endpoints.

The node-view fixture is the canonical three-version history (ROOT, 632e,
3a27 as HEAD) right before a commit's garbage-collect phase; the state
fixture is the byte-exact body of GET /nodes/Grouper/state?version=3a27 so
the UI tests can assert tooltip bytes match the server.

Run from the repository root:  python3 frontend/scripts/make_fixtures.py
"""

from pathlib import Path

from fastapi.testclient import TestClient

from got import Diff, NEW, ObjectDelta, ROOT, VersionGraph
from got.controller import ControllerCore
from got.gotcha_server import build_app

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def line_delta(i: int, text: str) -> tuple:
    return (("Line", i), ObjectDelta(NEW, {"line_num": i, "line": text}))


def fig5_history() -> VersionGraph:
    g = VersionGraph()
    first_five = Diff(dict(line_delta(i, t) for i, t in enumerate(["foo", "bar", "bar", "baz", "bar"])))
    g.extend(ROOT, first_five, version_id="632e")
    g.extend("632e", Diff(dict([line_delta(5, "bar")])), version_id="3a27")
    g.update_ref("SNAPSHOT", "3a27")
    return g


def steps_snapshot() -> dict:
    return {
        "executed": [
            {
                "step_id": "commit-5", "node": "Grouper", "kind": "commit",
                "phases": ["receive-data", "extend-graph", "garbage-collect"],
                "current_phase": 3, "origin": None, "seq": 11, "mid_phase": False,
                "done": True, "noop": False, "grants": [31, 32, 33],
            }
        ],
        "pending": [
            {
                "step_id": "commit-6", "node": "Grouper", "kind": "commit",
                "phases": ["receive-data", "extend-graph", "garbage-collect"],
                "current_phase": 2, "origin": None, "seq": 12, "mid_phase": False,
                "done": False, "noop": False, "grants": [34, 35],
            },
            {
                "step_id": "w1:respond-to-push", "node": "Grouper",
                "kind": "respond-to-push",
                "phases": ["receive-data", "detect-conflict", "extend-graph",
                           "garbage-collect"],
                "current_phase": 0, "origin": "WordCounter1", "seq": 13,
                "mid_phase": False, "done": False, "noop": False, "grants": [],
            },
            {
                "step_id": "w2:respond-to-push", "node": "Grouper",
                "kind": "respond-to-push",
                "phases": ["receive-data", "detect-conflict", "extend-graph",
                           "garbage-collect"],
                "current_phase": 0, "origin": "WordCounter2", "seq": 14,
                "mid_phase": False, "done": False, "noop": False, "grants": [],
            },
        ],
    }


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    core = ControllerCore()
    core.register_node("Grouper", "127.0.0.1:8000", None, [])
    core.register_node("WordCounter1", None, "127.0.0.1:8000", [])
    core.register_node("WordCounter2", None, "127.0.0.1:8000", [])
    history = fig5_history()
    core.gate_phase(
        node="Grouper", step_id="commit-6", kind="commit", phase_index=2,
        phases=["receive-data", "extend-graph", "garbage-collect"],
        payload=None, history=history.to_wire(), timeout=0.0,
    )
    client = TestClient(build_app(core, ui_dir=None))

    (FIXTURES / "fig5-history.json").write_bytes(
        client.get("/nodes/Grouper/history").content
    )
    (FIXTURES / "fig5-state-3a27.json").write_bytes(
        client.get("/nodes/Grouper/state?version=3a27").content
    )
    (FIXTURES / "topology.json").write_bytes(client.get("/topology").content)
    import json

    (FIXTURES / "steps.json").write_text(json.dumps(steps_snapshot(), indent=2))
    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()
