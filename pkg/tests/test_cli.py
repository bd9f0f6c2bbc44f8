"""Command-line entry points, run as subprocesses where cheap."""

import os
import subprocess
import sys
import tempfile

import pytest

from got.node import GCN_ENV_VAR, Node
from got.wordcount import WORDCOUNT_TYPES, grouper_app


def run_cli(module: str, *args, timeout=60):
    return subprocess.run(
        [sys.executable, "-m", module, *args],
        capture_output=True,
        text=True,
        timeout=timeout,
    )


@pytest.fixture
def input_file():
    with tempfile.NamedTemporaryFile("w", suffix=".txt", delete=False) as fh:
        fh.write("foo bar\nbar\n")
        path = fh.name
    yield path
    os.unlink(path)


def test_wordcount_grouper_zero_workers(input_file):
    proc = run_cli("got.wordcount_cli", "grouper", input_file, "0", "--port", "0")
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == ""  # no workers, no counts


def test_got_node_runs_an_app(input_file):
    proc = run_cli(
        "got.node",
        "--app", "got.wordcount:grouper_app",
        "--name", "Grouper",
        input_file, "0",
    )
    assert proc.returncode == 0, proc.stderr


def test_got_node_rejects_bad_app_spec():
    proc = run_cli("got.node", "--app", "got.wordcount", "--name", "X")
    assert proc.returncode != 0


def test_gotcha_cli_help():
    proc = run_cli("got.gotcha_server", "--help")
    assert proc.returncode == 0
    assert "--listen" in proc.stdout


def test_wordcount_cli_help():
    proc = run_cli("got.wordcount_cli", "--help")
    assert proc.returncode == 0
    for sub in ("grouper", "worker", "scenario"):
        assert sub in proc.stdout


def test_env_var_enables_debug_mode(monkeypatch):
    monkeypatch.setenv(GCN_ENV_VAR, "127.0.0.1:9999")
    node = Node(grouper_app, types=WORDCOUNT_TYPES, name="EnvNode")
    assert node.debug == "127.0.0.1:9999"
    monkeypatch.delenv(GCN_ENV_VAR)
    node = Node(grouper_app, types=WORDCOUNT_TYPES, name="EnvNode2")
    assert node.debug is None
