"""Command line for the word-frequency counter nodes and the scripted scenario.

Usage:
    got-wordcount grouper <file> <num_workers> [--port N] [--merge buggy|fixed]
                          [--debug host:port] [--name NAME]
    got-wordcount worker <grouper_host:port> <index> <num_workers>
                          [--debug host:port] [--name NAME]
    got-wordcount scenario {buggy|fixed} [--seed N] [--breakpoint PRED]
"""

from __future__ import annotations

import argparse
import logging
import sys

from .node import GCN_ENV_VAR, Node
from .wordcount import MERGE_FUNCTIONS, WORDCOUNT_TYPES, grouper_app, worker_app


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = argparse.ArgumentParser(prog="got-wordcount")
    sub = parser.add_subparsers(dest="role", required=True)

    grouper = sub.add_parser("grouper", help="run the Grouper node")
    grouper.add_argument("file")
    grouper.add_argument("num_workers", type=int)
    grouper.add_argument("--port", type=int, default=8000)
    grouper.add_argument("--merge", choices=sorted(MERGE_FUNCTIONS), default="fixed")
    grouper.add_argument("--debug", default=None,
                         help=f"controller address (or ${GCN_ENV_VAR})")
    grouper.add_argument("--name", default="Grouper")

    worker = sub.add_parser("worker", help="run one WordCounter node")
    worker.add_argument("grouper", help="grouper address host:port")
    worker.add_argument("index", type=int)
    worker.add_argument("num_workers", type=int)
    worker.add_argument("--debug", default=None,
                        help=f"controller address (or ${GCN_ENV_VAR})")
    worker.add_argument("--name", default=None)

    scenario = sub.add_parser("scenario", help="run the scripted debugging session")
    scenario.add_argument("merge", choices=sorted(MERGE_FUNCTIONS))
    scenario.add_argument("--seed", type=int, default=None)
    scenario.add_argument("--breakpoint", dest="breakpoint_text", default=None)

    opts = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")

    if opts.role == "grouper":
        node = Node(
            grouper_app,
            types=WORDCOUNT_TYPES,
            server_port=opts.port,
            resolver=MERGE_FUNCTIONS[opts.merge],
            debug=opts.debug,
            name=opts.name,
        )
        node.start(opts.file, opts.num_workers)
        return 0

    if opts.role == "worker":
        name = opts.name or f"WordCounter{opts.index + 1}"
        node = Node(
            worker_app,
            types=WORDCOUNT_TYPES,
            remote=opts.grouper,
            debug=opts.debug,
            name=name,
        )
        node.start(opts.index, opts.num_workers)
        return 0

    from .scenario import main as scenario_main

    args = [opts.merge]
    if opts.seed is not None:
        args += ["--seed", str(opts.seed)]
    if opts.breakpoint_text:
        args += ["--breakpoint", opts.breakpoint_text]
    return scenario_main(args)


if __name__ == "__main__":
    raise SystemExit(main())
