"""Command-line harness.

Subcommands::

    synchron run <case> [--board B.json] [--stimulus S.jsonl] [--until N]
                        [--trace out.jsonl] [--clock-hz N] [--epsilon N]
                        [--max-steps N] [--debug] [--serve PORT] [--speed X]
    synchron jitter <trace.jsonl> --driver ID --period TICKS
    synchron fsm-check <trace.jsonl> --spec fsm.json

Exit codes: 0 clean run / pass, 1 deadlock or conformance failure, 2 usage
error.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import SynchronError, UsageError
from ..ll_bridge import Board, load_stimulus_file
from . import programs
from .analysis import fsm_conformance, measure_jitter
from .trace import Trace

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synchron",
        description="Deterministic virtual-time runtime and case-study harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a case study on the virtual board")
    run.add_argument("case", choices=programs.case_names())
    run.add_argument("--board", help="board description JSON file")
    run.add_argument("--stimulus", help="stimulus script (JSON lines)")
    run.add_argument("--until", type=int, help="stop once virtual time would pass this tick")
    run.add_argument("--max-steps", type=int, help="hard cap on scheduler steps")
    run.add_argument("--trace", help="write the trace to this JSONL file")
    run.add_argument("--clock-hz", type=int, help="override the board clock frequency")
    run.add_argument("--epsilon", type=int, default=2,
                     help="baselines below this many ticks skip the alarm (default 2)")
    run.add_argument("--debug", action="store_true",
                     help="run structural audits after every scheduler step")
    run.add_argument("--serve", type=int, metavar="PORT",
                     help="serve the live panel protocol instead of running to completion")
    run.add_argument("--speed", type=float, default=1.0,
                     help="virtual-to-wall time rate in serve mode (default 1.0)")

    jitter = sub.add_parser("jitter", help="periodicity report over a saved trace")
    jitter.add_argument("trace")
    jitter.add_argument("--driver", type=int, required=True)
    jitter.add_argument("--period", type=int, required=True)

    fsm = sub.add_parser("fsm-check", help="replay a trace against a transition table")
    fsm.add_argument("trace")
    fsm.add_argument("--spec", required=True)
    return parser


def _cmd_run(args) -> int:
    board = Board.from_file(args.board) if args.board else None
    stimuli = load_stimulus_file(args.stimulus) if args.stimulus else ()
    kwargs = {"epsilon_ticks": args.epsilon, "debug": args.debug}
    if args.clock_hz:
        kwargs["clock_hz"] = args.clock_hz

    if args.serve is not None:
        from .server import serve_case

        serve_case(args.case, port=args.serve, board=board, stimuli=stimuli,
                   until=args.until, speed=args.speed, **kwargs)
        return EXIT_OK

    runtime = programs.build_case_study(args.case, board=board, **kwargs)
    runtime.schedule_stimuli(stimuli)
    trace = runtime.run_loop(until=args.until, max_steps=args.max_steps)
    if args.trace:
        trace.save(args.trace)
    print(f"case={args.case} stop={runtime.stop_reason} records={len(trace)} "
          f"t={runtime.now}")
    if runtime.stop_reason == "deadlock":
        print(runtime.deadlock_report, file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _cmd_jitter(args) -> int:
    trace = Trace.load(args.trace)
    report = measure_jitter(trace, args.driver, args.period)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


def _cmd_fsm_check(args) -> int:
    trace = Trace.load(args.trace)
    divergence = fsm_conformance(trace, args.spec)
    if divergence is None:
        print("conformance: pass")
        return EXIT_OK
    print(f"conformance: fail ({divergence})")
    return EXIT_FAIL


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "jitter":
            return _cmd_jitter(args)
        if args.command == "fsm-check":
            return _cmd_fsm_check(args)
        raise UsageError(f"unknown command {args.command!r}")
    except SynchronError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
