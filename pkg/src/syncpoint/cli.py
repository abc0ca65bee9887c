"""Command-line entry points.

    syncpoint serve    --listen HOST:PORT --log PATH
    syncpoint ingest   FILE.ics --system-address MAILTO --log PATH [--now N]
    syncpoint status   ACTIVITY_ID --log PATH [--now N]
    syncpoint replay   --log PATH [--now N]
    syncpoint simulate SCENARIO.json [--out PATH]
    syncpoint simulate --check SCENARIO.json GOLDEN.jsonl

`status` and `replay` are offline tools: they rebuild state from the event
log and print status views as canonical wire frames. `simulate --check`
exits non-zero on the first diverging transcript line.
"""

from __future__ import annotations

import argparse
import asyncio
import sys
import time
from pathlib import Path

from .engine import Engine, replay, status_view
from .errors import SyncError
from .eventlog import CorruptRecord, load_log, read_records
from .ics import parse_ics
from .net import serve_forever
from .sim import (
    first_divergence,
    load_scenario,
    run_scenario,
    transcript_lines,
    write_transcript,
)
from .wire import encode


def _parse_listen(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError("--listen expects HOST:PORT")
    return (host or "127.0.0.1", int(port))


def _recover_state(log_path: str):
    """Replay a log, keeping the good prefix when the tail is corrupt."""
    try:
        records = load_log(log_path)
    except CorruptRecord as e:
        print(f"warning: {e.detail}; keeping state up to record {e.index}",
              file=sys.stderr)
        records = []
        try:
            for record in read_records(_log_lines(log_path)):
                records.append(record)
        except CorruptRecord:
            pass
    return replay(records)


def _log_lines(log_path: str) -> list[str]:
    text = Path(log_path).read_text(encoding="utf-8")
    raw = text.split("\n")
    lines = [r + "\n" for r in raw[:-1]]
    if raw[-1]:
        lines.append(raw[-1])
    return lines


def cmd_serve(args) -> int:
    host, port = args.listen
    engine = Engine(log_path=args.log)
    try:
        asyncio.run(serve_forever(engine, host, port))
    except KeyboardInterrupt:
        pass
    finally:
        engine.close()
    return 0


def cmd_ingest(args) -> int:
    engine = Engine(log_path=args.log)
    try:
        text = Path(args.file).read_text(encoding="utf-8")
        result = parse_ics(text, args.system_address)
        for warning in result.warnings:
            print(f"warning: {warning}", file=sys.stderr)
        known = engine.known_calendar_uids()
        created = 0
        for draft in result.drafts:
            if draft.uid in known:
                print(f"warning: event {draft.uid} already ingested, skipping",
                      file=sys.stderr)
                continue
            act, _ = engine.materialize_draft(draft, now=args.now)
            created += 1
            print(f"created {act.id} ({act.kind.value}) from event {draft.uid}")
        print(f"ingested {created} activities, skipped {result.skipped} "
              f"non-enrolled events")
        return 0
    finally:
        engine.close()


def cmd_status(args) -> int:
    state = _recover_state(args.log)
    view = status_view(state, args.activity_id, args.now)
    sys.stdout.write(encode(view))
    return 0


def cmd_replay(args) -> int:
    state = _recover_state(args.log)
    for activity_id in state.activities:
        sys.stdout.write(encode(status_view(state, activity_id, args.now)))
    return 0


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    result = run_scenario(scenario)
    if args.check:
        actual = transcript_lines(result.transcript)
        expected_text = Path(args.golden).read_text(encoding="utf-8")
        expected = [ln + "\n" for ln in expected_text.split("\n")[:-1]]
        if expected_text and not expected_text.endswith("\n"):
            expected.append(expected_text.split("\n")[-1])
        line = first_divergence(actual, expected)
        if line is None:
            print(f"transcript matches {args.golden} ({len(actual)} lines)")
            return 0
        got = actual[line - 1].rstrip("\n") if line <= len(actual) else "<end of transcript>"
        want = expected[line - 1].rstrip("\n") if line <= len(expected) else "<end of golden>"
        print(f"transcript diverges at line {line}:", file=sys.stderr)
        print(f"  got:  {got}", file=sys.stderr)
        print(f"  want: {want}", file=sys.stderr)
        return 1
    if args.out:
        write_transcript(args.out, result.transcript)
        print(f"wrote {len(result.transcript)} transcript lines to {args.out}")
    else:
        for line in transcript_lines(result.transcript):
            sys.stdout.write(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="syncpoint",
        description="Coarse-grained location-based synchronisation service",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the TCP server")
    p.add_argument("--listen", type=_parse_listen, default=("127.0.0.1", 7007),
                   help="HOST:PORT to listen on (default 127.0.0.1:7007)")
    p.add_argument("--log", required=True, help="event log path")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("ingest", help="create activities from an .ics file")
    p.add_argument("file", help=".ics file to ingest")
    p.add_argument("--system-address", required=True,
                   help="the service's own mailto address")
    p.add_argument("--log", required=True, help="event log path")
    p.add_argument("--now", type=int, default=None,
                   help="creation timestamp (default: wall clock)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("status", help="print one activity's status view")
    p.add_argument("activity_id")
    p.add_argument("--log", required=True, help="event log path")
    p.add_argument("--now", type=int, default=None,
                   help="timestamp for phase rendering (default: wall clock)")
    p.set_defaults(func=cmd_status)

    p = sub.add_parser("replay", help="rebuild state from the log, print status views")
    p.add_argument("--log", required=True, help="event log path")
    p.add_argument("--now", type=int, default=None,
                   help="timestamp for phase rendering (default: wall clock)")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("simulate", help="run a scenario file")
    p.add_argument("scenario", help="scenario .json file")
    p.add_argument("golden", nargs="?", help="golden transcript (with --check)")
    p.add_argument("--out", help="write the transcript here instead of stdout")
    p.add_argument("--check", action="store_true",
                   help="compare against the golden transcript")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "now", None) is None and hasattr(args, "now"):
        args.now = int(time.time())
    if getattr(args, "check", False) and not args.golden:
        print("simulate --check needs a golden transcript path", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except SyncError as e:
        print(f"error: {e.code}: {e.detail}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
