"""Headless command line: validate scenarios, run them to trace files,
compare against golden traces, and launch the session service.

Exit codes: 0 success, 1 validation failure, 2 trace mismatch, 3 runtime/IO.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
from pathlib import Path

from . import scenario as scn_mod
from .engine import parse_ticks
from .errors import LabError, ScenarioSyntaxError, ValidationError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_MISMATCH = 2
EXIT_RUNTIME = 3


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(human)


def _read_file(path: str) -> str:
    return Path(path).read_text()


def _load_scenario(args):
    text = _read_file(args.scenario)
    return scn_mod.parse_scenario(text)


def cmd_validate(args) -> int:
    try:
        scn = _load_scenario(args)
    except (ValidationError, ScenarioSyntaxError) as exc:
        _emit(
            args,
            {"ok": False, "code": exc.code, "message": exc.message,
             "path": getattr(exc, "path", "")},
            f"invalid: [{exc.code}] {exc.message} at {getattr(exc, 'path', '')}",
        )
        return EXIT_INVALID
    except OSError as exc:
        _emit(args, {"ok": False, "code": "io_error", "message": str(exc)}, f"error: {exc}")
        return EXIT_RUNTIME
    _emit(
        args,
        {"ok": True, "name": scn.name, "nodes": len(scn.nodes),
         "segments": len(scn.segments), "script_actions": len(scn.script)},
        f"ok: {scn.name} ({len(scn.nodes)} nodes, {len(scn.segments)} segments, "
        f"{len(scn.script)} script actions)",
    )
    return EXIT_OK


def _run_to_trace(args) -> tuple[int, str]:
    scn = scn_mod.parse_scenario(_read_file(args.scenario))
    until = parse_ticks(args.until) if args.until else None
    addendum = None
    steps = None
    if getattr(args, "addendum", None):
        bundle = json.loads(_read_file(args.addendum))
        if isinstance(bundle, dict):
            addendum = bundle.get("addendum", [])
            steps = bundle.get("steps")
            if until is None and bundle.get("until") is not None:
                until = bundle["until"]
            if args.seed is None and bundle.get("seed") is not None:
                args.seed = bundle["seed"]
        else:
            addendum = bundle
    lab = scn_mod.run_scenario(scn, seed=args.seed, until=until, addendum=addendum, steps=steps)
    return len(lab.engine.history), scn_mod.write_trace(lab.engine.history)


def cmd_run(args) -> int:
    try:
        count, trace_text = _run_to_trace(args)
    except (ValidationError, ScenarioSyntaxError) as exc:
        _emit(args, {"ok": False, "code": exc.code, "message": exc.message},
              f"invalid: [{exc.code}] {exc.message}")
        return EXIT_INVALID
    except OSError as exc:
        _emit(args, {"ok": False, "code": "io_error", "message": str(exc)}, f"error: {exc}")
        return EXIT_RUNTIME
    except LabError as exc:
        _emit(args, {"ok": False, "code": exc.code, "message": exc.message},
              f"error: [{exc.code}] {exc.message}")
        return EXIT_RUNTIME
    if args.trace:
        try:
            Path(args.trace).write_text(trace_text)
        except OSError as exc:
            _emit(args, {"ok": False, "code": "io_error", "message": str(exc)}, f"error: {exc}")
            return EXIT_RUNTIME
        _emit(args, {"ok": True, "records": count, "trace": args.trace},
              f"ok: {count} records -> {args.trace}")
    else:
        sys.stdout.write(trace_text)
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        golden_text = _read_file(args.golden)
        golden = scn_mod.read_trace(golden_text)
        count, trace_text = _run_to_trace(args)
        got = scn_mod.read_trace(trace_text)
    except (ValidationError,) as exc:
        _emit(args, {"ok": False, "code": exc.code, "message": exc.message},
              f"invalid: [{exc.code}] {exc.message}")
        return EXIT_INVALID
    except ScenarioSyntaxError as exc:
        _emit(args, {"ok": False, "code": exc.code, "message": exc.message},
              f"invalid: [{exc.code}] {exc.message}")
        return EXIT_INVALID
    except OSError as exc:
        _emit(args, {"ok": False, "code": "io_error", "message": str(exc)}, f"error: {exc}")
        return EXIT_RUNTIME
    divergence = scn_mod.diff_traces(got, golden)
    if divergence is None:
        _emit(args, {"ok": True, "records": len(got)}, f"ok: {len(got)} records match golden")
        return EXIT_OK
    index, left, right = divergence
    _emit(
        args,
        {
            "ok": False,
            "divergence_index": index,
            "got": left.as_dict() if left else None,
            "golden": right.as_dict() if right else None,
        },
        f"mismatch at record {index}:\n  got:    {left.as_dict() if left else '<missing>'}\n"
        f"  golden: {right.as_dict() if right else '<missing>'}",
    )
    return EXIT_MISMATCH


def cmd_serve(args) -> int:
    # probe the port first so a bind failure is a clean exit code
    try:
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((args.host, args.port))
        probe.close()
    except OSError as exc:
        print(f"error: cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    import uvicorn

    from .service import create_app

    app = create_app(data_dir=args.data_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netlab",
        description="Deterministic protocol/algorithm lab: validate and run scenarios, "
        "check golden traces, serve the interactive API.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a scenario file")
    p.add_argument("scenario")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("run", help="run a scenario and write its trace")
    p.add_argument("scenario")
    p.add_argument("--until", help="virtual stop time (e.g. 120s, 500ms); default scenario duration")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--trace", help="output trace path (default stdout)")
    p.add_argument("--addendum", help="injection addendum JSON exported from a session")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("check", help="run a scenario and diff against a golden trace")
    p.add_argument("scenario")
    p.add_argument("golden")
    p.add_argument("--until")
    p.add_argument("--seed", type=int)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--data-dir", help="scenario catalog directory (default $LAB_DATA_DIR or ./lab-data)")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
