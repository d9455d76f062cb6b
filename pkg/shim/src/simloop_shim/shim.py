"""Child-process runtime for candidate controllers.

Loads one candidate source file, speaks the line-delimited JSON protocol on
stdin/stdout, and converts candidate failures into structured error messages:

    {"type": "error", "kind": "syntax",  "message": ...}
    {"type": "error", "kind": "runtime", "tick": ..., "message": ...}

The candidate contract is a single entry point ``controller(obs)`` returning
``(accel, lane_change)`` (a 2-sequence, or a mapping with those keys).  The
shim adds no behaviour of its own: return values are passed through verbatim,
module-level candidate state persists across ticks, and each scenario gets a
fresh process.  Candidate ``print`` output is redirected to stderr so it can
never corrupt the protocol stream.

Ticks are numbered from 0, counting ``observe`` messages.
"""

from __future__ import annotations

import json
import sys
import traceback
from contextlib import redirect_stdout

ENTRY_POINT = "controller"


def _emit(stream, payload: dict) -> None:
    stream.write(json.dumps(payload, sort_keys=True) + "\n")
    stream.flush()


def _error(stream, kind: str, message: str, tick: int | None = None) -> int:
    payload = {"type": "error", "kind": kind, "message": message}
    if tick is not None:
        payload["tick"] = tick
    _emit(stream, payload)
    return 1


def _load(source_path: str, out) -> object | int:
    """Compile and execute the candidate; returns its entry point or an exit code."""
    with open(source_path, "r") as handle:
        source = handle.read()
    try:
        code = compile(source, source_path, "exec")
    except SyntaxError as exc:
        return _error(out, "syntax", f"{exc.msg} (line {exc.lineno})")
    namespace: dict = {"__name__": "candidate"}
    try:
        with redirect_stdout(sys.stderr):
            exec(code, namespace)
    except BaseException as exc:
        traceback.print_exc()
        return _error(out, "runtime",
                      f"error while loading candidate: {type(exc).__name__}: {exc}",
                      tick=0)
    entry = namespace.get(ENTRY_POINT)
    if not callable(entry):
        return _error(out, "runtime",
                      f"candidate defines no callable {ENTRY_POINT!r}", tick=0)
    return entry


def _unpack(raw) -> tuple[object, object]:
    if isinstance(raw, dict):
        return raw["accel"], raw["lane_change"]
    if isinstance(raw, (tuple, list)) and len(raw) == 2:
        return raw[0], raw[1]
    raise TypeError(f"controller returned {raw!r}, expected (accel, lane_change)")


def serve(source_path: str, stdin=None, stdout=None) -> int:
    """Serve one scenario run; returns the process exit status."""
    stdin = stdin if stdin is not None else sys.stdin
    out = stdout if stdout is not None else sys.stdout

    entry = _load(source_path, out)
    if isinstance(entry, int):
        return entry

    tick = 0
    ready_sent = False
    for line in stdin:
        if not line.strip():
            continue
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            return _error(out, "runtime", f"unreadable host message: {exc}", tick=tick)
        kind = message.get("type")
        if kind == "init":
            if not ready_sent:
                _emit(out, {"type": "ready"})
                ready_sent = True
        elif kind == "observe":
            obs = {key: value for key, value in message.items() if key != "type"}
            try:
                with redirect_stdout(sys.stderr):
                    raw = entry(obs)
                accel, lane_change = _unpack(raw)
                reply = json.dumps({"type": "act", "accel": accel,
                                    "lane_change": lane_change}, sort_keys=True)
            except BaseException as exc:
                traceback.print_exc()
                return _error(out, "runtime", f"{type(exc).__name__}: {exc}",
                              tick=tick)
            out.write(reply + "\n")
            out.flush()
            tick += 1
        elif kind == "end":
            return 0
        else:
            return _error(out, "runtime", f"unknown host message {kind!r}", tick=tick)
    return 0


def main(argv=None) -> int:
    argv = argv if argv is not None else sys.argv[1:]
    if len(argv) != 1:
        print("usage: simloop-shim <candidate_source.py>", file=sys.stderr)
        return 2
    return serve(argv[0])


if __name__ == "__main__":
    sys.exit(main())
