"""Command-line surface.

Exit codes: 0 all requested checks passed, 1 an evaluation ran and failed,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import SimloopError
from .host import RuntimeConfig, TRANSPORT_INPROCESS
from .oracle import OracleConfig, compute_headway, compute_ttc, evaluate
from .orchestrator import (
    PipelineConfig,
    evaluate_candidate_source,
    load_ledger,
    run_pipeline,
    save_ledger,
)
from .report import render_section
from .scenarios import (
    MODE_ACC,
    MODE_CAEM,
    build_test_case,
    catalog_for_mode,
    catalog_order,
    parse_scenario,
    serialize_scenario,
)
from .sim import DEFAULT_DT, load_trace
from .stats import compute_stats

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _parse_mode(value: str) -> str:
    value = value.upper()
    if value not in (MODE_ACC, MODE_CAEM):
        raise SimloopError(f"mode must be caem or acc, got {value!r}")
    return value


def cmd_run(args) -> int:
    config_path = Path(args.config)
    if not config_path.is_file():
        print(f"config file not found: {config_path}", file=sys.stderr)
        return EXIT_USAGE
    try:
        config = PipelineConfig.from_json_dict(json.loads(config_path.read_text()))
        ledger = run_pipeline(config)
        out = save_ledger(ledger, args.out)
    except (SimloopError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    stats = compute_stats(ledger)
    print(f"Ledger written to {out}")
    print(f"Candidates: {stats.total_candidates}; gold reached: {ledger.gold_reached}; "
          f"final baseline: {ledger.final_baseline}")
    return EXIT_OK


def _load_specs(mode: str, tc_arg: str | None):
    if tc_arg:
        ids = catalog_order([t.strip() for t in tc_arg.split(",") if t.strip()])
    else:
        ids = catalog_for_mode(mode)
    return [build_test_case(tc) for tc in ids]


def cmd_evaluate(args) -> int:
    code_path = Path(args.code)
    if not code_path.is_file():
        print(f"code file not found: {code_path}", file=sys.stderr)
        return EXIT_USAGE
    try:
        mode = _parse_mode(args.mode)
        specs = _load_specs(mode, args.tc)
    except SimloopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    transport = tuple(args.shim.split()) if args.shim else TRANSPORT_INPROCESS
    runtime = RuntimeConfig(transport=transport)
    run, results, report, passed = evaluate_candidate_source(
        code_path.read_text(), specs, args.dt, runtime, OracleConfig(),
        code_path.stem)
    print(report.text, end="")
    return EXIT_OK if passed == len(specs) and run.fully_executable else EXIT_FAILED


def cmd_report(args) -> int:
    try:
        ledger = load_ledger(args.ledger)
        candidate = ledger.candidate(args.candidate)
    except SimloopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report_path = Path(args.ledger) / "candidates" / candidate.id / "report.txt"
    if not report_path.is_file():
        print(f"error: candidate {candidate.id} has no stored report", file=sys.stderr)
        return EXIT_USAGE
    print(report_path.read_text(), end="")
    return EXIT_OK


def cmd_stats(args) -> int:
    try:
        ledger = load_ledger(args.ledger)
        stats = compute_stats(ledger)
    except SimloopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.json:
        print(json.dumps(stats.to_json_dict(), sort_keys=True, indent=2))
        return EXIT_OK
    print(f"Candidates:                 {stats.total_candidates}")
    print(f"Compilable:                 {stats.compilable_count}")
    print(f"Gold initial versions:      {stats.successful_initial}")
    print(f"Gold corrected versions:    {stats.successful_corrected}")
    print(f"Initial success rate:       {stats.success_rate_initial:.1%}")
    print(f"Correction success rate:    {stats.success_rate_correction:.1%}")
    print(f"Mean improvement (all corrections, share of suite):  "
          f"{stats.mean_delta_p_all_corrections:.1%}")
    print(f"Mean improvement (improving corrections only):       "
          f"{stats.mean_delta_p_improving_only:.1%}")
    print(f"Corrections counted: {stats.corrections_counted} "
          f"({stats.improving_corrections} improving)")
    return EXIT_OK


def cmd_scenario_export(args) -> int:
    try:
        spec = build_test_case(args.tc)
    except SimloopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(serialize_scenario(spec), end="")
    return EXIT_OK


def cmd_replay(args) -> int:
    trace_path = Path(args.trace)
    if not trace_path.is_file():
        print(f"trace file not found: {trace_path}", file=sys.stderr)
        return EXIT_USAGE
    if args.events:
        events_path = Path(args.events)
    else:
        events_path = trace_path.parent / (trace_path.stem + ".events.jsonl")
    if not events_path.is_file():
        events_path = None
    try:
        if args.scenario and Path(args.scenario).is_file():
            spec = parse_scenario(Path(args.scenario).read_text())
        else:
            spec = build_test_case(args.scenario or trace_path.name.split(".")[0])
        trace = load_trace(
            trace_path.read_text(),
            events_path.read_text() if events_path else "",
            spec)
        result = evaluate(trace, spec, OracleConfig())
    except SimloopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.format == "csv":
        print("time,headway,ttc,ego_lane")
        width = trace.road.lane_width
        for frame in trace.frames:
            headway = compute_headway(frame, width)
            ttc = compute_ttc(frame, width)
            print(f"{frame.time!r},"
                  f"{'' if headway is None else repr(headway)},"
                  f"{'' if ttc is None else repr(ttc)},"
                  f"{frame.ego.lane_index(width)}")
        return EXIT_OK
    section = render_section(spec, result, _replay_status(spec.id))
    print(f"Test case {section.tc_id}: {section.description}")
    print(section.verdict)
    for sentence in section.narrative:
        print(f"- {sentence}")
    return EXIT_OK if result.passed else EXIT_FAILED


def _replay_status(tc_id: str):
    from .protocol import executable_status

    return executable_status(tc_id)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simloop",
        description="Simulation-guided generation and safety evaluation of "
                    "vehicle controller code.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the full generate/simulate/correct loop")
    p_run.add_argument("--config", required=True, help="pipeline config JSON file")
    p_run.add_argument("--out", required=True, help="ledger output directory")
    p_run.set_defaults(fn=cmd_run)

    p_eval = sub.add_parser("evaluate", help="evaluate a controller source file")
    p_eval.add_argument("--code", required=True, help="candidate source file")
    p_eval.add_argument("--mode", default="caem", help="caem or acc")
    p_eval.add_argument("--tc", help="comma-separated test-case ids (default: full set)")
    p_eval.add_argument("--dt", type=float, default=DEFAULT_DT)
    p_eval.add_argument("--shim", help="run candidates via this child command "
                                       "instead of in-process")
    p_eval.set_defaults(fn=cmd_evaluate)

    p_report = sub.add_parser("report", help="print a stored candidate report")
    p_report.add_argument("--ledger", required=True)
    p_report.add_argument("--candidate", required=True, help="candidate id, e.g. C3")
    p_report.set_defaults(fn=cmd_report)

    p_stats = sub.add_parser("stats", help="success-rate statistics over a ledger")
    p_stats.add_argument("--ledger", required=True)
    p_stats.add_argument("--json", action="store_true")
    p_stats.set_defaults(fn=cmd_stats)

    p_scenario = sub.add_parser("scenario", help="scenario catalog utilities")
    scenario_sub = p_scenario.add_subparsers(dest="scenario_command", required=True)
    p_export = scenario_sub.add_parser("export", help="print a catalog scenario file")
    p_export.add_argument("--tc", required=True)
    p_export.set_defaults(fn=cmd_scenario_export)

    p_replay = sub.add_parser("replay", help="re-evaluate a stored trace")
    p_replay.add_argument("--trace", required=True, help="trace CSV file")
    p_replay.add_argument("--events", help="events JSONL (default: alongside the CSV)")
    p_replay.add_argument("--scenario", help="test-case id or scenario file "
                                             "(default: from the trace filename)")
    p_replay.add_argument("--format", choices=("text", "csv"), default="text")
    p_replay.set_defaults(fn=cmd_replay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SimloopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
