"""Natural-language test reports.

The report is the feedback channel of the whole loop: it is embedded verbatim
in correction prompts and read by humans, so the templates are fixed and the
rendering is a pure function of its inputs (same results in, same bytes out).

Times render with one decimal and speeds with two, both rounded half-up.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP

from .oracle import (
    EVENT_GAP_NOT_SETTLED,
    EVENT_MANOEUVRE_MISSING,
    EVENT_SET_SPEED_MISSED,
    SR3,
    TestCaseResult,
    Violation,
)
from .protocol import (
    ExecutabilityStatus,
    STATUS_NO_CODE,
    STATUS_RUNTIME_FAILURE,
    STATUS_SYNTAX_ERROR,
    STATUS_TIMEOUT,
)
from .scenarios import ScenarioSpec
from .sim import EVENT_COLLISION, EVENT_LANE_CHANGE, EVENT_OFF_ROAD, SimEvent

SUMMARY_RE = re.compile(r"^Passed (\d+) of (\d+) test cases\.$", re.MULTILINE)


def _fmt(value: float, places: str) -> str:
    return str(Decimal(repr(float(value))).quantize(Decimal(places), rounding=ROUND_HALF_UP))


def fmt_time(value: float) -> str:
    return _fmt(value, "0.1")


def fmt_speed(value: float) -> str:
    return _fmt(value, "0.01")


def render_event(event: SimEvent, requirement: str | None = None) -> str:
    """One narrative sentence for a trace event or synthesized oracle event."""
    if event.kind == EVENT_COLLISION:
        return (
            f"Ego was involved in a collision at time: {fmt_time(event.time)} seconds "
            f"with a speed of {fmt_speed(event.ego_speed_at_event)} m/s, "
            f"colliding with: {event.object}."
        )
    if event.kind == EVENT_OFF_ROAD:
        return f"Ego exited the drivable area at time: {fmt_time(event.time)} seconds."
    if event.kind == EVENT_LANE_CHANGE and requirement == SR3:
        return (
            f"Ego performed an unintended lane change at time: {fmt_time(event.time)} "
            "seconds with no imminent collision ahead."
        )
    if event.kind == EVENT_LANE_CHANGE:
        return f"Ego completed a lane change at time: {fmt_time(event.time)} seconds."
    if event.kind == EVENT_MANOEUVRE_MISSING:
        return "Ego never performed the expected evasive lane change."
    if event.kind == EVENT_GAP_NOT_SETTLED:
        lo, hi = event.data
        return (
            f"Ego failed to settle at a steady time gap between {fmt_time(lo)} and "
            f"{fmt_time(hi)} seconds behind the lead vehicle."
        )
    if event.kind == EVENT_SET_SPEED_MISSED:
        actual, target = event.data
        return (
            f"Ego failed to reach the set speed: final speed {fmt_speed(actual)} m/s "
            f"versus set speed {fmt_speed(target)} m/s."
        )
    raise ValueError(f"no template for event kind {event.kind!r}")


def render_violation(violation: Violation) -> str:
    return render_event(violation.event, violation.requirement)


_STATUS_LABEL = {
    STATUS_NO_CODE: "no code generated",
    STATUS_SYNTAX_ERROR: "syntax error",
    STATUS_RUNTIME_FAILURE: "runtime error",
    STATUS_TIMEOUT: "timeout",
}


def _status_line(tc_id: str, status: ExecutabilityStatus) -> str:
    label = _STATUS_LABEL.get(status.kind, status.kind)
    detail = status.message.strip().splitlines()[0] if status.message.strip() else ""
    suffix = ""
    if status.tick is not None:
        suffix = f" at tick {status.tick}"
    if detail:
        return f"Test case {tc_id} not executable: {label}{suffix}: {detail}"
    return f"Test case {tc_id} not executable: {label}{suffix}"


@dataclass(frozen=True)
class TestCaseSection:
    tc_id: str
    description: str
    verdict: str
    narrative: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "tc_id": self.tc_id,
            "description": self.description,
            "verdict": self.verdict,
            "narrative": list(self.narrative),
        }


@dataclass(frozen=True)
class ReportSummary:
    passed_count: int
    total: int
    non_executable_tcs: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "passed_count": self.passed_count,
            "total": self.total,
            "non_executable_tcs": list(self.non_executable_tcs),
        }


@dataclass(frozen=True)
class TestReport:
    candidate_id: str
    per_tc: tuple[TestCaseSection, ...]
    summary: ReportSummary
    text: str

    def to_json_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "per_tc": [s.to_json_dict() for s in self.per_tc],
            "summary": self.summary.to_json_dict(),
        }


def render_section(spec: ScenarioSpec, result: TestCaseResult | None,
                   status: ExecutabilityStatus) -> TestCaseSection:
    """Render one test case: description line, verdict line, narrative lines."""
    tc_id = spec.id
    if not status.executable:
        return TestCaseSection(
            tc_id=tc_id,
            description=spec.description,
            verdict=_status_line(tc_id, status),
            narrative=(),
        )
    if result is None:
        raise ValueError(f"executable test case {tc_id} has no result")
    if result.passed:
        verdict = f"Test case {tc_id} passed: all acceptance criteria satisfied."
        narrative: tuple[str, ...] = ()
    else:
        n = len(result.violations)
        verdict = f"Test case {tc_id} failed: {n} violation(s) detected."
        narrative = tuple(render_violation(v) for v in result.violations)
    return TestCaseSection(tc_id, spec.description, verdict, narrative)


def render_report(candidate_id: str, specs: list[ScenarioSpec],
                  results: dict[str, TestCaseResult],
                  statuses: dict[str, ExecutabilityStatus]) -> TestReport:
    """Assemble the full plain-text report over all test cases, catalog order."""
    sections = []
    passed = 0
    non_executable = []
    for spec in specs:
        status = statuses[spec.id]
        result = results.get(spec.id)
        sections.append(render_section(spec, result, status))
        if not status.executable:
            non_executable.append(spec.id)
        elif result is not None and result.passed:
            passed += 1
    summary = ReportSummary(passed, len(specs), tuple(non_executable))

    lines: list[str] = [f"Test report for candidate {candidate_id}.", ""]
    for section in sections:
        lines.append(f"Test case {section.tc_id}: {section.description}")
        lines.append(section.verdict)
        for sentence in section.narrative:
            lines.append(f"- {sentence}")
        lines.append("")
    if non_executable:
        lines.append(f"Non-executable test cases: {', '.join(non_executable)}.")
    lines.append(f"Passed {summary.passed_count} of {summary.total} test cases.")
    text = "\n".join(lines) + "\n"
    return TestReport(candidate_id, tuple(sections), summary, text)


def parse_passed_count(text: str) -> tuple[int, int]:
    """Recover (passed, total) from a rendered report's summary line."""
    match = SUMMARY_RE.search(text)
    if match is None:
        raise ValueError("report has no summary line")
    return int(match.group(1)), int(match.group(2))
