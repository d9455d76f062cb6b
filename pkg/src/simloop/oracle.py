"""Rule-based safety evaluation of simulation traces.

Three safety requirements are checked on every trace:

* SR1 — no collision involving the ego vehicle.
* SR2 — the ego footprint never leaves the drivable area.
* SR3 — no completed ego lane change without an imminent forward collision at
  (or within a short window before) the initiation tick.

On top of these, the scenario's expected outcome is checked: lane-keep-only
scenarios must see zero completed ego lane changes, and ACC scenarios may
demand a settled time gap or a reached set speed.  Expectation misses are
reported under the ``ExpectedManoeuvreMissing`` requirement and, like the
lane-change requirement in the cut-in scenarios, can only fire on traces that
are otherwise clean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import EvaluationError
from .scenarios import ScenarioSpec
from .sim import (
    EVENT_COLLISION,
    EVENT_LANE_CHANGE,
    EVENT_OFF_ROAD,
    EGO_NAME,
    LANE_CHANGE_DURATION_S,
    SimEvent,
    SimTrace,
    TraceFrame,
)

SR1 = "SR1"
SR2 = "SR2"
SR3 = "SR3"
EXPECTED_MANOEUVRE_MISSING = "ExpectedManoeuvreMissing"

# Synthesized event kinds used when a violation is about an absence rather
# than a logged event; they never appear in SimTrace.events.
EVENT_MANOEUVRE_MISSING = "ExpectedManoeuvreMissing"
EVENT_GAP_NOT_SETTLED = "TimeGapNotSettled"
EVENT_SET_SPEED_MISSED = "SetSpeedNotReached"


@dataclass(frozen=True)
class OracleConfig:
    """Thresholds for the imminent-collision test and the ACC checks."""

    imminent_ttc_s: float = 4.0
    imminent_headway_s: float = 0.75
    imminent_window_s: float = 3.0
    settle_window_s: float = 5.0

    def to_json_dict(self) -> dict:
        return {
            "imminent_ttc_s": self.imminent_ttc_s,
            "imminent_headway_s": self.imminent_headway_s,
            "imminent_window_s": self.imminent_window_s,
            "settle_window_s": self.settle_window_s,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "OracleConfig":
        return OracleConfig(**d)


@dataclass(frozen=True)
class Violation:
    requirement: str
    event: SimEvent

    def to_json_dict(self) -> dict:
        return {"requirement": self.requirement, "event": self.event.to_json_dict()}


@dataclass(frozen=True)
class Metrics:
    min_ttc: float | None
    min_headway: float | None
    lane_change_times: tuple[float, ...]

    def to_json_dict(self) -> dict:
        return {
            "min_ttc": self.min_ttc,
            "min_headway": self.min_headway,
            "lane_change_times": list(self.lane_change_times),
        }


@dataclass(frozen=True)
class TestCaseResult:
    tc_id: str
    passed: bool
    violations: tuple[Violation, ...]
    metrics: Metrics
    narrative: tuple[str, ...] = field(default=())  # filled by the report generator

    def to_json_dict(self) -> dict:
        return {
            "tc_id": self.tc_id,
            "passed": self.passed,
            "violations": [v.to_json_dict() for v in self.violations],
            "metrics": self.metrics.to_json_dict(),
            "narrative": list(self.narrative),
        }


# --------------------------------------------------------------------------
# Frame metrics
# --------------------------------------------------------------------------

def _nearest_lead(frame: TraceFrame, lane_width: float):
    """Nearest same-lane, same-direction vehicle ahead of the ego, or None.

    Returns (gap, vehicle) with gap measured rear bumper to ego front bumper;
    only strictly positive gaps qualify as "ahead".
    """
    ego = frame.ego
    ego_lane = ego.lane_index(lane_width)
    best = None
    for v in frame.vehicles[1:]:
        if v.heading != ego.heading:
            continue
        if v.lane_index(lane_width) != ego_lane:
            continue
        gap = (v.s - v.length) - ego.s
        if gap <= 0:
            continue
        if best is None or gap < best[0]:
            best = (gap, v)
    return best


def compute_headway(frame: TraceFrame, lane_width: float) -> float | None:
    """Bumper gap to the nearest lead divided by ego speed; None if undefined."""
    ego = frame.ego
    if ego.speed <= 0:
        return None
    lead = _nearest_lead(frame, lane_width)
    if lead is None:
        return None
    return lead[0] / ego.speed


def compute_ttc(frame: TraceFrame, lane_width: float) -> float | None:
    """Bumper gap divided by closing speed; None when not closing or no lead."""
    ego = frame.ego
    lead = _nearest_lead(frame, lane_width)
    if lead is None:
        return None
    gap, vehicle = lead
    closing = ego.speed - vehicle.speed
    if closing <= 0:
        return None
    return gap / closing


# --------------------------------------------------------------------------
# SR3: unintended lane changes
# --------------------------------------------------------------------------

def detect_unintended_lane_change(trace: SimTrace, spec: ScenarioSpec,
                                  config: OracleConfig = OracleConfig()) -> list[SimEvent]:
    """Completed ego lane changes with no imminent-collision justification.

    A manoeuvre completed at time ``t`` started at ``t - 2 s`` (fixed ramp
    duration); it is intended iff some frame within ``imminent_window_s``
    before the initiation tick (inclusive) had a same-lane lead with
    TTC below ``imminent_ttc_s`` or headway below ``imminent_headway_s``.
    """
    width = trace.road.lane_width
    eps = trace.dt / 2.0
    unintended = []
    for event in trace.events_of_kind(EVENT_LANE_CHANGE):
        if event.subject != EGO_NAME:
            continue
        t_init = event.time - LANE_CHANGE_DURATION_S
        lo = t_init - config.imminent_window_s
        intended = False
        for frame in trace.frames:
            if frame.time < lo - eps:
                continue
            if frame.time > t_init + eps:
                break
            ttc = compute_ttc(frame, width)
            headway = compute_headway(frame, width)
            if ((ttc is not None and ttc < config.imminent_ttc_s)
                    or (headway is not None and headway < config.imminent_headway_s)):
                intended = True
                break
        if not intended:
            unintended.append(event)
    return unintended


# --------------------------------------------------------------------------
# Full evaluation
# --------------------------------------------------------------------------

def evaluate(trace: SimTrace, spec: ScenarioSpec,
             config: OracleConfig = OracleConfig()) -> TestCaseResult:
    """Evaluate one trace against SR1-SR3 plus the scenario's expectations."""
    if trace.scenario_id != spec.id:
        raise EvaluationError(
            f"trace belongs to {trace.scenario_id!r}, spec is {spec.id!r}")
    width = trace.road.lane_width
    violations: list[Violation] = []

    for event in trace.events_of_kind(EVENT_COLLISION):
        if EGO_NAME in (event.subject, event.object):
            violations.append(Violation(SR1, event))

    off_road_frame = _first_off_road_frame(trace)
    if off_road_frame is not None:
        event = _matching_event(trace, EVENT_OFF_ROAD, off_road_frame.time)
        if event is None:
            event = SimEvent(EVENT_OFF_ROAD, off_road_frame.time, EGO_NAME,
                             None, off_road_frame.ego.speed)
        violations.append(Violation(SR2, event))

    flagged_changes = set()
    for event in detect_unintended_lane_change(trace, spec, config):
        flagged_changes.add(event.time)
        violations.append(Violation(SR3, event))

    ego_changes = [e for e in trace.events_of_kind(EVENT_LANE_CHANGE)
                   if e.subject == EGO_NAME]
    if spec.expected_outcome.lane_change_forbidden:
        # In a lane-keep-only scenario every completed change violates SR3,
        # even one that cleared the imminent-collision test.
        for event in ego_changes:
            if event.time not in flagged_changes:
                violations.append(Violation(SR3, event))

    if not violations:
        violations.extend(_expectation_misses(trace, spec, config))

    metrics = _metrics(trace, ego_changes, width)
    violations.sort(key=lambda v: (v.event.time, v.requirement))
    return TestCaseResult(
        tc_id=spec.id,
        passed=not violations,
        violations=tuple(violations),
        metrics=metrics,
    )


def _expectation_misses(trace: SimTrace, spec: ScenarioSpec,
                        config: OracleConfig) -> list[Violation]:
    """Expected-outcome checks, applied only to otherwise clean traces."""
    out = spec.expected_outcome
    misses: list[Violation] = []
    last = trace.frames[-1]
    ego_changes = [e for e in trace.events_of_kind(EVENT_LANE_CHANGE)
                   if e.subject == EGO_NAME]
    if out.lane_change_required and not ego_changes:
        misses.append(Violation(EXPECTED_MANOEUVRE_MISSING, SimEvent(
            EVENT_MANOEUVRE_MISSING, last.time, EGO_NAME, None, last.ego.speed)))
    if out.settle_time_gap is not None:
        lo, hi = out.settle_time_gap
        window_start = last.time - config.settle_window_s
        settled = True
        for frame in trace.frames:
            if frame.time < window_start - trace.dt / 2.0:
                continue
            headway = compute_headway(frame, trace.road.lane_width)
            if headway is None or not lo <= headway <= hi:
                settled = False
                break
        if not settled:
            misses.append(Violation(EXPECTED_MANOEUVRE_MISSING, SimEvent(
                EVENT_GAP_NOT_SETTLED, last.time, EGO_NAME, None,
                last.ego.speed, data=(lo, hi))))
    if out.reach_set_speed_tol is not None:
        target = spec.cruise_speed
        if abs(last.ego.speed - target) > out.reach_set_speed_tol:
            misses.append(Violation(EXPECTED_MANOEUVRE_MISSING, SimEvent(
                EVENT_SET_SPEED_MISSED, last.time, EGO_NAME, None,
                last.ego.speed, data=(last.ego.speed, target))))
    return misses


def _first_off_road_frame(trace: SimTrace) -> TraceFrame | None:
    bound = trace.road.drivable_width
    for frame in trace.frames:
        ego = frame.ego
        half = ego.width / 2.0
        if ego.lat - half < 0.0 or ego.lat + half > bound:
            return frame
    return None


def _matching_event(trace: SimTrace, kind: str, time: float) -> SimEvent | None:
    for event in trace.events:
        if event.kind == kind and abs(event.time - time) < 1e-9:
            return event
    return None


def _metrics(trace: SimTrace, ego_changes: list[SimEvent],
             lane_width: float) -> Metrics:
    min_ttc = None
    min_headway = None
    for frame in trace.frames:
        ttc = compute_ttc(frame, lane_width)
        if ttc is not None and (min_ttc is None or ttc < min_ttc):
            min_ttc = ttc
        headway = compute_headway(frame, lane_width)
        if headway is not None and (min_headway is None or headway < min_headway):
            min_headway = headway
    return Metrics(
        min_ttc=min_ttc,
        min_headway=min_headway,
        lane_change_times=tuple(e.time for e in ego_changes),
    )
