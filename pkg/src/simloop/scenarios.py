"""Road/agent data model, the built-in test-case catalog, and the scenario file format.

Conventions used throughout the harness:

* Lane 0 is the leftmost lane.  Lateral positions are measured in metres from
  the left edge of the drivable area, increasing to the right; the centre of
  lane ``i`` is ``(i + 0.5) * lane_width``.
* Longitudinal positions ``s`` reference a vehicle's downstream edge (its
  front bumper for same-direction traffic); the footprint spans
  ``[s - length, s]``.
* An agent's ``initial_offset`` is the gap from the ego front bumper to the
  agent's rear edge at t = 0 (positive = agent starts ahead).
* Lane index -1 denotes the oncoming strip, when the road has one.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

from .errors import (
    ScenarioInfeasible,
    ScenarioSyntaxError,
    ScenarioValidationError,
    UnknownScenario,
)

# Geometry shared by every built-in scenario and by the simulator.
LANE_WIDTH = 3.5
ROAD_LENGTH = 2000.0
EGO_START_S = 50.0
VEHICLE_LENGTH = 5.0
VEHICLE_WIDTH = 2.0

# Cut-in construction: the over-taking agent holds speed, swings into the ego
# lane between CUT_IN_START_S and CUT_IN_START_S + CUT_IN_DURATION_S, then
# brakes to a standstill.  The initial offset is solved so the headway at the
# start of braking equals TARGET_HEADWAY_S.
CUT_IN_START_S = 4.0
CUT_IN_DURATION_S = 2.0
CUT_IN_END_S = CUT_IN_START_S + CUT_IN_DURATION_S
OVERTAKER_SPEED_FACTOR = 1.05
OVERTAKER_DECEL = 6.0
TARGET_HEADWAY_S = 0.4
SCENARIO_DURATION_S = 20.0

# The lane-0 blocker in TC4 sits this far ahead of where the ego front bumper
# will be when the over-taker starts braking, trapping a late left escape.
TC4_BLOCKER_LEAD_M = 40.0

MODE_ACC = "ACC"
MODE_CAEM = "CAEM"

EGO_NAME = "Ego"

ONCOMING_STRIP_LANE = -1


def kph(value: float) -> float:
    """Convert km/h to m/s."""
    return value / 3.6


# --------------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RoadSpec:
    """Straight multi-lane road; optionally an oncoming strip outside it."""

    lane_count: int
    lane_width: float
    length: float
    oncoming_strip: tuple[float, float] | None = None  # lateral band (lo, hi)

    @property
    def drivable_width(self) -> float:
        return self.lane_count * self.lane_width

    def lane_center(self, lane: int) -> float:
        if lane == ONCOMING_STRIP_LANE and self.oncoming_strip is not None:
            lo, hi = self.oncoming_strip
            return (lo + hi) / 2.0
        return (lane + 0.5) * self.lane_width


@dataclass(frozen=True)
class Hold:
    duration: float


@dataclass(frozen=True)
class CutIn:
    target_lane: int
    duration: float


@dataclass(frozen=True)
class Decelerate:
    rate: float
    floor_speed: float = 0.0


@dataclass(frozen=True)
class MatchSpeed:
    """Track the ego's speed tick for tick (TC5 blocker behaviour)."""


@dataclass(frozen=True)
class Static:
    """Parked vehicle; requires initial_speed = 0 and no other phases."""


Phase = Hold | CutIn | Decelerate | MatchSpeed | Static

# Phases without a duration run until the end of the scenario.
TERMINAL_PHASES = (Decelerate, MatchSpeed, Static)


@dataclass(frozen=True)
class AgentScript:
    """Scripted (non-controlled) vehicle: start pose plus an ordered phase list."""

    name: str
    initial_lane: int
    initial_offset: float
    initial_speed: float
    phases: tuple[Phase, ...]
    heading: int = 1  # +1 same direction as ego, -1 oncoming


@dataclass(frozen=True)
class ExpectedOutcome:
    """Per-scenario expectations checked on top of the safety requirements."""

    lane_change_required: bool = False
    lane_change_forbidden: bool = False
    # ACC-style functional expectations (None = not checked):
    settle_time_gap: tuple[float, float] | None = None
    reach_set_speed_tol: float | None = None


@dataclass(frozen=True)
class ScenarioSpec:
    """One complete test case: road, ego initialization, agents, expectations."""

    id: str
    description: str
    road: RoadSpec
    ego_lane: int
    ego_speed: float
    agents: tuple[AgentScript, ...]
    duration: float
    mode: str  # MODE_ACC | MODE_CAEM
    expected_outcome: ExpectedOutcome = field(default_factory=ExpectedOutcome)
    set_speed: float | None = None  # cruise target; defaults to ego_speed

    @property
    def cruise_speed(self) -> float:
        return self.ego_speed if self.set_speed is None else self.set_speed


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------

def validate_spec(spec: ScenarioSpec) -> ScenarioSpec:
    """Check every semantic invariant; raises ScenarioValidationError."""
    road = spec.road
    if road.lane_count < 1:
        raise ScenarioValidationError("road.lanes", "lane count must be >= 1")
    if road.lane_width <= 0:
        raise ScenarioValidationError("road.lane_width", "lane width must be > 0")
    if road.length <= 0:
        raise ScenarioValidationError("road.length", "road length must be > 0")
    if road.oncoming_strip is not None:
        lo, hi = road.oncoming_strip
        if lo >= hi:
            raise ScenarioValidationError("road.oncoming_strip", "band must be ordered (lo < hi)")
        if not (hi <= 0.0 or lo >= road.drivable_width):
            raise ScenarioValidationError(
                "road.oncoming_strip", "strip must lie strictly outside the drivable area")
    if not spec.id:
        raise ScenarioValidationError("id", "scenario id must be non-empty")
    if not spec.description.strip():
        raise ScenarioValidationError("description", "description must be non-empty")
    if "\n" in spec.description:
        raise ScenarioValidationError("description", "description must be a single line")
    if spec.mode not in (MODE_ACC, MODE_CAEM):
        raise ScenarioValidationError("mode", f"unknown mode {spec.mode!r}")
    if not 0 <= spec.ego_lane < road.lane_count:
        raise ScenarioValidationError(
            "ego_lane", f"lane {spec.ego_lane} outside 0..{road.lane_count - 1}")
    if spec.ego_speed < 0:
        raise ScenarioValidationError("ego.speed", "ego speed must be >= 0")
    if spec.duration <= 0:
        raise ScenarioValidationError("duration", "duration must be > 0")
    out = spec.expected_outcome
    if out.lane_change_required and out.lane_change_forbidden:
        raise ScenarioValidationError(
            "expect", "lane_change_required and lane_change_forbidden are exclusive")
    if out.settle_time_gap is not None and out.settle_time_gap[0] >= out.settle_time_gap[1]:
        raise ScenarioValidationError("settle_time_gap", "bounds must be ordered")
    names = set()
    for agent in spec.agents:
        where = f"agent.{agent.name}" if agent.name else "agent"
        if not agent.name or agent.name == EGO_NAME:
            raise ScenarioValidationError(where + ".name", "agent needs a unique non-ego name")
        if agent.name in names:
            raise ScenarioValidationError(where + ".name", "duplicate agent name")
        names.add(agent.name)
        if agent.heading not in (1, -1):
            raise ScenarioValidationError(where + ".heading", "heading must be +1 or -1")
        if agent.heading == -1:
            if road.oncoming_strip is None or agent.initial_lane != ONCOMING_STRIP_LANE:
                raise ScenarioValidationError(
                    where + ".lane", "oncoming agents must start in the oncoming strip (lane -1)")
        elif not 0 <= agent.initial_lane < road.lane_count:
            raise ScenarioValidationError(
                where + ".lane", f"lane {agent.initial_lane} outside 0..{road.lane_count - 1}")
        if agent.initial_speed < 0:
            raise ScenarioValidationError(where + ".speed", "speed must be >= 0")
        _validate_phases(agent, road, where)
    return spec


def _validate_phases(agent: AgentScript, road: RoadSpec, where: str) -> None:
    phases = agent.phases
    if not phases:
        raise ScenarioValidationError(where + ".phases", "at least one phase required")
    for i, phase in enumerate(phases):
        terminal = isinstance(phase, TERMINAL_PHASES)
        if terminal and i != len(phases) - 1:
            raise ScenarioValidationError(
                where + ".phases", f"{type(phase).__name__.lower()} must be the last phase")
        if isinstance(phase, (Hold, CutIn)) and phase.duration <= 0:
            raise ScenarioValidationError(where + ".phases", "phase duration must be > 0")
        if isinstance(phase, CutIn) and not 0 <= phase.target_lane < road.lane_count:
            raise ScenarioValidationError(where + ".phases", "cut_in target lane off the road")
        if isinstance(phase, Decelerate):
            if phase.rate <= 0:
                raise ScenarioValidationError(where + ".phases", "decelerate rate must be > 0")
            if phase.floor_speed < 0:
                raise ScenarioValidationError(where + ".phases", "floor speed must be >= 0")
    if isinstance(phases[-1], Static):
        if len(phases) != 1 or agent.initial_speed != 0.0:
            raise ScenarioValidationError(
                where + ".phases", "a static agent has speed 0 and exactly one phase")


# --------------------------------------------------------------------------
# Offset solver
# --------------------------------------------------------------------------

def solve_initial_offset(ego_speed: float, overtaker_speed: float,
                         cutin_end_time: float, target_headway: float,
                         vehicle_length: float = VEHICLE_LENGTH) -> float:
    """Initial rear-bumper-to-ego-front gap yielding the target headway.

    Both vehicles hold constant speed until ``cutin_end_time``; the returned
    offset makes the gap at that instant equal ``target_headway * ego_speed``.
    The offset is measured at the agent's rear edge, so the vehicle length
    does not enter the closed form; it only locates the agent's body for the
    feasibility check against the road start.
    """
    if ego_speed <= 0 or overtaker_speed < ego_speed:
        raise ScenarioInfeasible(
            f"need overtaker_speed >= ego_speed > 0, got {overtaker_speed} vs {ego_speed}")
    if cutin_end_time <= 0:
        raise ScenarioInfeasible("cut-in end time must be > 0")
    offset = target_headway * ego_speed - (overtaker_speed - ego_speed) * cutin_end_time
    if EGO_START_S + offset < 0:
        raise ScenarioInfeasible(
            f"offset {offset:.2f} m places the over-taker behind the road start")
    return offset


# --------------------------------------------------------------------------
# Built-in catalog
# --------------------------------------------------------------------------

CAEM_TEST_CASES = ("TC1", "TC2", "TC3", "TC4", "TC5", "TC6", "TC7")
ACC_TEST_CASES = ("ACC1", "ACC2", "ACC3")
ALL_TEST_CASES = CAEM_TEST_CASES + ACC_TEST_CASES

_THREE_LANES = RoadSpec(lane_count=3, lane_width=LANE_WIDTH, length=ROAD_LENGTH)
_TWO_LANES_ONCOMING = RoadSpec(
    lane_count=2, lane_width=LANE_WIDTH, length=ROAD_LENGTH,
    oncoming_strip=(-LANE_WIDTH, 0.0))


def _overtaker(ego_speed: float) -> AgentScript:
    ot_speed = ego_speed * OVERTAKER_SPEED_FACTOR
    offset = solve_initial_offset(ego_speed, ot_speed, CUT_IN_END_S, TARGET_HEADWAY_S)
    return AgentScript(
        name="OverTaker",
        initial_lane=0,
        initial_offset=offset,
        initial_speed=ot_speed,
        phases=(Hold(CUT_IN_START_S), CutIn(1, CUT_IN_DURATION_S),
                Decelerate(OVERTAKER_DECEL, 0.0)),
    )


def _cutin_scenario(tc_id: str, speed_kph: float) -> ScenarioSpec:
    speed = kph(speed_kph)
    return ScenarioSpec(
        id=tc_id,
        description=(
            f"Cut-in and hard deceleration at {speed_kph:.0f} km/h: the ego vehicle drives at a "
            f"constant {speed_kph:.0f} km/h in the second lane from the left of a three-lane "
            "highway. The OverTaker starts in the leftmost lane slightly faster than the ego, "
            "cuts in directly ahead with a headway of only 0.4 seconds, and immediately brakes "
            "to a standstill. The ego cannot brake and must change lanes to avoid a rear-end "
            "collision."),
        road=_THREE_LANES,
        ego_lane=1,
        ego_speed=speed,
        agents=(_overtaker(speed),),
        duration=SCENARIO_DURATION_S,
        mode=MODE_CAEM,
        expected_outcome=ExpectedOutcome(lane_change_required=True),
    )


def _blockage_scenario(tc_id: str) -> ScenarioSpec:
    speed = kph(108.0)
    overtaker = _overtaker(speed)
    if tc_id == "TC4":
        # Rear edge of the parked blocker sits TC4_BLOCKER_LEAD_M ahead of the
        # ego front-bumper position at deceleration onset.
        blocker_offset = speed * CUT_IN_END_S + TC4_BLOCKER_LEAD_M
        blocker = AgentScript(
            name="Blocker",
            initial_lane=0,
            initial_offset=blocker_offset,
            initial_speed=0.0,
            phases=(Static(),),
        )
        blocker_text = (
            "a parked vehicle blocks the left lane just where an evasive lane change to the "
            "left would carry the ego")
    else:
        # Starts behind in the left lane, pulls level, then paces the ego so
        # the left lane stays blocked for the whole run.
        blocker_speed_delta = 5.0
        blocker_offset = -(VEHICLE_LENGTH + blocker_speed_delta)
        align_time = (-blocker_offset - VEHICLE_LENGTH / 2.0 - 2.5) / blocker_speed_delta + 1.0
        blocker = AgentScript(
            name="Blocker",
            initial_lane=0,
            initial_offset=blocker_offset,
            initial_speed=speed + blocker_speed_delta,
            phases=(Hold(align_time), MatchSpeed()),
        )
        blocker_text = (
            "a second vehicle overtakes on the left, then matches the ego speed while exactly "
            "alongside, keeping the left lane blocked")
    return ScenarioSpec(
        id=tc_id,
        description=(
            "Cut-in and hard deceleration at 108 km/h with a lane blockage: the ego vehicle "
            "drives at a constant 108 km/h in the middle lane of a three-lane highway. The "
            "OverTaker cuts in directly ahead with a 0.4 second headway and brakes to a "
            f"standstill, while {blocker_text}. The ego cannot brake and must pick a safe "
            "escape lane."),
        road=_THREE_LANES,
        ego_lane=1,
        ego_speed=speed,
        agents=(overtaker, blocker),
        duration=SCENARIO_DURATION_S,
        mode=MODE_CAEM,
        expected_outcome=ExpectedOutcome(lane_change_required=True),
    )


def _empty_road_scenario() -> ScenarioSpec:
    return ScenarioSpec(
        id="TC6",
        description=(
            "Empty road: the ego vehicle drives at a constant 120 km/h in the middle lane of a "
            "three-lane highway with no other vehicle on the road. Any lane change here is "
            "unintended."),
        road=_THREE_LANES,
        ego_lane=1,
        ego_speed=kph(120.0),
        agents=(),
        duration=SCENARIO_DURATION_S,
        mode=MODE_CAEM,
        expected_outcome=ExpectedOutcome(lane_change_forbidden=True),
    )


def _oncoming_scenario() -> ScenarioSpec:
    return ScenarioSpec(
        id="TC7",
        description=(
            "Oncoming traffic: the ego vehicle drives at a constant 100 km/h in the leftmost "
            "lane of a two-lane highway while another vehicle passes in the opposite direction "
            "on the far side of the road boundary. No lane change is needed; any lane change "
            "here is unintended."),
        road=_TWO_LANES_ONCOMING,
        ego_lane=0,
        ego_speed=kph(100.0),
        agents=(
            AgentScript(
                name="Oncoming",
                initial_lane=ONCOMING_STRIP_LANE,
                initial_offset=500.0,
                initial_speed=20.0,
                phases=(Hold(SCENARIO_DURATION_S),),
                heading=-1,
            ),
        ),
        duration=SCENARIO_DURATION_S,
        mode=MODE_CAEM,
        expected_outcome=ExpectedOutcome(lane_change_forbidden=True),
    )


def _acc_scenario(tc_id: str) -> ScenarioSpec:
    if tc_id == "ACC1":
        return ScenarioSpec(
            id=tc_id,
            description=(
                "Slow lead vehicle: the ego vehicle cruises at 25 m/s set speed in the middle "
                "lane and approaches a lead vehicle holding a constant 20 m/s, 60 m ahead. The "
                "controller must close in and settle at a steady time gap between 1 and 3 "
                "seconds without colliding and without changing lanes."),
            road=_THREE_LANES,
            ego_lane=1,
            ego_speed=25.0,
            agents=(
                AgentScript("Lead", 1, 60.0, 20.0, (Hold(45.0),)),
            ),
            duration=40.0,
            mode=MODE_ACC,
            expected_outcome=ExpectedOutcome(
                lane_change_forbidden=True, settle_time_gap=(1.0, 3.0)),
        )
    if tc_id == "ACC2":
        return ScenarioSpec(
            id=tc_id,
            description=(
                "Braking lead vehicle: the ego vehicle follows a lead vehicle that cruises at "
                "22 m/s for 10 seconds and then brakes at 3 m/s^2 down to 5 m/s. The controller "
                "must slow down in time and avoid a collision without changing lanes."),
            road=_THREE_LANES,
            ego_lane=1,
            ego_speed=22.0,
            agents=(
                AgentScript("Lead", 1, 50.0, 22.0, (Hold(10.0), Decelerate(3.0, 5.0))),
            ),
            duration=30.0,
            mode=MODE_ACC,
            expected_outcome=ExpectedOutcome(lane_change_forbidden=True),
        )
    if tc_id == "ACC3":
        return ScenarioSpec(
            id=tc_id,
            description=(
                "Free road cruise: the ego vehicle starts at 20 m/s on an empty three-lane "
                "highway with a cruise set speed of 25 m/s. The controller must reach the set "
                "speed within 0.5 m/s and hold it, without ever changing lanes."),
            road=_THREE_LANES,
            ego_lane=1,
            ego_speed=20.0,
            agents=(),
            duration=30.0,
            mode=MODE_ACC,
            expected_outcome=ExpectedOutcome(
                lane_change_forbidden=True, reach_set_speed_tol=0.5),
            set_speed=25.0,
        )
    raise UnknownScenario(tc_id)


def build_test_case(tc_id: str) -> ScenarioSpec:
    """Return the fully populated built-in scenario for ``tc_id``."""
    if tc_id == "TC1":
        spec = _cutin_scenario(tc_id, 120.0)
    elif tc_id == "TC2":
        spec = _cutin_scenario(tc_id, 80.0)
    elif tc_id == "TC3":
        spec = _cutin_scenario(tc_id, 40.0)
    elif tc_id in ("TC4", "TC5"):
        spec = _blockage_scenario(tc_id)
    elif tc_id == "TC6":
        spec = _empty_road_scenario()
    elif tc_id == "TC7":
        spec = _oncoming_scenario()
    elif tc_id in ACC_TEST_CASES:
        spec = _acc_scenario(tc_id)
    else:
        raise UnknownScenario(f"unknown test case {tc_id!r}")
    return validate_spec(spec)


def catalog_for_mode(mode: str) -> tuple[str, ...]:
    return CAEM_TEST_CASES if mode == MODE_CAEM else ACC_TEST_CASES


def catalog_order(tc_ids) -> tuple[str, ...]:
    """Sort a set of test-case ids into catalog order; unknown ids raise."""
    order = {tc: i for i, tc in enumerate(ALL_TEST_CASES)}
    for tc in tc_ids:
        if tc not in order:
            raise UnknownScenario(f"unknown test case {tc!r}")
    return tuple(sorted(tc_ids, key=order.__getitem__))


# --------------------------------------------------------------------------
# Scenario file format
# --------------------------------------------------------------------------
#
# Line-oriented key/value grammar with nested blocks;
# see docs/scenario_format.md.  serialize_scenario() emits the canonical
# form and parse_scenario() accepts it back (round-trip identity).

def _format_number(value: float) -> str:
    return repr(float(value))


def serialize_scenario(spec: ScenarioSpec) -> str:
    """Emit the canonical scenario file text (bit-exact reproducible)."""
    out = io.StringIO()
    w = out.write
    w(f"scenario {spec.id}\n")
    w(f"description {spec.description}\n")
    w(f"mode {spec.mode}\n")
    w(f"duration {_format_number(spec.duration)}\n")
    if spec.set_speed is not None:
        w(f"set_speed {_format_number(spec.set_speed)}\n")
    expect = spec.expected_outcome
    if expect.lane_change_required:
        w("expect lane_change_required\n")
    elif expect.lane_change_forbidden:
        w("expect lane_change_forbidden\n")
    else:
        w("expect none\n")
    if expect.settle_time_gap is not None:
        lo, hi = expect.settle_time_gap
        w(f"settle_time_gap {_format_number(lo)} {_format_number(hi)}\n")
    if expect.reach_set_speed_tol is not None:
        w(f"reach_set_speed_tol {_format_number(expect.reach_set_speed_tol)}\n")
    w("\nroad\n")
    w(f"  lanes {spec.road.lane_count}\n")
    w(f"  lane_width {_format_number(spec.road.lane_width)}\n")
    w(f"  length {_format_number(spec.road.length)}\n")
    if spec.road.oncoming_strip is not None:
        lo, hi = spec.road.oncoming_strip
        w(f"  oncoming_strip {_format_number(lo)} {_format_number(hi)}\n")
    w("end\n")
    w("\nego\n")
    w(f"  lane {spec.ego_lane}\n")
    w(f"  speed {_format_number(spec.ego_speed)}\n")
    w("end\n")
    for agent in spec.agents:
        w(f"\nagent {agent.name}\n")
        w(f"  lane {agent.initial_lane}\n")
        w(f"  offset {_format_number(agent.initial_offset)}\n")
        w(f"  speed {_format_number(agent.initial_speed)}\n")
        w(f"  heading {agent.heading}\n")
        w("  phases\n")
        for phase in agent.phases:
            if isinstance(phase, Hold):
                w(f"    hold {_format_number(phase.duration)}\n")
            elif isinstance(phase, CutIn):
                w(f"    cut_in {phase.target_lane} {_format_number(phase.duration)}\n")
            elif isinstance(phase, Decelerate):
                w(f"    decelerate {_format_number(phase.rate)} {_format_number(phase.floor_speed)}\n")
            elif isinstance(phase, MatchSpeed):
                w("    match_speed\n")
            else:
                w("    static\n")
        w("  end\n")
        w("end\n")
    return out.getvalue()


class _Parser:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def error(self, message: str, column: int = 1):
        raise ScenarioSyntaxError(self.pos + 1, column, message)

    def next_tokens(self) -> list[str] | None:
        """Tokens of the next meaningful line, or None at end of input."""
        while self.pos < len(self.lines):
            raw = self.lines[self.pos]
            stripped = raw.split("#", 1)[0].strip()
            if stripped:
                return stripped.split()
            self.pos += 1
        return None

    def consume(self) -> None:
        self.pos += 1

    def number(self, token: str, what: str) -> float:
        try:
            return float(token)
        except ValueError:
            self.error(f"expected a number for {what}, got {token!r}")

    def integer(self, token: str, what: str) -> int:
        try:
            return int(token)
        except ValueError:
            self.error(f"expected an integer for {what}, got {token!r}")


def _parse_block(p: _Parser, name: str, keys: dict[str, int]) -> dict[str, list[str]]:
    """Parse a `name ... end` block of `key args...` lines; arity per key."""
    seen: dict[str, list[str]] = {}
    p.consume()  # the block header line
    while True:
        tokens = p.next_tokens()
        if tokens is None:
            p.error(f"unterminated {name} block (missing 'end')")
        if tokens[0] == "end":
            p.consume()
            return seen
        key, args = tokens[0], tokens[1:]
        if key not in keys:
            p.error(f"unknown {name} key {key!r}")
        if key in seen:
            p.error(f"duplicate {name} key {key!r}")
        if len(args) != keys[key]:
            p.error(f"{name} key {key!r} takes {keys[key]} value(s), got {len(args)}")
        seen[key] = args
        p.consume()


def _parse_phases(p: _Parser) -> tuple[Phase, ...]:
    phases: list[Phase] = []
    p.consume()  # the `phases` line
    while True:
        tokens = p.next_tokens()
        if tokens is None:
            p.error("unterminated phases block (missing 'end')")
        kind, args = tokens[0], tokens[1:]
        if kind == "end":
            p.consume()
            return tuple(phases)
        if kind == "hold" and len(args) == 1:
            phases.append(Hold(p.number(args[0], "hold duration")))
        elif kind == "cut_in" and len(args) == 2:
            phases.append(CutIn(p.integer(args[0], "cut_in lane"),
                                p.number(args[1], "cut_in duration")))
        elif kind == "decelerate" and len(args) == 2:
            phases.append(Decelerate(p.number(args[0], "decelerate rate"),
                                     p.number(args[1], "decelerate floor")))
        elif kind == "match_speed" and not args:
            phases.append(MatchSpeed())
        elif kind == "static" and not args:
            phases.append(Static())
        else:
            p.error(f"unknown or malformed phase {' '.join(tokens)!r}")
        p.consume()


def parse_scenario(text: str) -> ScenarioSpec:
    """Parse scenario file text; raises ScenarioSyntaxError / ScenarioValidationError."""
    p = _Parser(text)
    header: dict[str, object] = {}
    road: RoadSpec | None = None
    ego: dict[str, list[str]] | None = None
    agents: list[AgentScript] = []

    first = p.next_tokens()
    if first is None:
        p.error("empty scenario file")

    while True:
        tokens = p.next_tokens()
        if tokens is None:
            break
        key = tokens[0]
        if key == "scenario":
            if len(tokens) != 2:
                p.error("scenario takes exactly one id")
            header["id"] = tokens[1]
            p.consume()
        elif key == "description":
            raw = p.lines[p.pos].split("#", 1)[0].strip()
            header["description"] = raw[len("description"):].strip()
            p.consume()
        elif key == "mode":
            if len(tokens) != 2:
                p.error("mode takes exactly one value")
            header["mode"] = tokens[1]
            p.consume()
        elif key == "duration":
            if len(tokens) != 2:
                p.error("duration takes exactly one value")
            header["duration"] = p.number(tokens[1], "duration")
            p.consume()
        elif key == "set_speed":
            if len(tokens) != 2:
                p.error("set_speed takes exactly one value")
            header["set_speed"] = p.number(tokens[1], "set_speed")
            p.consume()
        elif key == "expect":
            if len(tokens) != 2 or tokens[1] not in (
                    "lane_change_required", "lane_change_forbidden", "none"):
                p.error("expect takes one of lane_change_required|lane_change_forbidden|none")
            header["expect"] = tokens[1]
            p.consume()
        elif key == "settle_time_gap":
            if len(tokens) != 3:
                p.error("settle_time_gap takes two values")
            header["settle_time_gap"] = (p.number(tokens[1], "settle lo"),
                                         p.number(tokens[2], "settle hi"))
            p.consume()
        elif key == "reach_set_speed_tol":
            if len(tokens) != 2:
                p.error("reach_set_speed_tol takes one value")
            header["reach_set_speed_tol"] = p.number(tokens[1], "tolerance")
            p.consume()
        elif key == "road":
            if road is not None:
                p.error("duplicate road block")
            block = _parse_block(p, "road", {
                "lanes": 1, "lane_width": 1, "length": 1, "oncoming_strip": 2})
            for required in ("lanes", "lane_width", "length"):
                if required not in block:
                    p.error(f"road block missing {required!r}")
            strip = None
            if "oncoming_strip" in block:
                strip = (p.number(block["oncoming_strip"][0], "strip lo"),
                         p.number(block["oncoming_strip"][1], "strip hi"))
            road = RoadSpec(
                lane_count=p.integer(block["lanes"][0], "lanes"),
                lane_width=p.number(block["lane_width"][0], "lane_width"),
                length=p.number(block["length"][0], "length"),
                oncoming_strip=strip,
            )
        elif key == "ego":
            if ego is not None:
                p.error("duplicate ego block")
            ego = _parse_block(p, "ego", {"lane": 1, "speed": 1})
            for required in ("lane", "speed"):
                if required not in ego:
                    p.error(f"ego block missing {required!r}")
        elif key == "agent":
            if len(tokens) != 2:
                p.error("agent takes exactly one name")
            name = tokens[1]
            agents.append(_parse_agent(p, name))
        else:
            p.error(f"unknown directive {key!r}")

    for required in ("id", "description", "mode", "duration"):
        if required not in header:
            raise ScenarioSyntaxError(len(p.lines) or 1, 1, f"missing {required!r} directive")
    if road is None:
        raise ScenarioSyntaxError(len(p.lines) or 1, 1, "missing road block")
    if ego is None:
        raise ScenarioSyntaxError(len(p.lines) or 1, 1, "missing ego block")

    expect = header.get("expect", "none")
    outcome = ExpectedOutcome(
        lane_change_required=expect == "lane_change_required",
        lane_change_forbidden=expect == "lane_change_forbidden",
        settle_time_gap=header.get("settle_time_gap"),
        reach_set_speed_tol=header.get("reach_set_speed_tol"),
    )
    spec = ScenarioSpec(
        id=header["id"],
        description=header["description"],
        road=road,
        ego_lane=int(float(ego["lane"][0])),
        ego_speed=float(ego["speed"][0]),
        agents=tuple(agents),
        duration=header["duration"],
        mode=header["mode"],
        expected_outcome=outcome,
        set_speed=header.get("set_speed"),
    )
    return validate_spec(spec)


def _parse_agent(p: _Parser, name: str) -> AgentScript:
    p.consume()  # agent header
    fields: dict[str, list[str]] = {}
    phases: tuple[Phase, ...] | None = None
    while True:
        tokens = p.next_tokens()
        if tokens is None:
            p.error("unterminated agent block (missing 'end')")
        key = tokens[0]
        if key == "end":
            p.consume()
            break
        if key == "phases":
            if phases is not None:
                p.error("duplicate phases block")
            phases = _parse_phases(p)
            continue
        if key not in ("lane", "offset", "speed", "heading"):
            p.error(f"unknown agent key {key!r}")
        if key in fields:
            p.error(f"duplicate agent key {key!r}")
        if len(tokens) != 2:
            p.error(f"agent key {key!r} takes one value")
        fields[key] = tokens[1:]
        p.consume()
    for required in ("lane", "offset", "speed"):
        if required not in fields:
            p.error(f"agent block missing {required!r}")
    if phases is None:
        p.error("agent block missing phases")
    return AgentScript(
        name=name,
        initial_lane=p.integer(fields["lane"][0], "agent lane"),
        initial_offset=p.number(fields["offset"][0], "agent offset"),
        initial_speed=p.number(fields["speed"][0], "agent speed"),
        phases=phases,
        heading=p.integer(fields.get("heading", ["1"])[0], "agent heading"),
    )


def with_duration(spec: ScenarioSpec, duration: float) -> ScenarioSpec:
    """Copy of a scenario with a different duration (handy for short probes)."""
    return validate_spec(replace(spec, duration=duration))
