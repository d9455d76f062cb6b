"""Deterministic fixed-timestep kinematic simulation.

Scripted agents follow their phase scripts; the ego vehicle follows actions
from a controller handle (any object exposing ``tick(Observation) ->
ControlAction``).  The run produces a complete :class:`SimTrace` with
collision, off-road and lane-change events.

Integration is explicit Euler on positions (``s' = s + heading * speed * dt``)
with speeds updated afterwards, so a vehicle holding speed ``v`` travels
exactly ``v * (t_k - t_0)`` up to float accumulation.  Collision footprints
are axis-aligned ``length x width`` rectangles; two vehicles collide when the
closed footprint intervals overlap in both axes (touching counts).
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

from .errors import ControllerFault, SimloopError
from .protocol import (
    ControlAction,
    ObservedAgent,
    Observation,
    runtime_failure_status,
)
from .scenarios import (
    AgentScript,
    CutIn,
    Decelerate,
    EGO_NAME,
    Hold,
    MatchSpeed,
    MODE_CAEM,
    RoadSpec,
    ScenarioSpec,
    Static,
    VEHICLE_LENGTH,
    VEHICLE_WIDTH,
    EGO_START_S,
)

DEFAULT_DT = 0.05
MAX_DT = 0.2
LANE_CHANGE_DURATION_S = 2.0
ACCEL_LIMIT = 8.0

EVENT_COLLISION = "Collision"
EVENT_OFF_ROAD = "OffRoad"
EVENT_LANE_CHANGE = "LaneChangeCompleted"

TRACE_CSV_HEADER = "time,name,s,lat,speed,accel,lane"


@dataclass(frozen=True)
class VehicleState:
    """Pose and speed of one vehicle at one tick.

    ``s`` references the downstream edge (front bumper for heading +1); the
    footprint spans ``[s - length, s]`` longitudinally and is centred on
    ``lat`` laterally.  The lane index is always derived from ``lat``, never
    stored.
    """

    name: str
    s: float
    lat: float
    speed: float
    accel: float = 0.0
    heading: int = 1
    length: float = VEHICLE_LENGTH
    width: float = VEHICLE_WIDTH

    def lane_index(self, lane_width: float) -> int:
        return math.floor(self.lat / lane_width)

    @property
    def center_s(self) -> float:
        return self.s - self.length / 2.0


@dataclass(frozen=True)
class TraceFrame:
    time: float
    vehicles: tuple[VehicleState, ...]  # ego first, agents in scenario order

    @property
    def ego(self) -> VehicleState:
        return self.vehicles[0]

    def vehicle(self, name: str) -> VehicleState:
        for v in self.vehicles:
            if v.name == name:
                return v
        raise KeyError(name)


@dataclass(frozen=True)
class SimEvent:
    kind: str
    time: float
    subject: str
    object: str | None = None
    ego_speed_at_event: float = 0.0
    data: tuple[float, ...] = ()  # extra numbers for synthesized oracle events

    def to_json_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "time": self.time,
            "subject": self.subject,
            "object": self.object,
            "ego_speed_at_event": self.ego_speed_at_event,
        }
        if self.data:
            d["data"] = list(self.data)
        return d

    @staticmethod
    def from_json_dict(d: dict) -> "SimEvent":
        return SimEvent(
            kind=d["kind"],
            time=d["time"],
            subject=d["subject"],
            object=d.get("object"),
            ego_speed_at_event=d.get("ego_speed_at_event", 0.0),
            data=tuple(d.get("data", ())),
        )


@dataclass(frozen=True)
class SimTrace:
    scenario_id: str
    dt: float
    road: RoadSpec
    frames: tuple[TraceFrame, ...]
    events: tuple[SimEvent, ...]

    def events_of_kind(self, kind: str) -> tuple[SimEvent, ...]:
        return tuple(e for e in self.events if e.kind == kind)


# --------------------------------------------------------------------------
# Collision detection
# --------------------------------------------------------------------------

def _footprints_overlap(a: VehicleState, b: VehicleState) -> bool:
    return (abs(a.center_s - b.center_s) <= (a.length + b.length) / 2.0
            and abs(a.lat - b.lat) <= (a.width + b.width) / 2.0)


def detect_collision(frame: TraceFrame) -> list[tuple[str, str]]:
    """All colliding vehicle pairs in a frame, ego-involved pairs first."""
    pairs: list[tuple[str, str]] = []
    vehicles = frame.vehicles
    for i, a in enumerate(vehicles):
        for b in vehicles[i + 1:]:
            if _footprints_overlap(a, b):
                if b.name == EGO_NAME:
                    pairs.append((b.name, a.name))
                else:
                    pairs.append((a.name, b.name))
    pairs.sort(key=lambda p: (p[0] != EGO_NAME, p))
    return pairs


def _off_road(vehicle: VehicleState, road: RoadSpec) -> bool:
    half = vehicle.width / 2.0
    return vehicle.lat - half < 0.0 or vehicle.lat + half > road.drivable_width


# --------------------------------------------------------------------------
# Scripted agent stepping
# --------------------------------------------------------------------------

def _phase_starts(script: AgentScript) -> list[tuple[float, object]]:
    starts = []
    t = 0.0
    for phase in script.phases:
        starts.append((t, phase))
        if isinstance(phase, (Hold, CutIn)):
            t += phase.duration
    return starts


def _active_phase(script: AgentScript, time: float) -> tuple[float, object] | None:
    """(start_time, phase) active at ``time``; None once a timed script ran out."""
    active = None
    for start, phase in _phase_starts(script):
        if time >= start - 1e-9:
            active = (start, phase)
    if active is not None:
        start, phase = active
        if isinstance(phase, (Hold, CutIn)) and time >= start + phase.duration - 1e-9:
            if phase is script.phases[-1]:
                return None  # script exhausted: keep holding current speed
        return active
    return None


def _script_lat(script: AgentScript, road: RoadSpec, time: float) -> float:
    """Closed-form lateral position of a scripted agent at ``time``."""
    lat = road.lane_center(script.initial_lane)
    for start, phase in _phase_starts(script):
        if not isinstance(phase, CutIn):
            continue
        target = road.lane_center(phase.target_lane)
        if time <= start:
            break
        tau = min(time - start, phase.duration)
        lat = lat + (target - lat) * _ramp_fraction(tau, phase.duration)
        if time < start + phase.duration:
            break
    return lat


def _ramp_fraction(tau: float, duration: float) -> float:
    if tau >= duration:
        return 1.0
    return (1.0 - math.cos(math.pi * tau / duration)) / 2.0


def step_agent(state: VehicleState, script: AgentScript, time: float,
               ego: VehicleState, road: RoadSpec, dt: float) -> VehicleState:
    """Advance one scripted agent from ``time`` to ``time + dt``."""
    active = _active_phase(script, time)
    phase = active[1] if active is not None else None
    if isinstance(phase, Decelerate):
        new_speed = max(phase.floor_speed, state.speed - phase.rate * dt)
    elif isinstance(phase, MatchSpeed):
        new_speed = ego.speed
    elif isinstance(phase, Static):
        new_speed = 0.0
    else:  # Hold, mid cut-in, or exhausted script
        new_speed = state.speed
    new_s = state.s + state.heading * state.speed * dt
    new_lat = _script_lat(script, road, time + dt)
    return VehicleState(
        name=state.name,
        s=new_s,
        lat=new_lat,
        speed=new_speed,
        accel=(new_speed - state.speed) / dt,
        heading=state.heading,
        length=state.length,
        width=state.width,
    )


def _agent_lane_change_completions(script: AgentScript) -> list[float]:
    return [start + phase.duration
            for start, phase in _phase_starts(script)
            if isinstance(phase, CutIn)]


# --------------------------------------------------------------------------
# Ego lane-change plan
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LaneChangePlan:
    """Fixed-duration smooth lateral ramp between adjacent lane centres."""

    start_time: float
    start_lat: float
    target_lat: float
    duration: float = LANE_CHANGE_DURATION_S

    def lat_at(self, time: float) -> float:
        tau = min(max(time - self.start_time, 0.0), self.duration)
        if tau >= self.duration:
            return self.target_lat
        return self.start_lat + (self.target_lat - self.start_lat) * _ramp_fraction(
            tau, self.duration)

    def done(self, time: float) -> bool:
        return time >= self.start_time + self.duration - 1e-9


def apply_lane_change(ego: VehicleState, command: int, road: RoadSpec,
                      time: float = 0.0) -> LaneChangePlan:
    """Start a lane change one lane to the left (-1) or right (+1).

    A command toward a non-existent lane is executed physically (the ego
    departs the drivable area), which is exactly what the off-road check
    needs to observe.
    """
    if command not in (-1, 1):
        raise SimloopError(f"lane change command must be -1 or +1, got {command}")
    current = ego.lane_index(road.lane_width)
    target_lat = (current + command + 0.5) * road.lane_width
    return LaneChangePlan(start_time=time, start_lat=ego.lat, target_lat=target_lat)


# --------------------------------------------------------------------------
# Observation building
# --------------------------------------------------------------------------

def build_observation(time: float, frame_vehicles: tuple[VehicleState, ...],
                      road: RoadSpec, set_speed: float) -> Observation:
    ego = frame_vehicles[0]
    agents = []
    for v in frame_vehicles[1:]:
        agents.append(ObservedAgent(
            name=v.name,
            s_relative=v.s - ego.s,
            lat=v.lat,
            lane=v.lane_index(road.lane_width),
            speed=v.speed,
            heading=v.heading,
        ))
    agents.sort(key=lambda a: (abs(a.s_relative), a.name))
    return Observation(
        time=time,
        ego_s=ego.s,
        ego_lat=ego.lat,
        ego_speed=ego.speed,
        ego_lane=ego.lane_index(road.lane_width),
        lane_count=road.lane_count,
        lane_width=road.lane_width,
        set_speed=set_speed,
        agents=tuple(agents),
    )


# --------------------------------------------------------------------------
# Main loop
# --------------------------------------------------------------------------

def _initial_vehicles(spec: ScenarioSpec) -> tuple[VehicleState, ...]:
    road = spec.road
    ego = VehicleState(
        name=EGO_NAME,
        s=EGO_START_S,
        lat=road.lane_center(spec.ego_lane),
        speed=spec.ego_speed,
    )
    agents = tuple(
        VehicleState(
            name=a.name,
            s=EGO_START_S + a.initial_offset + VEHICLE_LENGTH,
            lat=road.lane_center(a.initial_lane),
            speed=a.initial_speed,
            heading=a.heading,
        )
        for a in spec.agents
    )
    return (ego,) + agents


def run_simulation(spec: ScenarioSpec, controller, dt: float = DEFAULT_DT) -> SimTrace:
    """Run one scenario to completion (or one tick past the first collision).

    ``controller`` is any handle with ``tick(Observation) -> ControlAction``;
    a raised :class:`ControllerFault` aborts the run and carries the
    classified failure.  The trace is a pure function of (spec, controller
    responses, dt).
    """
    if not 0.0 < dt <= MAX_DT:
        raise SimloopError(f"dt must be in (0, {MAX_DT}], got {dt}")
    road = spec.road
    set_speed = spec.cruise_speed
    vehicles = _initial_vehicles(spec)
    frames = [TraceFrame(0.0, vehicles)]
    events: list[SimEvent] = []
    seen_collisions: set[frozenset] = set()
    ego_off_road = False
    plan: LaneChangePlan | None = None
    agent_completions = {
        a.name: _agent_lane_change_completions(a) for a in spec.agents}

    def record_frame_events(frame: TraceFrame) -> bool:
        """Append this frame's events; returns True on a new collision."""
        new_collision = False
        for subject, obj in detect_collision(frame):
            key = frozenset((subject, obj))
            if key in seen_collisions:
                continue
            seen_collisions.add(key)
            events.append(SimEvent(
                EVENT_COLLISION, frame.time, subject, obj, frame.ego.speed))
            new_collision = True
        nonlocal ego_off_road
        if not ego_off_road and _off_road(frame.ego, road):
            ego_off_road = True
            events.append(SimEvent(
                EVENT_OFF_ROAD, frame.time, EGO_NAME, None, frame.ego.speed))
        for agent in spec.agents:
            pending = agent_completions[agent.name]
            while pending and frame.time >= pending[0] - 1e-9:
                pending.pop(0)
                events.append(SimEvent(
                    EVENT_LANE_CHANGE, frame.time, agent.name, None, frame.ego.speed))
        return new_collision

    collided = record_frame_events(frames[0])
    n_steps = math.ceil(spec.duration / dt)
    k = 0
    coasting = collided
    while k < n_steps or coasting:
        t_k = k * dt
        t_next = (k + 1) * dt
        ego = vehicles[0]

        if coasting:
            accel = 0.0
            lane_cmd = 0
        else:
            obs = build_observation(t_k, vehicles, road, set_speed)
            action = controller.tick(obs)
            if not isinstance(action, ControlAction):
                raise ControllerFault(runtime_failure_status(
                    spec.id, k,
                    f"controller returned {type(action).__name__}, not a ControlAction"))
            accel = 0.0 if spec.mode == MODE_CAEM else max(
                -ACCEL_LIMIT, min(ACCEL_LIMIT, action.accel))
            lane_cmd = action.lane_change

        if lane_cmd != 0 and plan is None:
            plan = apply_lane_change(ego, lane_cmd, road, time=t_k)

        new_s = ego.s + ego.speed * dt
        new_speed = max(0.0, ego.speed + accel * dt)
        if plan is not None:
            new_lat = plan.lat_at(t_next)
            completed = plan.done(t_next)
        else:
            new_lat = ego.lat
            completed = False
        new_ego = VehicleState(
            name=EGO_NAME, s=new_s, lat=new_lat, speed=new_speed,
            accel=(new_speed - ego.speed) / dt)

        new_agents = tuple(
            step_agent(state, script, t_k, ego, road, dt)
            for state, script in zip(vehicles[1:], spec.agents)
        )
        vehicles = (new_ego,) + new_agents
        frame = TraceFrame(t_next, vehicles)
        frames.append(frame)

        new_collision = record_frame_events(frame)
        if completed:
            plan = None
            events.append(SimEvent(
                EVENT_LANE_CHANGE, t_next, EGO_NAME, None, new_ego.speed))

        k += 1
        if coasting:
            break  # one inertial tick past the collision, then stop
        if new_collision:
            coasting = True

    return SimTrace(
        scenario_id=spec.id,
        dt=dt,
        road=road,
        frames=tuple(frames),
        events=tuple(events),
    )


# --------------------------------------------------------------------------
# Trace persistence: CSV frames + JSON-lines events
# --------------------------------------------------------------------------

def trace_to_csv(trace: SimTrace) -> str:
    """Tabular log: one row per vehicle per tick, stable documented columns."""
    out = io.StringIO()
    out.write(TRACE_CSV_HEADER + "\n")
    width = trace.road.lane_width
    for frame in trace.frames:
        for v in frame.vehicles:
            out.write(
                f"{frame.time!r},{v.name},{v.s!r},{v.lat!r},{v.speed!r},"
                f"{v.accel!r},{v.lane_index(width)}\n")
    return out.getvalue()


def events_to_jsonl(trace: SimTrace) -> str:
    return "".join(
        json.dumps(e.to_json_dict(), sort_keys=True) + "\n" for e in trace.events)


def load_trace(csv_text: str, events_text: str, spec: ScenarioSpec,
               dt: float | None = None) -> SimTrace:
    """Rebuild a SimTrace from exported artifacts.

    Float columns are written with ``repr`` so positions and speeds
    round-trip exactly; headings and footprints come from the scenario.
    """
    headings = {a.name: a.heading for a in spec.agents}
    headings[EGO_NAME] = 1
    lines = csv_text.splitlines()
    if not lines or lines[0] != TRACE_CSV_HEADER:
        raise SimloopError("trace CSV missing header row")
    by_time: dict[float, list[VehicleState]] = {}
    order: list[float] = []
    for idx, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 7:
            raise SimloopError(f"trace CSV row {idx}: expected 7 columns, got {len(parts)}")
        try:
            t = float(parts[0])
            state = VehicleState(
                name=parts[1], s=float(parts[2]), lat=float(parts[3]),
                speed=float(parts[4]), accel=float(parts[5]),
                heading=headings.get(parts[1], 1))
            int(parts[6])
        except ValueError as exc:
            raise SimloopError(f"trace CSV row {idx}: {exc}") from exc
        if t not in by_time:
            by_time[t] = []
            order.append(t)
        by_time[t].append(state)
    frames = tuple(TraceFrame(t, tuple(by_time[t])) for t in order)
    if not frames:
        raise SimloopError("trace CSV has no data rows")
    events = tuple(
        SimEvent.from_json_dict(json.loads(line))
        for line in events_text.splitlines() if line.strip())
    if dt is None:
        dt = frames[1].time - frames[0].time if len(frames) > 1 else DEFAULT_DT
    return SimTrace(
        scenario_id=spec.id, dt=dt, road=spec.road, frames=frames, events=events)
