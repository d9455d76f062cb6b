"""Controller-facing data structures and the line-delimited JSON wire format.

One controller process (or in-process stub) serves exactly one scenario run.
Message flow, one JSON object per line:

    host -> child   {"type": "init", "scenario_id", "mode", "dt",
                     "road": {"lane_count", "lane_width"},
                     "ego": {"length", "width", "set_speed"}}
    child -> host   {"type": "ready"}
    host -> child   {"type": "observe", "time", "ego": {...}, "agents": [...]}
    child -> host   {"type": "act", "accel", "lane_change"}
    ...             (one observe/act exchange per tick)
    host -> child   {"type": "end"}

A failing child replies with a terminal error instead:

    child -> host   {"type": "error", "kind": "syntax" | "runtime",
                     "message": str, "tick": int | null}

The exact field lists are documented in docs/protocol.md.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

ACCEL_LIMIT = 8.0  # m/s^2, commanded accelerations are clamped to +/- this


@dataclass(frozen=True)
class ControlAction:
    """One tick's command: longitudinal acceleration plus lane-change request."""

    accel: float
    lane_change: int  # -1 one lane left, 0 keep lane, +1 one lane right


@dataclass(frozen=True)
class ObservedAgent:
    name: str
    s_relative: float  # agent front minus ego front, m; positive = ahead
    lat: float
    lane: int
    speed: float
    heading: int


@dataclass(frozen=True)
class Observation:
    """Snapshot handed to the controller each tick.

    Agents are sorted by absolute longitudinal distance, nearest first.
    All units are SI (m, s, m/s).
    """

    time: float
    ego_s: float
    ego_lat: float
    ego_speed: float
    ego_lane: int
    lane_count: int
    lane_width: float
    set_speed: float
    agents: tuple[ObservedAgent, ...]

    def payload(self) -> dict:
        """The dict form given to candidate code and sent on the wire."""
        return {
            "time": self.time,
            "ego": {
                "s": self.ego_s,
                "lat": self.ego_lat,
                "speed": self.ego_speed,
                "lane": self.ego_lane,
                "lane_count": self.lane_count,
                "lane_width": self.lane_width,
                "set_speed": self.set_speed,
            },
            "agents": [
                {
                    "name": a.name,
                    "s_relative": a.s_relative,
                    "lat": a.lat,
                    "lane": a.lane,
                    "speed": a.speed,
                    "heading": a.heading,
                }
                for a in self.agents
            ],
        }


STATUS_EXECUTABLE = "executable"
STATUS_NO_CODE = "no_code"
STATUS_SYNTAX_ERROR = "syntax_error"
STATUS_RUNTIME_FAILURE = "runtime_failure"
STATUS_TIMEOUT = "timeout"


@dataclass(frozen=True)
class ExecutabilityStatus:
    """Classification of one candidate on one test case.

    A candidate is non-executable (Ne) iff at least one of its test cases has
    a status other than ``executable``.
    """

    kind: str
    message: str = ""
    tc_id: str | None = None
    tick: int | None = None

    @property
    def executable(self) -> bool:
        return self.kind == STATUS_EXECUTABLE

    def __str__(self) -> str:
        parts = [self.kind.replace("_", " ")]
        if self.tc_id:
            parts.append(f"on {self.tc_id}")
        if self.tick is not None:
            parts.append(f"at tick {self.tick}")
        if self.message:
            parts.append(f"({self.message})")
        return " ".join(parts)

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "message": self.message,
                "tc_id": self.tc_id, "tick": self.tick}

    @staticmethod
    def from_json_dict(d: dict) -> "ExecutabilityStatus":
        return ExecutabilityStatus(
            kind=d["kind"], message=d.get("message", ""),
            tc_id=d.get("tc_id"), tick=d.get("tick"))


def executable_status(tc_id: str | None = None) -> ExecutabilityStatus:
    return ExecutabilityStatus(STATUS_EXECUTABLE, tc_id=tc_id)


def no_code_status() -> ExecutabilityStatus:
    return ExecutabilityStatus(STATUS_NO_CODE, message="no code extracted from the reply")


def syntax_error_status(message: str, tc_id: str | None = None) -> ExecutabilityStatus:
    return ExecutabilityStatus(STATUS_SYNTAX_ERROR, message=message, tc_id=tc_id)


def runtime_failure_status(tc_id: str | None, tick: int | None,
                           message: str) -> ExecutabilityStatus:
    return ExecutabilityStatus(STATUS_RUNTIME_FAILURE, message=message,
                               tc_id=tc_id, tick=tick)


def timeout_status(tc_id: str | None, tick: int | None,
                   message: str = "") -> ExecutabilityStatus:
    return ExecutabilityStatus(STATUS_TIMEOUT, message=message, tc_id=tc_id, tick=tick)


class MalformedAction(ValueError):
    """Raised when a controller reply cannot be interpreted as an action."""


def _numeric(value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedAction(f"expected a number, got {value!r}")
    return float(value)


def parse_action(value) -> ControlAction:
    """Validate and clamp a candidate's return value.

    Accepts a 2-sequence ``(accel, lane_change)`` or a mapping with those
    keys.  ``lane_change`` must equal -1, 0 or +1; ``accel`` is clamped to
    the physical command limit.
    """
    if isinstance(value, dict):
        try:
            accel, lane_change = value["accel"], value["lane_change"]
        except KeyError as exc:
            raise MalformedAction(f"action missing key {exc}") from exc
    elif isinstance(value, (tuple, list)) and len(value) == 2:
        accel, lane_change = value
    else:
        raise MalformedAction(f"expected (accel, lane_change), got {value!r}")
    accel = _numeric(accel)
    lane_change = _numeric(lane_change)
    if lane_change not in (-1.0, 0.0, 1.0):
        raise MalformedAction(f"lane_change must be -1, 0 or +1, got {lane_change}")
    accel = max(-ACCEL_LIMIT, min(ACCEL_LIMIT, accel))
    return ControlAction(accel=accel, lane_change=int(lane_change))


def encode_message(kind: str, **fields) -> str:
    """Serialize one wire message as a single line (no trailing newline)."""
    payload = {"type": kind}
    payload.update(fields)
    return json.dumps(payload, sort_keys=True)


def decode_message(line: str) -> dict:
    """Parse one wire line; raises MalformedAction on anything non-conforming."""
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedAction(f"invalid JSON: {exc}") from exc
    if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
        raise MalformedAction(f"not a protocol message: {line!r}")
    return msg


def init_message(scenario_id: str, mode: str, dt: float, lane_count: int,
                 lane_width: float, vehicle_length: float, vehicle_width: float,
                 set_speed: float) -> str:
    return encode_message(
        "init",
        scenario_id=scenario_id,
        mode=mode,
        dt=dt,
        road={"lane_count": lane_count, "lane_width": lane_width},
        ego={"length": vehicle_length, "width": vehicle_width, "set_speed": set_speed},
    )


def observe_message(obs: Observation) -> str:
    return encode_message("observe", **obs.payload())
