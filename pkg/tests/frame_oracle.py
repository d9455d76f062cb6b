"""Independent frame-scanning safety oracle.

Re-derives every violation from an exported trace CSV alone: collisions from
recomputed rectangle overlaps, off-road from footprint corners, lane changes
from runs of changing lateral positions, and the imminent-collision test from
recomputed headway/TTC.  Shares no code with simloop.oracle beyond the
scenario's road geometry and thresholds, so agreement between the two is a
meaningful check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

VEHICLE_LENGTH = 5.0
VEHICLE_WIDTH = 2.0
LANE_CHANGE_DURATION_S = 2.0
EGO = "Ego"


@dataclass(frozen=True)
class Row:
    time: float
    name: str
    s: float
    lat: float
    speed: float


def _parse_csv(csv_text: str) -> list[list[Row]]:
    lines = csv_text.splitlines()
    assert lines[0] == "time,name,s,lat,speed,accel,lane"
    frames: list[list[Row]] = []
    current_time = None
    for line in lines[1:]:
        if not line.strip():
            continue
        t, name, s, lat, speed, _accel, _lane = line.split(",")
        row = Row(float(t), name, float(s), float(lat), float(speed))
        if row.time != current_time:
            frames.append([])
            current_time = row.time
        frames[-1].append(row)
    return frames


def _headings(frames: list[list[Row]]) -> dict[str, int]:
    first: dict[str, float] = {}
    last: dict[str, float] = {}
    for frame in frames:
        for row in frame:
            first.setdefault(row.name, row.s)
            last[row.name] = row.s
    return {name: (-1 if last[name] - first[name] < -1e-9 else 1) for name in first}


def _overlap(a: Row, b: Row) -> bool:
    return (abs((a.s - VEHICLE_LENGTH / 2) - (b.s - VEHICLE_LENGTH / 2)) <= VEHICLE_LENGTH
            and abs(a.lat - b.lat) <= VEHICLE_WIDTH)


def _ego(frame: list[Row]) -> Row:
    for row in frame:
        if row.name == EGO:
            return row
    raise AssertionError("frame without ego row")


def _lead_metrics(frame: list[Row], lane_width: float,
                  headings: dict[str, int]) -> tuple[float | None, float | None]:
    """(headway, ttc) recomputed from one frame."""
    ego = _ego(frame)
    ego_lane = math.floor(ego.lat / lane_width)
    best = None
    for row in frame:
        if row.name == EGO or headings[row.name] != 1:
            continue
        if math.floor(row.lat / lane_width) != ego_lane:
            continue
        gap = (row.s - VEHICLE_LENGTH) - ego.s
        if gap <= 0:
            continue
        if best is None or gap < best[0]:
            best = (gap, row)
    if best is None:
        return None, None
    gap, lead = best
    headway = gap / ego.speed if ego.speed > 0 else None
    closing = ego.speed - lead.speed
    ttc = gap / closing if closing > 0 else None
    return headway, ttc


def _lane_changes(frames: list[list[Row]], lane_count: int,
                  lane_width: float) -> list[tuple[float, float]]:
    """Completed ego manoeuvres as (initiation_time, completion_time).

    A manoeuvre is a maximal run of frames with changing ego lat; any moving
    frame landing exactly on a lane centre completes one (the ramp snaps to
    the target centre, and intermediate ramp samples never coincide with a
    centre).
    """
    centers = [(i + 0.5) * lane_width for i in range(-3, lane_count + 3)]

    def at_center(lat: float) -> bool:
        return any(abs(lat - c) < 1e-9 for c in centers)

    lats = [_ego(frame).lat for frame in frames]
    times = [frame[0].time for frame in frames]
    changes = []
    run_start = None
    for i in range(1, len(lats)):
        if lats[i] == lats[i - 1]:
            continue
        if run_start is None:
            run_start = i - 1  # for back-to-back ramps this is the previous
            # manoeuvre's completion frame, which is when the new plan started
        if at_center(lats[i]):
            changes.append((times[run_start], times[i]))
            run_start = None
    return changes


def scan(csv_text: str, lane_count: int, lane_width: float,
         lane_change_required: bool, lane_change_forbidden: bool,
         imminent_ttc_s: float = 4.0, imminent_headway_s: float = 0.75,
         imminent_window_s: float = 3.0) -> set[tuple]:
    """Violation keys (requirement, event kind, time, object) from a CSV trace."""
    frames = _parse_csv(csv_text)
    headings = _headings(frames)
    dt = frames[1][0].time - frames[0][0].time if len(frames) > 1 else 0.05
    eps = dt / 2.0
    violations: set[tuple] = set()

    # SR1: first closed-footprint overlap per pair, ego-involved pairs only.
    seen_pairs = set()
    for frame in frames:
        for i, a in enumerate(frame):
            for b in frame[i + 1:]:
                if not _overlap(a, b):
                    continue
                key = frozenset((a.name, b.name))
                if key in seen_pairs:
                    continue
                seen_pairs.add(key)
                if EGO in key:
                    other = a.name if b.name == EGO else b.name
                    violations.add(("SR1", "Collision", round(frame[0].time, 6), other))

    # SR2: first frame where an ego footprint corner leaves the drivable area.
    bound = lane_count * lane_width
    for frame in frames:
        ego = _ego(frame)
        if ego.lat - VEHICLE_WIDTH / 2 < 0 or ego.lat + VEHICLE_WIDTH / 2 > bound:
            violations.add(("SR2", "OffRoad", round(frame[0].time, 6), None))
            break

    # SR3: completed manoeuvres without an imminent-collision justification.
    changes = _lane_changes(frames, lane_count, lane_width)
    for t_init, t_complete in changes:
        intended = False
        for frame in frames:
            t = frame[0].time
            if t < t_init - imminent_window_s - eps:
                continue
            if t > t_init + eps:
                break
            headway, ttc = _lead_metrics(frame, lane_width, headings)
            if ((ttc is not None and ttc < imminent_ttc_s)
                    or (headway is not None and headway < imminent_headway_s)):
                intended = True
                break
        if not intended or lane_change_forbidden:
            violations.add(("SR3", "LaneChangeCompleted", round(t_complete, 6), None))

    if lane_change_required and not changes and not violations:
        violations.add(("ExpectedManoeuvreMissing", "ExpectedManoeuvreMissing",
                        round(frames[-1][0].time, 6), None))
    return violations


def result_keys(result) -> set[tuple]:
    """The same key shape, derived from a simloop TestCaseResult."""
    return {
        (v.requirement, v.event.kind, round(v.event.time, 6), v.event.object)
        for v in result.violations
    }
