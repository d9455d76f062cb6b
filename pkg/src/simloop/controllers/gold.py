"""Reference evasive-manoeuvre controller.

Keeps the lane until a forward collision in the ego lane is imminent, then
moves one lane left if that lane is safe, otherwise one lane right.  Written
against the documented observation contract only; usable directly as a
candidate source.
"""

VEHICLE_LENGTH = 5.0
TRIGGER_HEADWAY_S = 0.6
TRIGGER_TTC_S = 3.5
OCCUPANCY_MARGIN_M = 10.0
SWEEP_HORIZON_S = 5.0


def _lead(obs):
    ego = obs["ego"]
    best = None
    for agent in obs["agents"]:
        if agent["heading"] != 1 or agent["lane"] != ego["lane"]:
            continue
        gap = agent["s_relative"] - VEHICLE_LENGTH
        if gap <= 0.0:
            continue
        if best is None or gap < best[0]:
            best = (gap, agent)
    return best


def _lane_blocked(obs, lane):
    ego = obs["ego"]
    for agent in obs["agents"]:
        if agent["heading"] != 1 or agent["lane"] != lane:
            continue
        rel = agent["s_relative"]
        if abs(rel) <= VEHICLE_LENGTH + OCCUPANCY_MARGIN_M:
            return True
        closing = ego["speed"] - agent["speed"]
        if rel > 0.0 and closing > 0.0:
            if (rel - VEHICLE_LENGTH) / closing < SWEEP_HORIZON_S:
                return True
    return False


def controller(obs):
    ego = obs["ego"]
    lead = _lead(obs)
    if lead is None:
        return 0.0, 0
    gap, agent = lead
    speed = ego["speed"]
    headway = gap / speed if speed > 0.0 else None
    closing = speed - agent["speed"]
    ttc = gap / closing if closing > 0.0 else None
    imminent = ((headway is not None and headway < TRIGGER_HEADWAY_S)
                or (ttc is not None and ttc < TRIGGER_TTC_S))
    if not imminent:
        return 0.0, 0
    lane = ego["lane"]
    if lane - 1 >= 0 and not _lane_blocked(obs, lane - 1):
        return 0.0, -1
    if lane + 1 < ego["lane_count"] and not _lane_blocked(obs, lane + 1):
        return 0.0, 1
    return 0.0, 0
