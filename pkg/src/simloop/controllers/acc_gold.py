"""Reference adaptive cruise controller.

Constant-time-gap follower with a set-speed governor: tracks the slower of
(a) the acceleration that regulates the gap to the lead vehicle toward
TIME_GAP_S seconds and (b) the acceleration that approaches the cruise set
speed.  Never commands a lane change.
"""

VEHICLE_LENGTH = 5.0
TIME_GAP_S = 1.5
GAP_GAIN = 0.45
SPEED_GAIN = 0.9
SET_SPEED_GAIN = 0.6
MAX_ACCEL = 2.0
MAX_BRAKE = -6.0


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


def controller(obs):
    ego = obs["ego"]
    speed = ego["speed"]
    accel = SET_SPEED_GAIN * (ego["set_speed"] - speed)
    lead = _lead(obs)
    if lead is not None:
        gap, agent = lead
        tracking = GAP_GAIN * (gap - TIME_GAP_S * speed) + SPEED_GAIN * (agent["speed"] - speed)
        accel = min(accel, tracking)
    accel = max(MAX_BRAKE, min(MAX_ACCEL, accel))
    return accel, 0
