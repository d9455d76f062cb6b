"""Over-eager controller: one unprompted lane change to the left at t = 1 s."""

TRIGGER_TIME_S = 1.0

_done = False


def controller(obs):
    global _done
    if not _done and obs["time"] >= TRIGGER_TIME_S:
        _done = True
        return 0.0, -1
    return 0.0, 0
