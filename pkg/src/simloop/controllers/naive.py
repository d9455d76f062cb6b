"""Do-nothing controller: holds speed and lane no matter what."""


def controller(obs):
    return 0.0, 0
