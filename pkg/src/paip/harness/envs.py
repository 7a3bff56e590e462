"""Builtin environments."""
from __future__ import annotations

import numpy as np

from ..loop import EnvironmentSpec

LEFT, RIGHT = 0, 1


def flip2(noise: float = 0.1) -> EnvironmentSpec:
    """Two states; action 0 stays, action 1 flips; sensor reports the state with noise."""
    stay = np.eye(2)
    sensor = np.array([[1 - noise, noise], [noise, 1 - noise]])
    return EnvironmentSpec([0.5, 0.5], np.stack([stay, stay[::-1]]), sensor)


def chain4() -> EnvironmentSpec:
    """Four cells in a row starting at the left end; left/right moves, walls at both ends;
    the sensor reports the cell."""
    n = 4
    trans = np.zeros((2, n, n))
    for e in range(n):
        trans[LEFT, e, max(e - 1, 0)] = 1.0
        trans[RIGHT, e, min(e + 1, n - 1)] = 1.0
    return EnvironmentSpec(np.eye(n)[0], trans, np.eye(n))


# tmaze-6: position in {centre, cue, arm} times hidden context in {L, R}.
# State index = 2 * position + context.  Actions: 0 go to centre, 1 go to cue,
# 2 go to the arm.  Sensors: 0 at centre, 1/2 show the context at the cue,
# 3 at the arm when the context is L (reward side) and 4 otherwise.
TMAZE_ACTIONS = ("centre", "cue", "arm")


def tmaze6() -> EnvironmentSpec:
    n_pos, n_ctx = 3, 2
    n = n_pos * n_ctx
    trans = np.zeros((3, n, n))
    for a in range(3):
        for pos in range(n_pos):
            for ctx in range(n_ctx):
                trans[a, 2 * pos + ctx, 2 * a + ctx] = 1.0
    sensor = np.zeros((n, 5))
    sensor[0, 0] = sensor[1, 0] = 1.0
    sensor[2, 1] = sensor[3, 2] = 1.0
    sensor[4, 3] = sensor[5, 4] = 1.0
    initial = np.array([0.5, 0.5, 0, 0, 0, 0])
    return EnvironmentSpec(initial, trans, sensor)


BUILTINS = {"flip-2": flip2, "chain-4": chain4, "tmaze-6": tmaze6}


def builtin(name: str) -> EnvironmentSpec:
    return BUILTINS[name]()
