from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import Vec2, wrap_angle

CLOCKWISE = 1
COUNTER_CLOCKWISE = -1


@dataclass
class RobotState:
    """Pose of one constant-speed unicycle.

    ``direction`` selects the orbit sense of the guiding field the robot
    tracks (+1 clockwise, -1 counter-clockwise) and ``omega`` is the last
    applied turn rate, which neighbours read as the robot's current input.
    """

    id: int
    p: Vec2
    theta: float
    s: float
    active: bool = True
    swarm: int = 0
    direction: int = CLOCKWISE
    omega: float = 0.0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).reshape(2)
        self.theta = wrap_angle(self.theta)
        if not self.s > 0:
            raise ValueError(f"robot {self.id}: speed must be positive, got {self.s}")
        if self.direction not in (CLOCKWISE, COUNTER_CLOCKWISE):
            raise ValueError(f"robot {self.id}: direction must be +1 or -1")

    @property
    def velocity(self) -> Vec2:
        return self.s * np.array([math.cos(self.theta), math.sin(self.theta)])

    def moved(self, **changes) -> "RobotState":
        return replace(self, **changes)
