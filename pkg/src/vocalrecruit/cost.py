"""Three-term vocalization cost: goal distance, end posture, effort."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .auditory import AuditoryGoal, AuditoryPoint
from .errors import InvalidInputError

DISTANCE_WEIGHT = 1e4
ACCEL_WEIGHT = 1e-1
# assigned to rollouts whose synthesis failed
FAILURE_COST = 1e9


@dataclass(frozen=True)
class CostBreakdown:
    distance_term: float
    posture_term: float
    accel_term: float

    @property
    def total(self) -> float:
        return self.distance_term + self.posture_term + self.accel_term


def distance_term(goal_point, reached) -> np.ndarray:
    diff = np.asarray(goal_point, dtype=float) - np.asarray(reached, dtype=float)
    return DISTANCE_WEIGHT * np.sum(diff * diff, axis=-1)


def posture_term(end_positions) -> np.ndarray:
    return np.max(np.abs(np.asarray(end_positions, dtype=float)), axis=-1)


def accel_term(accelerations) -> np.ndarray:
    """Effort over steps 1..T; the sample at t=0 is excluded."""
    a = np.asarray(accelerations, dtype=float)[..., 1:]
    return ACCEL_WEIGHT * np.sum(a * a, axis=(-2, -1)) / 2.0


def evaluate(goal: AuditoryGoal, reached: AuditoryPoint, traj) -> CostBreakdown:
    if traj.positions.shape[0] != traj.accelerations.shape[0]:
        raise InvalidInputError("trajectory arrays disagree on articulator count")
    return CostBreakdown(
        float(distance_term(goal.point.as_array(), reached.as_array())),
        float(posture_term(traj.positions[:, -1])),
        float(accel_term(traj.accelerations)),
    )
