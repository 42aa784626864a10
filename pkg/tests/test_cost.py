import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vocalrecruit.auditory import AuditoryGoal, AuditoryPoint
from vocalrecruit.cost import CostBreakdown, distance_term, evaluate
from vocalrecruit.trajectory import ArticulatoryTrajectory

GOAL = AuditoryGoal("g", AuditoryPoint(12.0, 10.0))


def _traj(end=0.0, accel=0.0, articulator=0):
    t = np.arange(51) * 10.0
    pos = np.zeros((7, 51))
    acc = np.zeros((7, 51))
    pos[articulator, -1] = end
    acc[articulator, :] = accel
    return ArticulatoryTrajectory(t, pos, np.zeros((7, 51)), acc)


def test_exact_match_costs_nothing():
    c = evaluate(GOAL, GOAL.point, _traj())
    assert c.total == 0.0


def test_small_offset():
    c = evaluate(GOAL, AuditoryPoint(12.01, 10.0), _traj())
    assert c.distance_term == pytest.approx(1.0, rel=1e-12)
    assert c.total == pytest.approx(1.0, rel=1e-12)


def test_posture_and_effort():
    c = evaluate(GOAL, GOAL.point, _traj(end=0.2, accel=0.001))
    assert c.posture_term == 0.2
    assert c.accel_term == pytest.approx(0.1 * 50 * 0.001**2 / 2, rel=1e-12)
    assert c.total == pytest.approx(0.2 + 2.5e-6, rel=1e-12)


def test_distance_dominates_worst_posture():
    # a 0.1 Bark miss against the largest clamped end position
    miss = distance_term([0.0, 0.0], [0.1, 0.0])
    assert miss >= 1e4 * 0.01 == 100.0
    assert miss / 2.5 >= 40


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_distance_is_quadratic(dx, dy):
    one = distance_term([0.0, 0.0], [dx, dy])
    two = distance_term([0.0, 0.0], [2 * dx, 2 * dy])
    assert two == pytest.approx(4 * one, rel=1e-12, abs=1e-300)


@given(st.floats(0, 30), st.floats(0, 30), st.floats(-3, 3), st.floats(-1e-3, 1e-3))
def test_terms_nonnegative(w1, w2, end, accel):
    c = evaluate(GOAL, AuditoryPoint(w1, w2), _traj(end=end, accel=accel))
    assert c.distance_term >= 0 and c.posture_term >= 0 and c.accel_term >= 0
    assert isinstance(c, CostBreakdown)
    assert c.total == c.distance_term + c.posture_term + c.accel_term
