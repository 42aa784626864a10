import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vocalrecruit.auditory import AuditoryPoint, hz_to_bark, perceive
from vocalrecruit.errors import InvalidInputError
from vocalrecruit.vocaltract import FormantTrajectory


def test_bark_reference_values():
    assert hz_to_bark(0.0) == 0.0
    assert hz_to_bark(650.0) == pytest.approx(7 * math.log(1 + math.sqrt(2)), abs=1e-12)
    assert hz_to_bark(650.0) == pytest.approx(6.1696152, abs=1e-6)
    assert hz_to_bark(1000.0) > hz_to_bark(650.0)


def test_bark_rejects_negative():
    with pytest.raises(InvalidInputError):
        hz_to_bark(-1.0)


@given(st.floats(0, 2e4), st.floats(1e-3, 1e3))
def test_bark_strictly_increasing(f, df):
    assert hz_to_bark(f + df) > hz_to_bark(f)


def test_bark_nearly_linear_at_low_frequency():
    f = np.linspace(1.0, 300.0, 300)
    linear = 7 * f / 650
    assert np.all(np.abs(hz_to_bark(f) - linear) / linear < 0.05)


def _traj(rows):
    rows = np.asarray(rows, dtype=float)
    return FormantTrajectory(np.arange(len(rows)) * 10.0, rows)


def test_perceive_endpoint():
    pt = perceive(_traj([[650, 650, 2500]] * 5))
    bark650 = 7 * math.log(1 + math.sqrt(2))
    assert pt.w1 == pytest.approx(3 * bark650, abs=1e-9)
    assert pt.w2 == pytest.approx(bark650, abs=1e-9)


def test_perceive_only_last_sample_matters():
    a = _traj([[400, 1200, 2500], [500, 1500, 2500]])
    b = _traj([[900, 2000, 3000], [500, 1500, 2500]])
    assert perceive(a) == perceive(b)


def test_perceive_degenerate_and_empty():
    assert perceive(_traj([[0, 0, 0]])) == AuditoryPoint(0.0, 0.0)
    with pytest.raises(InvalidInputError):
        perceive(_traj(np.zeros((0, 3))))


def test_point_hz_roundtrip():
    f1, f2 = AuditoryPoint.from_hz(300.0, 2300.0).to_hz()
    assert f1 == pytest.approx(300.0) and f2 == pytest.approx(2300.0)
