import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from vocalrecruit.errors import InvalidConfigError, InvalidInputError
from vocalrecruit.trajectory import (
    BasisConfig,
    PolicyParameters,
    acceleration_profile,
    endpoint_gains,
    integrate,
    kernel,
    normalized_basis,
)

CFG = BasisConfig()


def test_kernel_values():
    assert kernel(120.0, 120.0, 50.0) == 1.0
    assert kernel(170.0, 120.0, 50.0) == pytest.approx(0.367879, abs=1e-6)
    assert kernel(120.0 - 33.0, 120.0, 50.0) == kernel(120.0 + 33.0, 120.0, 50.0)
    with pytest.raises(InvalidConfigError):
        kernel(0.0, 0.0, 0.0)


def test_basis_config_validation():
    with pytest.raises(InvalidConfigError):
        BasisConfig(n_basis=0)
    with pytest.raises(InvalidConfigError):
        BasisConfig(dt=7.0)
    with pytest.raises(InvalidConfigError):
        BasisConfig(width=-1.0)
    assert CFG.n_steps == 50
    assert len(CFG.times) == 51
    np.testing.assert_allclose(np.diff(CFG.centers), 500.0 / 3)
    assert CFG.centers[0] == 0.0 and CFG.centers[-1] == 500.0


def test_single_basis_is_one():
    cfg = BasisConfig(n_basis=1)
    np.testing.assert_array_equal(normalized_basis(np.array([0.0, 321.0]), cfg), [[1.0], [1.0]])


def test_partition_of_unity():
    t = np.random.default_rng(0).uniform(0, 500, 1000)
    g = normalized_basis(t, CFG)
    assert np.all(np.abs(g.sum(axis=1) - 1.0) < 1e-12)
    assert np.all(g > 0) and np.all(g < 1)


def test_first_center_dominates():
    g = normalized_basis(0.0, CFG)
    assert np.argmax(g) == 0
    assert g[0] > np.max(g[1:])


def test_acceleration_profile():
    t = np.linspace(0, 500, 11)
    np.testing.assert_array_equal(acceleration_profile(np.zeros(4), t, CFG), 0.0)
    np.testing.assert_allclose(acceleration_profile(np.full(4, 2.5), t, CFG), 2.5, rtol=1e-14)
    # g_1 at t = duration evaluated straight from the kernel definition
    psi = [math.exp(-((500.0 - c) ** 2) / 50.0**2) for c in (0.0, 500 / 3, 1000 / 3, 500.0)]
    expected = psi[0] / sum(psi)
    got = acceleration_profile(np.array([1.0, 0, 0, 0]), 500.0, CFG)
    assert 0 < got and got == pytest.approx(expected, rel=1e-9)
    with pytest.raises(InvalidInputError):
        acceleration_profile(np.zeros(3), 0.0, CFG)


def test_zero_policy_stays_neutral():
    traj = integrate(PolicyParameters.zeros(), CFG)
    assert traj.positions.shape == (7, 51)
    np.testing.assert_array_equal(traj.positions, 0.0)
    np.testing.assert_array_equal(traj.velocities, 0.0)


def test_constant_acceleration_closed_form():
    theta = np.zeros((7, 4))
    theta[0] = 1.0
    traj = integrate(PolicyParameters(theta), CFG)
    # 1 unit/s^2 over 0.5 s
    assert traj.positions[0, -1] == pytest.approx(0.5 * 0.5**2, rel=1e-3)
    t_s = CFG.times / 1000.0
    np.testing.assert_allclose(traj.positions[0], 0.5 * t_s**2, rtol=1e-9, atol=1e-15)
    np.testing.assert_allclose(traj.accelerations[0], 1e-6, rtol=1e-14)
    assert traj.positions[0, 0] == 0.0 and traj.velocities[0, 0] == 0.0


def test_endpoint_matches_quadrature_oracle():
    theta_m = np.array([0.7, -1.3, 2.0, 0.4])
    # q(T) = int_0^T (T - s) a(s) ds with a in units/ms^2
    oracle, _ = quad(
        lambda s: (500.0 - s) * acceleration_profile(theta_m, s, CFG) * 1e-6,
        0.0, 500.0, limit=200,
    )
    theta = np.zeros((7, 4))
    theta[3] = theta_m
    q_end = integrate(PolicyParameters(theta), CFG).positions[3, -1]
    assert q_end == pytest.approx(oracle, rel=1e-2)
    assert endpoint_gains(CFG) @ theta_m == pytest.approx(q_end, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    st.floats(-3, 3), st.floats(-3, 3),
    st.lists(st.floats(-5, 5), min_size=28, max_size=28),
    st.lists(st.floats(-5, 5), min_size=28, max_size=28),
)
def test_linearity(alpha, beta, a, b):
    pa, pb = PolicyParameters.from_flat(a), PolicyParameters.from_flat(b)
    combo = PolicyParameters(alpha * pa.theta + beta * pb.theta)
    lhs = integrate(combo, CFG).positions
    rhs = alpha * integrate(pa, CFG).positions + beta * integrate(pb, CFG).positions
    scale = max(1e-12, np.max(np.abs(lhs)), np.max(np.abs(rhs)))
    assert np.max(np.abs(lhs - rhs)) / scale < 1e-9


def test_determinism():
    p = PolicyParameters.from_flat(np.random.default_rng(3).normal(size=28))
    a, b = integrate(p, CFG), integrate(p, CFG)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.accelerations, b.accelerations)


def test_grid_refinement():
    rng = np.random.default_rng(5)
    for _ in range(20):
        p = PolicyParameters.from_flat(rng.uniform(-1, 1, 28))
        coarse = integrate(p, CFG).end_positions
        fine = integrate(p, BasisConfig(dt=5.0)).end_positions
        scale = np.max(np.abs(coarse))
        assert np.max(np.abs(coarse - fine)) < 0.01 * scale


def test_policy_shape_validation():
    with pytest.raises(InvalidInputError):
        PolicyParameters(np.zeros((6, 4)))
    assert PolicyParameters.zeros().flat.shape == (28,)
