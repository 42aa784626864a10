import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vocalrecruit.analysis import (
    RecruitmentRecord,
    fd_partial,
    grid_axis,
    influence_ratio,
    rank_frequencies,
    recruitment_order,
    sensitivity_grid,
    smooth,
    static_cost,
)
from vocalrecruit.auditory import AuditoryGoal, AuditoryPoint
from vocalrecruit.errors import EmptyAggregateError, InvalidConfigError, InvalidInputError, SynthesisError
from vocalrecruit.vocaltract import SurrogateSynthesizer

U_GOAL = AuditoryGoal("u", AuditoryPoint.from_hz(300.0, 800.0))


def phased_trace(phases, n=50, low=0.05, high=1.0):
    """Exploration magnitudes where ``phases`` maps articulator -> (start, stop, share).

    Outside every phase the total stays at ``low``; inside a phase the
    total is ``high`` and the named articulator takes ``share`` of it.
    """
    lam = np.full((n, 7), low / 7)
    for m, (start, stop, share) in phases.items():
        for u in range(start - 1, stop):
            rest = (1 - share) / 6
            lam[u] = high * rest
            lam[u, m - 1] = high * share
    return lam


def test_smooth_examples():
    x = np.full(20, 3.5)
    np.testing.assert_allclose(smooth(x), x)
    imp = np.zeros(30)
    imp[10] = 1.0
    s = smooth(imp, 4)
    np.testing.assert_allclose(s[6:15], 1 / 9)
    assert np.all(s[:6] == 0) and np.all(s[15:] == 0)
    np.testing.assert_array_equal(smooth(imp, 0), imp)
    with pytest.raises(InvalidConfigError):
        smooth(imp, -1)


def test_smooth_truncated_edges():
    x = np.arange(10.0)
    s = smooth(x, 4)
    assert s[0] == pytest.approx(np.mean(x[:5]))
    assert s[-1] == pytest.approx(np.mean(x[-5:]))
    cols = smooth(np.column_stack([x, 2 * x]), 4)
    np.testing.assert_allclose(cols[:, 1], 2 * s)


def test_constructed_order():
    lam = phased_trace({1: (5, 15, 0.9), 5: (20, 30, 0.8)})
    rec = recruitment_order(lam)
    assert rec.qualifying
    assert rec.order == [1, 5]
    assert rec.peak_values[0] > rec.peak_values[1] > 0.3
    assert rec.first_update[0] < rec.first_update[1]


def test_constructed_order_three_phases():
    lam = phased_trace({3: (4, 12, 0.85), 1: (16, 24, 0.9), 7: (30, 40, 0.75)})
    assert recruitment_order(lam).order == [3, 1, 7]


def test_flat_trace():
    lam = np.full((50, 7), 0.1)
    rec = recruitment_order(lam)
    assert rec.order == [] and not rec.qualifying
    lam[20:30] *= 3.0
    rec = recruitment_order(lam)
    assert rec.qualifying and rec.order == []


def test_below_threshold_not_qualifying():
    lam = np.full((50, 7), 0.1)
    lam[20:30, 0] = 0.1 * 1.3  # normalized total never rises 5 points above start
    lam /= lam.sum(axis=1).max()
    rec = recruitment_order(lam)
    assert not rec.qualifying and rec.order == []


def test_scale_invariance():
    lam = phased_trace({2: (8, 18, 0.8), 6: (25, 35, 0.7)})
    a = recruitment_order(lam)
    b = recruitment_order(lam * 1234.5)
    assert a.order == b.order == [2, 6]
    np.testing.assert_allclose(a.peak_values, b.peak_values)


def test_recruitment_accepts_trace_objects():
    class T:
        lambda_array = phased_trace({4: (5, 15, 0.9)})
    assert recruitment_order(T()).order == [4]
    with pytest.raises(InvalidInputError):
        recruitment_order(np.ones((1, 7)))


def test_record_validation():
    with pytest.raises(InvalidInputError):
        RecruitmentRecord(goal=None, order=[1, 1])
    with pytest.raises(InvalidInputError):
        RecruitmentRecord(goal=None, order=[8])


def rec(order, qualifying=True):
    return RecruitmentRecord(goal=None, order=list(order), qualifying=qualifying)


def test_rank_frequencies_examples():
    table, counts = rank_frequencies([rec([1, 5])] * 4)
    expected = np.zeros((7, 7))
    expected[0, 0] = expected[4, 1] = 1.0
    np.testing.assert_array_equal(table, expected)
    table, _ = rank_frequencies([rec([1, 2])] * 3 + [rec([3])] * 3)
    assert table[0, 0] == 0.5 and table[2, 0] == 0.5
    table, counts = rank_frequencies([rec([1])])
    assert table[0, 0] == 1.0 and counts["qualifying"] == 1


def test_rank_frequencies_counts_and_errors():
    recs = [rec([1, 2]), rec([]), rec([], qualifying=False),
            RecruitmentRecord(goal=None, failed=True, error="boom")]
    table, counts = rank_frequencies(recs)
    assert counts == {"total": 4, "qualifying": 2, "empty_order": 1, "not_qualifying": 1, "failed": 1}
    assert table[0, 0] == 0.5
    with pytest.raises(EmptyAggregateError):
        rank_frequencies([rec([], qualifying=False)])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.permutations(range(1, 8)).map(lambda p: p[: len(p) // 2 + 1]), min_size=1, max_size=20))
def test_rank_columns_sum_at_most_one(orders):
    table, _ = rank_frequencies([rec(o) for o in orders])
    sums = table.sum(axis=0)
    assert np.all(sums <= 1 + 1e-12)
    full = min(len(o) for o in orders)
    np.testing.assert_allclose(sums[:full], 1.0)


def test_fd_partial_examples():
    for dp in (1e-1, 1e-3, 0.5):
        assert fd_partial(lambda p: 3 * p + 1, 2.7, dp) == pytest.approx(3.0, abs=1e-9)
    assert fd_partial(lambda p: p * p, 1.0, 1e-3) == pytest.approx(2.0, abs=1e-6)
    assert fd_partial(lambda p: 4.2, 0.3) == 0.0
    with pytest.raises(InvalidConfigError):
        fd_partial(lambda p: p, 0.0, 0.0)


def test_fd_partial_second_order():
    errors = [abs(fd_partial(math.sin, 0.7, h) - math.cos(0.7)) for h in (0.1, 0.05, 0.025, 0.0125)]
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    np.testing.assert_allclose(ratios, 4.0, rtol=0.3)
    errors = [abs(fd_partial(math.exp, 0.2, h) - math.exp(0.2)) for h in (0.2, 0.1, 0.05)]
    np.testing.assert_allclose(errors[0] / errors[1], 4.0, rtol=0.3)


def test_fd_partial_reports_failing_side():
    def cost(p):
        if p > 1.0:
            raise SynthesisError("no resonance")
        return p
    with pytest.raises(SynthesisError, match=r"p \+ dp"):
        fd_partial(cost, 1.0, 0.1)
    with pytest.raises(SynthesisError, match=r"p - dp"):
        fd_partial(lambda p: cost(-p + 2.1), 1.0, 0.1)


def test_influence_ratio():
    assert influence_ratio(5.0, 5.0) == 0.0
    assert influence_ratio(10.0, 1.0) == pytest.approx(1.0)
    assert influence_ratio(-2.0, 4.0) == pytest.approx(-0.30103, abs=1e-5)
    assert math.isnan(influence_ratio(1.0, 1e-13))
    with pytest.raises(InvalidInputError):
        influence_ratio(float("inf"), 1.0)


@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
def test_influence_ratio_antisymmetric(a, b):
    assert influence_ratio(a, b) == pytest.approx(-influence_ratio(b, a), abs=1e-12)


def test_grid_axis():
    np.testing.assert_allclose(grid_axis(2.5), [-2.5, 0.0, 2.5])
    assert len(grid_axis(0.05)) == 101
    with pytest.raises(InvalidConfigError):
        grid_axis(0.3)
    with pytest.raises(InvalidConfigError):
        grid_axis(0.0)


def test_coarse_grid_matches_pointwise_partials():
    synth = SurrogateSynthesizer()
    others = np.array([0.1, 0.0, -0.2, 0.05, 0.0])
    grid = sensitivity_grid(U_GOAL, others, synth, step=2.5)
    assert grid.n_cells == 9 and grid.ratio.shape == (3, 3)

    def at(p1, p3):
        cfg = np.zeros(7)
        cfg[[1, 3, 4, 5, 6]] = others
        cfg[0], cfg[2] = p1, p3
        return cfg

    def cost(cfg):
        return float(static_cost(U_GOAL, cfg, synth)[0])

    for p1, p3 in [(0.0, 0.0), (-2.5, 2.5), (2.5, 0.0)]:
        i, j = grid.cell(p1, p3)
        d1 = fd_partial(lambda v: cost(at(v, p3)), p1, 1e-3)
        d3 = fd_partial(lambda v: cost(at(p1, v)), p3, 1e-3)
        assert grid.dj_dp1[i, j] == pytest.approx(d1, rel=1e-6)
        assert grid.dj_dp3[i, j] == pytest.approx(d3, rel=1e-6)
        assert grid.ratio_at(p1, p3) == pytest.approx(influence_ratio(d1, d3), abs=1e-6)
    assert np.all(np.isfinite(grid.w1)) and np.all(np.isfinite(grid.w2))


def test_rest_cell_favors_p1():
    grid = sensitivity_grid(U_GOAL, np.zeros(5), SurrogateSynthesizer(), step=0.5)
    assert grid.ratio_at(0.0, 0.0) > 0


def test_static_cost_has_no_effort_term():
    synth = SurrogateSynthesizer()
    rest = synth.formants_for(np.zeros((1, 7, 1)))[0]
    goal = AuditoryGoal("rest", AuditoryPoint.from_hz(rest[0], rest[1]))
    assert static_cost(goal, np.zeros(7), synth)[0] == pytest.approx(0.0, abs=1e-9)
    cfg = np.zeros(7)
    cfg[3] = -0.4
    j = static_cost(goal, cfg, synth)[0]
    assert j >= 0.4


def test_sensitivity_grid_validation():
    with pytest.raises(InvalidInputError):
        sensitivity_grid(U_GOAL, np.zeros(4), SurrogateSynthesizer())
    with pytest.raises(InvalidConfigError):
        sensitivity_grid(U_GOAL, np.zeros(5), SurrogateSynthesizer(), dp=0.0)
