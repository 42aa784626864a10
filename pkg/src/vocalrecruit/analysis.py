"""Recruitment-order extraction, rank frequencies and cost sensitivity."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EmptyAggregateError, InvalidConfigError, InvalidInputError, SynthesisError
from .trajectory import N_ARTICULATORS

DENOM_EPS = 1e-12


def smooth(series, half_window: int = 4) -> np.ndarray:
    """Centered moving average; windows are truncated at the edges.

    Works along the first axis, so a (U, 7) array smooths each column.
    """
    if half_window < 0:
        raise InvalidConfigError("half_window must be >= 0")
    x = np.asarray(series, dtype=float)
    if half_window == 0 or x.shape[0] == 0:
        return x.copy()
    n = x.shape[0]
    csum = np.concatenate([np.zeros((1,) + x.shape[1:]), np.cumsum(x, axis=0)])
    idx = np.arange(n)
    lo = np.maximum(idx - half_window, 0)
    hi = np.minimum(idx + half_window + 1, n)
    count = (hi - lo).reshape((n,) + (1,) * (x.ndim - 1))
    return (csum[hi] - csum[lo]) / count


@dataclass
class RecruitmentRecord:
    goal: object  # AuditoryGoal
    order: list = field(default_factory=list)  # 1-based articulator indices
    peak_values: list = field(default_factory=list)
    qualifying: bool = False
    first_update: list = field(default_factory=list)  # 1-based update indices
    failed: bool = False
    error: str | None = None

    def __post_init__(self):
        if len(set(self.order)) != len(self.order):
            raise InvalidInputError("recruitment order has duplicates")
        if any(not 1 <= m <= N_ARTICULATORS for m in self.order):
            raise InvalidInputError("articulator index out of range")


def recruitment_order(lambdas, goal=None, threshold_pp: float = 0.05,
                      dominance_min: float = 0.30, half_window: int = 4,
                      baseline: float | None = None) -> RecruitmentRecord:
    """Order in which articulators come to dominate relative exploration.

    ``lambdas`` is a (U, 7) array of exploration magnitudes or an object
    with a ``lambda_array`` attribute. Relative magnitudes and the total
    normalized to its maximum are smoothed first. Only updates where the
    smoothed normalized total is at least ``baseline + threshold_pp`` are
    considered; ``baseline`` defaults to the unsmoothed value at update 1.
    """
    lam = np.asarray(getattr(lambdas, "lambda_array", lambdas), dtype=float)
    if lam.ndim != 2 or lam.shape[0] < 2:
        raise InvalidInputError("need exploration magnitudes for at least 2 updates")
    total = lam.sum(axis=1)
    rel = smooth(lam / total[:, None], half_window)
    raw_total = total / total.max()
    norm_total = smooth(raw_total, half_window)
    if baseline is None:
        baseline = raw_total[0]
    active = norm_total >= baseline + threshold_pp
    record = RecruitmentRecord(goal=goal, qualifying=bool(active.any()))
    if not record.qualifying:
        return record

    first = {}
    for u in np.flatnonzero(active):
        row = rel[u]
        top = int(np.argmax(row))
        others = np.delete(row, top)
        if row[top] > dominance_min and row[top] > others.max() and top not in first:
            first[top] = u
    for m in sorted(first, key=first.get):
        record.order.append(m + 1)
        record.peak_values.append(float(rel[:, m].max()))
        record.first_update.append(int(first[m]) + 1)
    return record


def rank_frequencies(records) -> tuple[np.ndarray, dict]:
    """(7, 7) table: entry [m, r] = share of qualifying runs ranking P(m+1) at r+1.

    Also returns counts of qualifying, empty-order, non-qualifying and failed
    records. Empty orders count as qualifying runs that rank nobody.
    """
    records = list(records)
    qualifying = [r for r in records if r.qualifying and not r.failed]
    if not qualifying:
        raise EmptyAggregateError("no qualifying recruitment records to aggregate")
    table = np.zeros((N_ARTICULATORS, N_ARTICULATORS))
    for rec in qualifying:
        for rank, m in enumerate(rec.order):
            table[m - 1, rank] += 1
    table /= len(qualifying)
    counts = {
        "total": len(records),
        "qualifying": len(qualifying),
        "empty_order": sum(1 for r in qualifying if not r.order),
        "not_qualifying": sum(1 for r in records if not r.qualifying and not r.failed),
        "failed": sum(1 for r in records if r.failed),
    }
    return table, counts


def fd_partial(cost_at: Callable[[float], float], p: float, dp: float = 1e-3) -> float:
    """Central difference ``(J(p + dp) - J(p - dp)) / (2 dp)``."""
    if not dp > 0:
        raise InvalidConfigError("dp must be positive")
    try:
        plus = cost_at(p + dp)
    except SynthesisError as exc:
        raise SynthesisError(f"evaluation at p + dp failed: {exc}") from exc
    try:
        minus = cost_at(p - dp)
    except SynthesisError as exc:
        raise SynthesisError(f"evaluation at p - dp failed: {exc}") from exc
    return (plus - minus) / (2.0 * dp)


def influence_ratio(dj_dp1: float, dj_dp3: float) -> float:
    """``log10(|dJ/dP1| / |dJ/dP3|)``; NaN marks an undefined cell."""
    if not (np.isfinite(dj_dp1) and np.isfinite(dj_dp3)):
        raise InvalidInputError("derivatives must be finite")
    if abs(dj_dp3) < DENOM_EPS or abs(dj_dp1) < DENOM_EPS:
        return float("nan")
    return float(np.log10(abs(dj_dp1) / abs(dj_dp3)))


@dataclass
class SensitivityGrid:
    p1: np.ndarray  # (n,) grid axis
    p3: np.ndarray  # (n,) grid axis
    w1: np.ndarray  # (n, n) 3*bark(F1), indexed [i_p1, i_p3]
    w2: np.ndarray  # (n, n) bark(F2)
    dj_dp1: np.ndarray
    dj_dp3: np.ndarray
    ratio: np.ndarray  # NaN where undefined
    step: float
    dp: float

    @property
    def n_cells(self) -> int:
        return self.ratio.size

    def cell(self, p1: float, p3: float) -> tuple[int, int]:
        i = int(np.argmin(np.abs(self.p1 - p1)))
        j = int(np.argmin(np.abs(self.p3 - p3)))
        return i, j

    def ratio_at(self, p1: float, p3: float) -> float:
        return float(self.ratio[self.cell(p1, p3)])


def grid_axis(step: float, half_range: float = 2.5) -> np.ndarray:
    if not step > 0:
        raise InvalidConfigError("grid step must be positive")
    n = int(round(2 * half_range / step))
    if abs(n * step - 2 * half_range) > 1e-9 * max(1.0, half_range):
        raise InvalidConfigError("grid step must divide the range evenly")
    return np.linspace(-half_range, half_range, n + 1)


def static_cost(goal, configs, synth) -> np.ndarray:
    """Distance plus posture cost of static configurations (M, 7).

    No movement is involved, so the effort term is zero. NaN marks
    configurations the synthesizer could not resolve.
    """
    from .auditory import perceive_hz
    from .cost import distance_term, posture_term

    configs = np.atleast_2d(np.asarray(configs, dtype=float))
    f = synth.formants_for(configs[..., None])
    ok = ~np.isnan(f).any(axis=1)
    reached = np.full((len(f), 2), np.nan)
    reached[ok] = perceive_hz(f[ok, 0], f[ok, 1])
    j = distance_term(goal.point.as_array(), reached) + posture_term(configs)
    return np.where(ok, j, np.nan)


def sensitivity_grid(goal, fixed_others, synth, step: float = 0.05,
                     dp: float = 1e-3, chunk: int = 2000) -> SensitivityGrid:
    """Influence of P1 versus P3 on the static cost over [-2.5, 2.5]^2.

    ``fixed_others`` holds the values of P2, P4, P5, P6, P7 in that order.
    Each cell needs five cost evaluations; they are batched through the
    synthesizer ``chunk`` configurations at a time.
    """
    fixed_others = np.asarray(fixed_others, dtype=float)
    if fixed_others.shape != (5,):
        raise InvalidInputError("fixed_others must hold 5 values (P2, P4-P7)")
    if not dp > 0:
        raise InvalidConfigError("dp must be positive")
    axis = grid_axis(step)
    n = len(axis)
    P1, P3 = np.meshgrid(axis, axis, indexing="ij")
    base = np.empty((n, n, 7))
    base[..., [1, 3, 4, 5, 6]] = fixed_others
    base[..., 0] = P1
    base[..., 2] = P3

    # center, P1+, P1-, P3+, P3-
    offsets = np.zeros((5, 7))
    offsets[1, 0], offsets[2, 0], offsets[3, 2], offsets[4, 2] = dp, -dp, dp, -dp
    configs = (base[:, :, None, :] + offsets).reshape(-1, 7)

    costs = np.empty(len(configs))
    formants = np.empty((len(configs), 3))
    for s in range(0, len(configs), chunk):
        block = configs[s : s + chunk]
        formants[s : s + chunk] = synth.formants_for(block[..., None])
        costs[s : s + chunk] = static_cost(goal, block, _Cached(formants[s : s + chunk]))
    costs = costs.reshape(n, n, 5)
    formants = formants.reshape(n, n, 5, 3)

    dj1 = (costs[..., 1] - costs[..., 2]) / (2 * dp)
    dj3 = (costs[..., 3] - costs[..., 4]) / (2 * dp)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.log10(np.abs(dj1) / np.abs(dj3))
    undefined = (
        ~np.isfinite(dj1) | ~np.isfinite(dj3)
        | (np.abs(dj3) < DENOM_EPS) | (np.abs(dj1) < DENOM_EPS)
    )
    ratio = np.where(undefined, np.nan, ratio)

    from .auditory import F1_WEIGHT, hz_to_bark

    center = formants[:, :, 0, :]
    w1 = np.full((n, n), np.nan)
    w2 = np.full((n, n), np.nan)
    ok = ~np.isnan(center).any(axis=-1)
    w1[ok] = F1_WEIGHT * hz_to_bark(center[ok][:, 0])
    w2[ok] = hz_to_bark(center[ok][:, 1])
    return SensitivityGrid(axis, axis.copy(), w1, w2, dj1, dj3, ratio, step, dp)


class _Cached:
    """Synthesizer stand-in that replays precomputed formants."""

    def __init__(self, formants):
        self._f = formants

    def formants_for(self, positions):
        return self._f
