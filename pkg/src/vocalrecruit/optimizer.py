"""PI^BB: reward-weighted averaging over a block-diagonal Gaussian.

The search distribution holds one Gaussian per block (one block per
articulator in the vocal task). Each update samples K parameter vectors,
maps their costs to weights by normalized exponentiation, and refits mean
and covariance of every block by weighted averaging.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cost import FAILURE_COST
from .errors import InvalidConfigError, InvalidInputError, OptimizationAborted

SYMMETRY_TOL = 1e-12
COST_EPS = 1e-12


@dataclass(frozen=True)
class SearchDistribution:
    means: np.ndarray  # (n_blocks, d)
    covs: np.ndarray  # (n_blocks, d, d)

    @property
    def n_blocks(self) -> int:
        return self.means.shape[0]

    @property
    def block_dim(self) -> int:
        return self.means.shape[1]

    def exploration(self) -> np.ndarray:
        """Exploration magnitude (largest covariance eigenvalue) per block."""
        return np.array([exploration_magnitude(c) for c in self.covs])


@dataclass(frozen=True)
class RolloutBatch:
    samples: np.ndarray  # (K, n_blocks, d)
    costs: np.ndarray  # (K,)
    weights: np.ndarray  # (K,)
    breakdowns: tuple = ()


@dataclass
class ExplorationTrace:
    """Per-update exploration record of one optimization run."""

    lambdas: list = field(default_factory=list)
    best_costs: list = field(default_factory=list)
    mean_costs: list = field(default_factory=list)
    means: list = field(default_factory=list)

    def append(self, dist: SearchDistribution, costs: np.ndarray) -> None:
        self.lambdas.append(dist.exploration())
        finite = costs[np.isfinite(costs)]
        self.best_costs.append(float(np.min(costs)))
        self.mean_costs.append(float(np.mean(finite)) if finite.size else float("inf"))
        self.means.append(dist.means.copy())

    @property
    def n_updates(self) -> int:
        return len(self.lambdas)

    @property
    def lambda_array(self) -> np.ndarray:
        return np.asarray(self.lambdas)

    @property
    def total(self) -> np.ndarray:
        return self.lambda_array.sum(axis=1)

    @property
    def relative(self) -> np.ndarray:
        lam = self.lambda_array
        return lam / lam.sum(axis=1, keepdims=True)

    @property
    def normalized_total(self) -> np.ndarray:
        total = self.total
        return total / total.max()

    @property
    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate(np.asarray(self.best_costs))


def init_distribution(theta_init, lambda_init: float) -> SearchDistribution:
    """Block means from ``theta_init`` (n_blocks, d); isotropic covariances."""
    if not lambda_init > 0:
        raise InvalidConfigError("lambda_init must be positive")
    means = np.array(np.asarray(theta_init, dtype=float), ndmin=2)
    d = means.shape[1]
    covs = np.repeat((lambda_init * np.eye(d))[None], means.shape[0], axis=0)
    return SearchDistribution(means, covs)


def sample(dist: SearchDistribution, k: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``k`` samples of shape (k, n_blocks, d), blocks independent."""
    if k < 2:
        raise InvalidConfigError("need at least 2 samples per update")
    chol = np.linalg.cholesky(dist.covs)
    z = rng.standard_normal((k, dist.n_blocks, dist.block_dim))
    return dist.means + np.einsum("bij,kbj->kbi", chol, z)


def costs_to_weights(costs, h: float = 10.0) -> np.ndarray:
    """Normalized exponentiation: the cheapest sample gets the largest weight."""
    costs = np.asarray(costs, dtype=float)
    if costs.ndim != 1 or costs.size < 2:
        raise InvalidInputError("need a 1-D array of at least 2 costs")
    if not h > 0:
        raise InvalidConfigError("eliteness h must be positive")
    lo, hi = costs.min(), costs.max()
    w = np.exp(-h * (costs - lo) / (hi - lo + COST_EPS))
    return w / w.sum()


def _floor_eigenvalues(cov: np.ndarray, floor: float) -> np.ndarray:
    cov = 0.5 * (cov + np.swapaxes(cov, -1, -2))
    vals, vecs = np.linalg.eigh(cov)
    vals = np.maximum(vals, floor)
    out = np.einsum("...ij,...j,...kj->...ik", vecs, vals, vecs)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def update(dist: SearchDistribution, batch: RolloutBatch, eig_floor: float,
           center: str = "new") -> SearchDistribution:
    """Reward-weighted refit of every block.

    ``center`` selects the point deviations are taken around when refitting
    the covariance: ``"new"`` (the refitted mean) or ``"old"`` (the mean the
    samples were drawn around, as in rank-mu CMA-ES).
    """
    w = np.asarray(batch.weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise InvalidInputError("weights must be non-negative and sum to 1")
    if center not in ("new", "old"):
        raise InvalidConfigError("center must be 'new' or 'old'")
    samples = np.asarray(batch.samples, dtype=float)
    means = np.einsum("k,kbi->bi", w, samples)
    ref = means if center == "new" else dist.means
    dev = samples - ref
    covs = np.einsum("k,kbi,kbj->bij", w, dev, dev)
    return SearchDistribution(means, _floor_eigenvalues(covs, eig_floor))


def exploration_magnitude(sigma) -> float:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise InvalidInputError("covariance must be square")
    if np.max(np.abs(sigma - sigma.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(sigma))):
        raise InvalidInputError("covariance is not symmetric")
    return float(np.linalg.eigvalsh(sigma)[-1])


@dataclass(frozen=True)
class OptimizerConfig:
    n_updates: int = 50
    n_rollouts: int = 20
    lambda_init: float = 0.05
    h: float = 10.0
    eig_floor_ratio: float = 1e-6
    covariance_center: str = "old"
    max_failed_updates: int = 3

    def __post_init__(self):
        if self.n_updates < 1:
            raise InvalidConfigError("n_updates must be >= 1")
        if self.n_rollouts < 2:
            raise InvalidConfigError("n_rollouts must be >= 2")
        if not self.lambda_init > 0 or not self.h > 0:
            raise InvalidConfigError("lambda_init and h must be positive")
        if self.covariance_center not in ("new", "old"):
            raise InvalidConfigError("covariance_center must be 'new' or 'old'")

    @property
    def eig_floor(self) -> float:
        return self.eig_floor_ratio * self.lambda_init


def optimize(cost_fn: Callable[[np.ndarray], np.ndarray], theta_init,
             cfg: OptimizerConfig, seed: int):
    """Minimize a batched cost over a block Gaussian.

    ``cost_fn`` maps samples (K, n_blocks, d) to K costs; non-finite costs
    count as failed rollouts and are charged ``FAILURE_COST``. Update ``u``
    draws from the substream ``(seed, u)`` so runs are reproducible
    independent of scheduling.
    Returns the final distribution and the exploration trace.
    """
    dist = init_distribution(theta_init, cfg.lambda_init)
    trace = ExplorationTrace()
    failed_streak = 0
    for u in range(cfg.n_updates):
        rng = np.random.default_rng([seed, u])
        samples = sample(dist, cfg.n_rollouts, rng)
        costs = np.asarray(cost_fn(samples), dtype=float)
        failed = ~np.isfinite(costs) | (costs >= FAILURE_COST)
        costs = np.where(failed, FAILURE_COST, costs)
        failed_streak = failed_streak + 1 if failed.all() else 0
        if failed_streak >= cfg.max_failed_updates:
            raise OptimizationAborted(
                f"all rollouts failed for {failed_streak} consecutive updates "
                f"(last update {u + 1})"
            )
        weights = costs_to_weights(costs, cfg.h)
        dist = update(dist, RolloutBatch(samples, costs, weights), cfg.eig_floor,
                      cfg.covariance_center)
        trace.append(dist, costs)
    return dist, trace


@dataclass
class RunResult:
    trace: ExplorationTrace
    final: SearchDistribution
    final_policy: object  # PolicyParameters
    final_cost: object  # CostBreakdown of the final mean policy, None on failure
    final_formants: np.ndarray


def vocal_cost_fn(goal, synth, basis):
    """Batched cost of policy samples (K, 7, B) for reaching ``goal``."""
    from .auditory import perceive_hz
    from .cost import accel_term, distance_term, posture_term
    from .trajectory import integrate_batch

    target = goal.point.as_array()

    def cost(samples):
        pos, _, acc = integrate_batch(samples, basis)
        f = synth.formants_for(pos)
        ok = ~np.isnan(f).any(axis=1)
        reached = np.zeros((len(f), 2))
        reached[ok] = perceive_hz(f[ok, 0], f[ok, 1])
        j = distance_term(target, reached) + posture_term(pos[..., -1]) + accel_term(acc)
        return np.where(ok, j, FAILURE_COST)

    return cost


def run(goal, cfg: OptimizerConfig, synth, seed: int, basis=None,
        theta_init=None) -> RunResult:
    """Optimize a vocalization toward ``goal`` starting from the rest posture."""
    from .auditory import AuditoryPoint
    from .cost import CostBreakdown, accel_term, distance_term, posture_term
    from .trajectory import BasisConfig, N_ARTICULATORS, PolicyParameters, integrate_batch

    basis = basis or BasisConfig()
    if theta_init is None:
        theta_init = np.zeros((N_ARTICULATORS, basis.n_basis))
    final, trace = optimize(vocal_cost_fn(goal, synth, basis), theta_init, cfg, seed)
    policy = PolicyParameters(final.means)
    pos, _, acc = integrate_batch(final.means[None], basis)
    f = synth.formants_for(pos)[0]
    breakdown = None
    if not np.isnan(f).any():
        reached = AuditoryPoint.from_hz(f[0], f[1]).as_array()
        breakdown = CostBreakdown(
            float(distance_term(goal.point.as_array(), reached)),
            float(posture_term(pos[0, :, -1])),
            float(accel_term(acc[0])),
        )
    return RunResult(trace, final, policy, breakdown, f)
