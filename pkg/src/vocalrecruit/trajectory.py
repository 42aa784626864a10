"""Basis-function acceleration profiles and their double integration.

Each articulator's acceleration is a normalized mixture of Gaussian kernels
whose weights are the policy parameters. Weights are accelerations in
articulator units per s^2; trajectories are sampled on a millisecond grid,
so stored accelerations are in units per ms^2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError, InvalidInputError

N_ARTICULATORS = 7
# weights are per s^2, the time grid is in ms
WEIGHT_TO_MS2 = 1e-6


@dataclass(frozen=True)
class BasisConfig:
    n_basis: int = 4
    duration: float = 500.0
    width: float = 50.0
    dt: float = 10.0

    def __post_init__(self):
        if self.n_basis < 1:
            raise InvalidConfigError("n_basis must be >= 1")
        if self.duration <= 0 or self.width <= 0 or self.dt <= 0:
            raise InvalidConfigError("duration, width and dt must be positive")
        steps = self.duration / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise InvalidConfigError("duration must be an integer multiple of dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def centers(self) -> np.ndarray:
        if self.n_basis == 1:
            return np.array([self.duration / 2.0])
        return np.linspace(0.0, self.duration, self.n_basis)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class PolicyParameters:
    """Basis weights, one row per articulator."""

    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 2 or theta.shape[0] != N_ARTICULATORS:
            raise InvalidInputError(
                f"theta must have shape ({N_ARTICULATORS}, B), got {theta.shape}"
            )
        object.__setattr__(self, "theta", theta)

    @classmethod
    def zeros(cls, n_basis: int = 4) -> "PolicyParameters":
        return cls(np.zeros((N_ARTICULATORS, n_basis)))

    @classmethod
    def from_flat(cls, flat, n_basis: int = 4) -> "PolicyParameters":
        return cls(np.asarray(flat, dtype=float).reshape(N_ARTICULATORS, n_basis))

    @property
    def flat(self) -> np.ndarray:
        return self.theta.ravel()


@dataclass(frozen=True)
class ArticulatoryTrajectory:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray = field(repr=False)

    @property
    def end_positions(self) -> np.ndarray:
        return self.positions[:, -1]


def kernel(t, c, w):
    """Unnormalized Gaussian kernel ``exp(-(t - c)^2 / w^2)``."""
    if w <= 0:
        raise InvalidConfigError("kernel width must be positive")
    t = np.asarray(t, dtype=float)
    return np.exp(-((t - c) ** 2) / w**2)


def normalized_basis(t, cfg: BasisConfig) -> np.ndarray:
    """Basis activations g_b(t); the last axis has length B and sums to one.

    The kernels are normalized in log space so that times far from every
    center do not underflow to 0/0.
    """
    t = np.asarray(t, dtype=float)
    logk = -((t[..., None] - cfg.centers) ** 2) / cfg.width**2
    logk -= logk.max(axis=-1, keepdims=True)
    k = np.exp(logk)
    return k / k.sum(axis=-1, keepdims=True)


def acceleration_profile(theta_m, t, cfg: BasisConfig):
    """Acceleration of one articulator, in weight units, at time(s) ``t``."""
    theta_m = np.asarray(theta_m, dtype=float)
    if theta_m.shape != (cfg.n_basis,):
        raise InvalidInputError(
            f"expected {cfg.n_basis} weights, got shape {theta_m.shape}"
        )
    return normalized_basis(t, cfg) @ theta_m


def integrate_batch(theta: np.ndarray, cfg: BasisConfig):
    """Integrate weights of shape (..., 7, B) into (positions, velocities, accels).

    Acceleration is taken as piecewise linear between grid samples and
    integrated exactly, so constant profiles give the closed-form parabola.
    Returned arrays have shape (..., 7, T) with T = n_steps + 1.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != cfg.n_basis:
        raise InvalidInputError("weight blocks do not match n_basis")
    g = normalized_basis(cfg.times, cfg)  # (T, B)
    acc = np.einsum("...b,tb->...t", theta, g) * WEIGHT_TO_MS2
    dt = cfg.dt
    a0, a1 = acc[..., :-1], acc[..., 1:]
    dv = 0.5 * dt * (a0 + a1)
    vel = np.concatenate([np.zeros_like(acc[..., :1]), np.cumsum(dv, axis=-1)], axis=-1)
    dq = dt * vel[..., :-1] + dt * dt * (2.0 * a0 + a1) / 6.0
    pos = np.concatenate([np.zeros_like(acc[..., :1]), np.cumsum(dq, axis=-1)], axis=-1)
    return pos, vel, acc


def integrate(params: PolicyParameters, cfg: BasisConfig) -> ArticulatoryTrajectory:
    """Integrate a policy from the neutral posture at rest."""
    if params.theta.shape[1] != cfg.n_basis:
        raise InvalidInputError("policy block length does not match n_basis")
    pos, vel, acc = integrate_batch(params.theta, cfg)
    return ArticulatoryTrajectory(cfg.times, pos, vel, acc)


def endpoint_gains(cfg: BasisConfig) -> np.ndarray:
    """Map from one articulator's weights to its final position (length B).

    Integration is linear, so q(t_N) = endpoint_gains(cfg) @ theta_m.
    """
    eye = np.eye(cfg.n_basis)
    pos, _, _ = integrate_batch(eye, cfg)
    return pos[:, -1]
