"""Perceptual (3*F1, F2) Bark plane."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

F1_WEIGHT = 3.0


def hz_to_bark(f):
    """Bark value ``7 * asinh(f / 650)``; rejects negative frequencies."""
    arr = np.asarray(f, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise InvalidInputError("frequency must be finite and non-negative")
    out = 7.0 * np.arcsinh(arr / 650.0)
    return float(out) if out.ndim == 0 else out


def bark_to_hz(b):
    return 650.0 * np.sinh(np.asarray(b, dtype=float) / 7.0)


@dataclass(frozen=True)
class AuditoryPoint:
    w1: float  # 3 * bark(F1)
    w2: float  # bark(F2)

    def __post_init__(self):
        if not (np.isfinite(self.w1) and np.isfinite(self.w2)):
            raise InvalidInputError("auditory point must be finite")
        if self.w1 < 0 or self.w2 < 0:
            raise InvalidInputError("auditory coordinates must be non-negative")

    @classmethod
    def from_hz(cls, f1: float, f2: float) -> "AuditoryPoint":
        return cls(F1_WEIGHT * hz_to_bark(f1), hz_to_bark(f2))

    def as_array(self) -> np.ndarray:
        return np.array([self.w1, self.w2])

    def to_hz(self) -> tuple[float, float]:
        return float(bark_to_hz(self.w1 / F1_WEIGHT)), float(bark_to_hz(self.w2))


@dataclass(frozen=True)
class AuditoryGoal:
    label: str
    point: AuditoryPoint


def perceive_hz(f1, f2) -> np.ndarray:
    """Vectorized perception of endpoint formants; returns (..., 2)."""
    return np.stack([F1_WEIGHT * hz_to_bark(f1), hz_to_bark(f2)], axis=-1)


def perceive(ftraj) -> AuditoryPoint:
    """Perceive a formant trajectory: only its final sample is heard."""
    formants = np.asarray(getattr(ftraj, "formants", ftraj), dtype=float)
    if formants.ndim != 2 or formants.shape[0] == 0:
        raise InvalidInputError("formant trajectory is empty")
    f1, f2 = formants[-1, 0], formants[-1, 1]
    return AuditoryPoint.from_hz(f1, f2)
