"""Surrogate articulatory synthesizer.

Seven articulator values deform the log-area of a uniform 40-section tube;
formants are the resonances of the resulting concatenated-tube model
(closed at the glottis, pressure-release at the lips).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InvalidConfigError, InvalidInputError, SynthesisError
from .trajectory import N_ARTICULATORS

FIELD_KINDS = ("ramp", "bump", "shift")
CALIBRATION_SCHEMA = "vocalrecruit.calibration/1"


@dataclass(frozen=True)
class FieldComponent:
    """One shaped term of an articulator's log-area deformation.

    ``center`` and ``width`` are fractions of the tract length measured from
    the glottis. ``ramp`` is a tanh step (widens lip side for positive
    amplitude), ``bump`` a Gaussian, ``shift`` a derivative-of-Gaussian
    that moves area from one side of ``center`` to the other.
    """

    kind: str
    amplitude: float
    center: float
    width: float

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise InvalidConfigError(f"unknown field kind {self.kind!r}")
        if self.width <= 0:
            raise InvalidConfigError("field width must be positive")

    def profile(self, x: np.ndarray) -> np.ndarray:
        z = (x - self.center) / self.width
        if self.kind == "ramp":
            shape = np.tanh(z)
        elif self.kind == "bump":
            shape = np.exp(-z * z)
        else:
            # peak magnitude 1
            shape = np.sqrt(2.0 * np.e) * z * np.exp(-z * z)
        return self.amplitude * shape


@dataclass(frozen=True)
class ArticulatorField:
    """Log-area change per unit of one articulator."""

    name: str
    components: tuple[FieldComponent, ...]

    def profile(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x)
        for comp in self.components:
            out = out + comp.profile(x)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ArticulatorField":
        comps = tuple(FieldComponent(**c) for c in data["components"])
        if not comps:
            raise InvalidConfigError(f"{data.get('name')}: no field components")
        return cls(data["name"], comps)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "components": [
                {"kind": c.kind, "amplitude": c.amplitude, "center": c.center,
                 "width": c.width}
                for c in self.components
            ],
        }


@dataclass(frozen=True)
class Calibration:
    fields: tuple[ArticulatorField, ...]
    length_cm: float = 17.0
    n_sections: int = 40
    neutral_area: float = 3.0
    area_floor: float = 0.05
    sound_speed: float = 35000.0  # cm/s
    clamp: float = 2.5
    f_max: float = 5000.0
    f_step: float = 5.0
    log_area_limit: float | None = None  # soft bound on |ln(A / neutral_area)|
    _basis: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.fields) != N_ARTICULATORS:
            raise InvalidConfigError(f"calibration needs {N_ARTICULATORS} fields")
        if min(self.length_cm, self.neutral_area, self.area_floor, self.sound_speed) <= 0:
            raise InvalidConfigError("tube constants must be positive")
        if self.n_sections < 2 or self.f_step <= 0 or self.f_max <= self.f_step:
            raise InvalidConfigError("invalid tube discretization")
        if self.log_area_limit is not None and not self.log_area_limit > 0:
            raise InvalidConfigError("log_area_limit must be positive")
        x = (np.arange(self.n_sections) + 0.5) / self.n_sections
        object.__setattr__(self, "_basis", np.stack([f.profile(x) for f in self.fields]))

    @property
    def section_length(self) -> float:
        return self.length_cm / self.n_sections

    @property
    def deformation_basis(self) -> np.ndarray:
        """(7, N) log-area change per unit of each articulator."""
        return self._basis

    @classmethod
    def from_dict(cls, data: dict) -> "Calibration":
        if data.get("schema") != CALIBRATION_SCHEMA:
            raise InvalidConfigError(f"calibration schema must be {CALIBRATION_SCHEMA!r}")
        fields = tuple(ArticulatorField.from_dict(f) for f in data["articulators"])
        return cls(fields=fields, **data.get("tube", {}))

    @classmethod
    def load(cls, path: str | Path | None = None) -> "Calibration":
        if path is None:
            return default_calibration()
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "schema": CALIBRATION_SCHEMA,
            "tube": {
                "length_cm": self.length_cm,
                "n_sections": self.n_sections,
                "neutral_area": self.neutral_area,
                "area_floor": self.area_floor,
                "sound_speed": self.sound_speed,
                "clamp": self.clamp,
                "f_max": self.f_max,
                "f_step": self.f_step,
                "log_area_limit": self.log_area_limit,
            },
            "articulators": [f.to_dict() for f in self.fields],
        }


@lru_cache(maxsize=1)
def default_calibration() -> Calibration:
    text = resources.files("vocalrecruit.data").joinpath("calibration.json").read_text()
    return Calibration.from_dict(json.loads(text))


@dataclass(frozen=True)
class AreaFunction:
    sections: np.ndarray  # cm^2, glottis -> lips
    section_length: float  # cm

    @property
    def length(self) -> float:
        return self.section_length * len(self.sections)


@dataclass(frozen=True)
class FormantTrajectory:
    times: np.ndarray
    formants: np.ndarray  # (T, 3) Hz


def area_batch(configs, cal: Calibration | None = None) -> np.ndarray:
    """Areas (..., N) for articulator configurations of shape (..., 7)."""
    cal = cal or default_calibration()
    p = np.asarray(configs, dtype=float)
    if p.shape[-1] != N_ARTICULATORS:
        raise InvalidInputError(f"expected {N_ARTICULATORS} articulator values")
    if not np.all(np.isfinite(p)):
        raise InvalidInputError("articulator values must be finite")
    p = np.clip(p, -cal.clamp, cal.clamp)
    log_ratio = p @ cal.deformation_basis
    if cal.log_area_limit is not None:
        # tissue cannot deform without bound; saturate smoothly instead of clipping
        log_ratio = cal.log_area_limit * np.tanh(log_ratio / cal.log_area_limit)
    areas = cal.neutral_area * np.exp(log_ratio)
    return np.maximum(areas, cal.area_floor)


def area_from_config(config, cal: Calibration | None = None) -> AreaFunction:
    cal = cal or default_calibration()
    config = np.asarray(config, dtype=float)
    if config.shape != (N_ARTICULATORS,):
        raise InvalidInputError(f"expected {N_ARTICULATORS} articulator values")
    return AreaFunction(area_batch(config, cal), cal.section_length)


def _glottal_flow(areas, f, section_length, sound_speed):
    """Glottal volume velocity needed for unit lip flow, lossless tube.

    Chain matrices are applied from the lips backwards with zero lip
    pressure. The acoustic pressure stays purely imaginary and the flow
    purely real, so only real arithmetic is needed. Zeros of the result are
    the tube resonances. ``areas`` is (..., N) and ``f`` broadcasts against
    (..., 1).
    """
    kl = 2.0 * np.pi * np.asarray(f, dtype=float) * (section_length / sound_speed)
    c, s = np.cos(kl), np.sin(kl)
    p = np.zeros(np.broadcast_shapes(areas.shape[:-1] + (1,), np.shape(kl)))
    u = np.ones_like(p)
    for i in range(areas.shape[-1] - 1, -1, -1):
        a = areas[..., i : i + 1]
        p, u = p * c + s * u / a, c * u - a * s * p
    return u


def transfer_function(area: AreaFunction, freqs, sound_speed=35000.0, loss=0.0):
    """Complex lip/glottis volume-velocity ratio on ``freqs``.

    ``loss`` is an attenuation per cm added to the wavenumber so resonance
    peaks stay finite; 0 gives the lossless (singular) response.
    """
    freqs = np.asarray(freqs, dtype=float)
    k = 2.0 * np.pi * freqs / sound_speed - 1j * loss
    kl = k * area.section_length
    c, s = np.cos(kl), np.sin(kl)
    p = np.zeros(freqs.shape, dtype=complex)
    u = np.ones(freqs.shape, dtype=complex)
    for a in area.sections[::-1]:
        p, u = p * c + 1j * s * u / a, 1j * a * s * p + c * u
    with np.errstate(divide="ignore"):
        return 1.0 / u


def formants_batch(areas, cal: Calibration | None = None, n: int = 3,
                   tol: float = 1e-7) -> np.ndarray:
    """First ``n`` resonances (Hz) for areas of shape (M, N).

    Resonances are bracketed by sign changes of the glottal flow on the
    ``f_step`` grid and refined by the Illinois false-position method.
    Rows with fewer than ``n`` resonances below ``f_max`` are NaN.
    """
    cal = cal or default_calibration()
    areas = np.atleast_2d(np.asarray(areas, dtype=float))
    m = areas.shape[0]
    grid = np.arange(cal.f_step, cal.f_max + 0.5 * cal.f_step, cal.f_step)
    args = (cal.section_length, cal.sound_speed)
    flow = _glottal_flow(areas, grid[None, :], *args)
    crossing = np.signbit(flow[:, :-1]) != np.signbit(flow[:, 1:])

    lo = np.full((m, n), np.nan)
    for r in range(m):
        idx = np.flatnonzero(crossing[r])[:n]
        lo[r, : len(idx)] = grid[idx]
    ok = ~np.isnan(lo).any(axis=1)
    out = np.full((m, n), np.nan)
    if not ok.any():
        return out

    a = np.repeat(areas[ok][:, None, :], n, axis=1)
    lo = lo[ok]
    hi = lo + cal.f_step
    flo = _glottal_flow(a, lo[..., None], *args)[..., 0]
    fhi = _glottal_flow(a, hi[..., None], *args)[..., 0]
    side = np.zeros(lo.shape, dtype=int)
    for _ in range(60):
        x = (lo * fhi - hi * flo) / (fhi - flo)
        fx = _glottal_flow(a, x[..., None], *args)[..., 0]
        same_lo = np.signbit(fx) == np.signbit(flo)
        # Illinois: halve the stale endpoint's value when it is retained twice
        flo_new = np.where(same_lo, fx, np.where(side == -1, flo * 0.5, flo))
        fhi_new = np.where(same_lo, np.where(side == 1, fhi * 0.5, fhi), fx)
        lo = np.where(same_lo, x, lo)
        hi = np.where(same_lo, hi, x)
        side = np.where(same_lo, 1, -1)
        flo, fhi = flo_new, fhi_new
        if np.all(hi - lo < tol) or np.all(fx == 0):
            break
    out[ok] = np.where(np.abs(flo) < np.abs(fhi), lo, hi)
    return out


def formants(area: AreaFunction, cal: Calibration | None = None) -> np.ndarray:
    """(F1, F2, F3) in Hz of a single area function."""
    cal = cal or default_calibration()
    if np.any(area.sections <= 0):
        raise InvalidInputError("areas must be positive")
    if abs(area.section_length - cal.section_length) > 1e-12:
        cal = _with_geometry(cal, area)
    f = formants_batch(area.sections, cal)[0]
    if np.isnan(f).any():
        raise SynthesisError(f"fewer than 3 resonances below {cal.f_max:g} Hz")
    return f


def _with_geometry(cal: Calibration, area: AreaFunction) -> Calibration:
    d = cal.to_dict()
    d["tube"]["length_cm"] = area.length
    d["tube"]["n_sections"] = len(area.sections)
    return Calibration.from_dict(d)


def synthesize_configs(configs, cal: Calibration | None = None) -> np.ndarray:
    """Formants (M, 3) for articulator configurations (M, 7); NaN rows on failure."""
    cal = cal or default_calibration()
    configs = np.atleast_2d(configs)
    return formants_batch(area_batch(configs, cal), cal)


def synthesize(traj, cal: Calibration | None = None) -> FormantTrajectory:
    """Formant trajectory for every sample of an articulatory trajectory."""
    f = synthesize_configs(traj.positions.T, cal)
    bad = np.flatnonzero(np.isnan(f).any(axis=1))
    if bad.size:
        raise SynthesisError("fewer than 3 resonances", timestep=int(bad[0]))
    return FormantTrajectory(np.asarray(traj.times), f)


class SurrogateSynthesizer:
    """In-process synthesizer handle backed by the calibrated tube model.

    ``formants_for`` receives positions (K, 7, T) and returns endpoint
    formants (K, 3): perception only hears the final sample, so only that
    sample is synthesized.
    """

    def __init__(self, calibration: Calibration | None = None):
        self.calibration = calibration or default_calibration()

    def formants_for(self, positions) -> np.ndarray:
        positions = np.asarray(positions, dtype=float)
        return synthesize_configs(positions[..., -1], self.calibration)

    def close(self) -> None:
        pass
