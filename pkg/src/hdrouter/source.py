"""SPDC-like entangled source with noise and slow drift."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .modes import (DegenerateStateError, ModeSpace, TwoPhotonDensity,
                    TwoPhotonPureState, normalize)


@dataclass(frozen=True)
class GaussianSpectrum:
    """``c(l) ~ exp(-l^2 / (2 sigma^2))``."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"gaussian sigma must be positive, got {self.sigma}")

    def __call__(self, ells) -> np.ndarray:
        ells = np.asarray(ells, dtype=float)
        return np.exp(-ells**2 / (2.0 * self.sigma**2))


@dataclass(frozen=True)
class ExplicitSpectrum:
    """Tabulated non-negative amplitudes; modes missing from the table get 0."""

    table: Mapping[int, float]

    def __post_init__(self):
        table = {int(k): float(v) for k, v in dict(self.table).items()}
        if not table:
            raise ValueError("explicit spectrum table is empty")
        if any(v < 0 for v in table.values()):
            raise ValueError("explicit spectrum amplitudes must be non-negative")
        if not any(v > 0 for v in table.values()):
            raise ValueError("explicit spectrum needs at least one positive amplitude")
        object.__setattr__(self, "table", table)

    def __hash__(self):
        return hash(tuple(sorted(self.table.items())))

    def __call__(self, ells) -> np.ndarray:
        return np.array([self.table.get(int(l), 0.0) for l in np.atleast_1d(ells)])


@dataclass(frozen=True)
class DecayedSpectrum:
    """A base spectrum times ``exp(-decay * |l|)``; what :func:`drift_at` returns."""

    base: "SpectrumModel"
    decay: float

    def __call__(self, ells) -> np.ndarray:
        ells = np.asarray(ells)
        return self.base(ells) * np.exp(-self.decay * np.abs(ells))


SpectrumModel = Union[GaussianSpectrum, ExplicitSpectrum, DecayedSpectrum]


def _check_damping(name, table):
    table = {int(k): float(v) for k, v in dict(table or {}).items()}
    for ell, eta in table.items():
        if not 0.0 < eta <= 1.0:
            raise ValueError(f"{name}[{ell}] = {eta} outside (0, 1]")
    return table


@dataclass(frozen=True)
class NoiseModel:
    """Isotropic admixture, coherent nearest-neighbour crosstalk on photon B,
    and per-mode amplitude damping on each arm (missing modes mean 1).

    The leaked amplitude is ``crosstalk * exp(i crosstalk_phase)`` times the
    source amplitude.
    """

    white_weight: float = 0.0
    crosstalk: float = 0.0
    crosstalk_phase: float = 0.0
    damping_a: Mapping[int, float] = field(default_factory=dict)
    damping_b: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.white_weight <= 1.0:
            raise ValueError(f"white_weight {self.white_weight} outside [0, 1]")
        if not 0.0 <= self.crosstalk <= 0.5:
            raise ValueError(f"crosstalk {self.crosstalk} outside [0, 0.5]")
        object.__setattr__(self, "damping_a", _check_damping("damping_a", self.damping_a))
        object.__setattr__(self, "damping_b", _check_damping("damping_b", self.damping_b))

    def __hash__(self):
        return hash((self.white_weight, self.crosstalk, self.crosstalk_phase,
                     tuple(sorted(self.damping_a.items())),
                     tuple(sorted(self.damping_b.items()))))

    def eta(self, arm: str, ells) -> np.ndarray:
        table = self.damping_a if arm == "A" else self.damping_b
        return np.array([table.get(int(l), 1.0) for l in ells])


@dataclass(frozen=True)
class DriftModel:
    amplitude_decay: float = 0.0  # per hour per unit |l|
    rate_decay: float = 0.0  # per hour

    def __post_init__(self):
        if self.amplitude_decay < 0 or self.rate_decay < 0:
            raise ValueError("drift rates must be non-negative")


def generate_pure(space: ModeSpace, spectrum: SpectrumModel) -> TwoPhotonPureState:
    c = np.asarray(spectrum(space.ells), dtype=float)
    if not np.any(c > 0):
        raise DegenerateStateError(
            f"spectrum vanishes on every mode in [-{space.L}, {space.L}]")
    return normalize(TwoPhotonPureState.anti_correlated(space, c))


def apply_noise(state: TwoPhotonPureState, noise: NoiseModel) -> TwoPhotonDensity:
    """Crosstalk, then damping, then isotropic mixing.

    Crosstalk adds ``eps * psi(l_A, l_B -/+ 1)`` to each ``(l_A, l_B)``
    coherently; amplitude pushed past the edge of the mode space is lost.
    """
    amps = state.amplitudes
    eps = noise.crosstalk * np.exp(1j * noise.crosstalk_phase)
    if noise.crosstalk > 0:
        leaked = amps.copy()
        leaked[:, 1:] += eps * amps[:, :-1]
        leaked[:, :-1] += eps * amps[:, 1:]
        amps = leaked
    if noise.damping_a or noise.damping_b:
        eta_a = noise.eta("A", state.space_a.ells)
        eta_b = noise.eta("B", state.space_b.ells)
        amps = amps * np.sqrt(np.outer(eta_a, eta_b))
    pure = normalize(TwoPhotonPureState(state.space_a, state.space_b, amps))
    rho = pure.density().matrix
    w = noise.white_weight
    if w > 0:
        D = rho.shape[0]
        rho = (1 - w) * rho + w * np.eye(D) / D
    return TwoPhotonDensity(state.space_a, state.space_b, rho)


def drift_at(spectrum: SpectrumModel, drift: DriftModel, t: float):
    """Spectrum and pair-rate scale after ``t`` hours of crystal degradation."""
    if t < 0:
        raise ValueError(f"drift time must be non-negative, got {t}")
    rate_scale = float(np.exp(-drift.rate_decay * t))
    decay = drift.amplitude_decay * t
    if decay == 0:
        return spectrum, rate_scale
    if isinstance(spectrum, DecayedSpectrum):
        return DecayedSpectrum(spectrum.base, spectrum.decay + decay), rate_scale
    return DecayedSpectrum(spectrum, decay), rate_scale
