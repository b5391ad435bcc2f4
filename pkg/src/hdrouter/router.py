"""Interferometric OAM parity router acting on photon B.

The two arms of the interferometer carry dove prisms rotated by
``delta_alpha`` relative to each other. A photon with OAM ``l`` picks up a
relative phase ``2 l delta_alpha + phi`` between the arms, so with
``delta_alpha = pi/2`` even and odd modes leave through different ports.
Only the net port-resolved map is modelled: the sign of ``l`` is preserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .modes import KetVector, TwoPhotonDensity

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SorterSettings:
    delta_alpha: float = math.pi / 2
    phi: float = 0.0
    visibility: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility {self.visibility} outside [0, 1]")
        if not (math.isfinite(self.delta_alpha) and math.isfinite(self.phi)):
            raise ValueError("sorter angles must be finite")


@dataclass(frozen=True, eq=False)
class PortResolvedState:
    port_b: TwoPhotonDensity
    port_c: TwoPhotonDensity

    @property
    def probabilities(self) -> tuple[float, float]:
        return self.port_b.trace, self.port_c.trace


@dataclass
class PhaseController:
    """Piezo phase lock: random-walk drift with periodic recalibration.

    ``drift_rate`` is the random-walk standard deviation in rad per sqrt(hour).
    ``elapsed`` accumulates across :func:`phase_evolve` calls, so one
    controller instance must be stepped sequentially.
    """

    target_phi: float = 0.0
    drift_rate: float = 0.0
    recal_interval: float = 26.0 / 60.0
    elapsed: float = 0.0

    def __post_init__(self):
        if not self.recal_interval > 0:
            raise ValueError("recal_interval must be positive")
        if self.drift_rate < 0:
            raise ValueError("drift_rate must be non-negative")


def dove_prism(ket: KetVector, alpha: float, sign: int = 1) -> KetVector:
    """``|l> -> exp(sign * 2i l alpha) |-l>``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    ells = ket.space.ells
    phased = ket.amplitudes * np.exp(sign * 2j * ells * alpha)
    return KetVector(ket.space, phased[::-1])


def _phase_factor(ells, settings: SorterSettings):
    return np.exp(1j * (2.0 * np.asarray(ells) * settings.delta_alpha + settings.phi))


def port_amplitudes(ell, settings: SorterSettings):
    """Transmission amplitudes ``(t_B, t_C)`` for OAM ``ell`` (scalar or array)."""
    e = _phase_factor(ell, settings)
    t_b = 0.5 * (1 + e)
    t_c = 0.5 * (1 - e)
    if np.ndim(ell) == 0:
        return complex(t_b), complex(t_c)
    return t_b, t_c


def route_photon_b(rho: TwoPhotonDensity, settings: SorterSettings) -> PortResolvedState:
    """Split ``rho`` into the sub-normalized branches reaching detectors B and C.

    With visibility ``V`` each branch is ``V K rho K^dag + (1 - V) rho / 2``,
    the second term being a 50/50 splitter with no interference.
    """
    t_b, t_c = port_amplitudes(rho.space_b.ells, settings)
    ones_a = np.ones(rho.space_a.dim)
    k_b = np.kron(ones_a, t_b)
    k_c = np.kron(ones_a, t_c)
    m = rho.matrix
    V = settings.visibility
    out_b = V * (k_b[:, None] * m * k_b.conj()[None, :]) + (1 - V) * 0.5 * m
    out_c = V * (k_c[:, None] * m * k_c.conj()[None, :]) + (1 - V) * 0.5 * m
    # remove round-off asymmetry so the Hermiticity check is exact
    out_b = 0.5 * (out_b + out_b.conj().T)
    out_c = 0.5 * (out_c + out_c.conj().T)
    return PortResolvedState(
        TwoPhotonDensity(rho.space_a, rho.space_b, out_b),
        TwoPhotonDensity(rho.space_a, rho.space_b, out_c),
    )


def switch(settings: SorterSettings) -> SorterSettings:
    return replace(settings, phi=float((settings.phi + math.pi) % TWO_PI))


def phase_evolve(controller: PhaseController, settings: SorterSettings, dt: float,
                 rng: np.random.Generator) -> SorterSettings:
    """Advance the interferometer phase by ``dt`` hours.

    A recalibration (reset to ``target_phi``) happens when the accumulated
    time crosses a multiple of ``recal_interval``.
    """
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    phi = settings.phi
    if controller.drift_rate > 0 and dt > 0:
        phi = phi + rng.normal(0.0, controller.drift_rate * math.sqrt(dt))
    before = controller.elapsed
    controller.elapsed = before + dt
    # small slack so dt == recal_interval counts as a crossing despite round-off
    n_before = math.floor(before / controller.recal_interval + 1e-9)
    n_after = math.floor(controller.elapsed / controller.recal_interval + 1e-9)
    if n_after > n_before:
        phi = controller.target_phi
    return replace(settings, phi=float(phi))
