"""Discrete OAM mode spaces and two-photon states.

Joint states are stored densely. The amplitude matrix of a two-photon pure
state is indexed ``[l_A + L_A, l_B + L_B]`` and the flattened joint vector is
row-major over ``(l_A, l_B)`` with both indices running from ``-L`` to ``+L``.
Density matrices act on that flattened vector.

Anti-correlated states such as the SPDC output live on the anti-diagonal
``l_B = -l_A``; targets ``sum_l c_l |l>_A |-l>_B`` are labelled by ``l_A``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-10

Photon = Literal["A", "B"]
Parity = Literal["even", "odd"]


class DegenerateStateError(ValueError):
    """Raised for zero-norm or otherwise unusable states."""


class DimensionMismatchError(ValueError):
    """Raised when operands live on incompatible mode spaces."""


@dataclass(frozen=True)
class ModeSpace:
    """OAM values ``l`` in ``[-L, L]``."""

    L: int

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 0:
            raise ValueError(f"L must be a non-negative integer, got {self.L!r}")
        object.__setattr__(self, "L", int(self.L))

    @property
    def dim(self) -> int:
        return 2 * self.L + 1

    @property
    def ells(self) -> np.ndarray:
        return np.arange(-self.L, self.L + 1)

    def __contains__(self, ell) -> bool:
        return int(ell) == ell and -self.L <= ell <= self.L

    def index(self, ell: int) -> int:
        if ell not in self:
            raise ValueError(f"l={ell} outside mode space [-{self.L}, {self.L}]")
        return int(ell) + self.L


@dataclass(frozen=True, eq=False)
class KetVector:
    """Single-photon superposition over a mode space."""

    space: ModeSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.space.dim,):
            raise DimensionMismatchError(
                f"expected {self.space.dim} amplitudes, got shape {amps.shape}")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, space: ModeSpace, ell: int) -> KetVector:
        amps = np.zeros(space.dim, dtype=complex)
        amps[space.index(ell)] = 1.0
        return cls(space, amps)

    @classmethod
    def from_modes(cls, space: ModeSpace, coeffs: dict[int, complex]) -> KetVector:
        amps = np.zeros(space.dim, dtype=complex)
        for ell, c in coeffs.items():
            amps[space.index(ell)] = c
        return cls(space, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> KetVector:
        n = self.norm
        if n == 0:
            raise DegenerateStateError("degenerate state: zero-norm ket")
        return KetVector(self.space, self.amplitudes / n)

    def amplitude(self, ell: int) -> complex:
        return complex(self.amplitudes[self.space.index(ell)])


@dataclass(frozen=True, eq=False)
class TwoPhotonPureState:
    space_a: ModeSpace
    space_b: ModeSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.space_a.dim, self.space_b.dim):
            raise DimensionMismatchError(
                f"amplitude matrix shape {amps.shape} does not match "
                f"({self.space_a.dim}, {self.space_b.dim})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def anti_correlated(cls, space: ModeSpace, coeffs) -> TwoPhotonPureState:
        """``sum_l c(l) |l>_A |-l>_B`` from a length-``d`` array or dict ``{l: c}``."""
        amps = np.zeros((space.dim, space.dim), dtype=complex)
        if isinstance(coeffs, dict):
            items = coeffs.items()
        else:
            coeffs = np.asarray(coeffs)
            if coeffs.shape != (space.dim,):
                raise DimensionMismatchError("need one coefficient per mode")
            items = zip(space.ells, coeffs)
        for ell, c in items:
            amps[space.index(ell), space.index(-ell)] = c
        return cls(space, space, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def vector(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    def is_normalized(self) -> bool:
        return abs(self.norm - 1.0) <= NORM_TOL

    def density(self) -> TwoPhotonDensity:
        v = self.vector
        return TwoPhotonDensity(self.space_a, self.space_b, np.outer(v, v.conj()))

    def amplitude(self, ell_a: int, ell_b: int) -> complex:
        return complex(self.amplitudes[self.space_a.index(ell_a), self.space_b.index(ell_b)])


@dataclass(frozen=True, eq=False)
class TwoPhotonDensity:
    """Hermitian operator on the joint mode space.

    The trace may be below one for the unnormalized branches produced by the
    router. Construction checks shape and Hermiticity; the more expensive
    positivity check lives in :meth:`validate`.
    """

    space_a: ModeSpace
    space_b: ModeSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        D = self.space_a.dim * self.space_b.dim
        if m.shape != (D, D):
            raise DimensionMismatchError(f"density matrix must be {D}x{D}, got {m.shape}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def maximally_mixed(cls, space_a: ModeSpace, space_b: ModeSpace | None = None):
        space_b = space_a if space_b is None else space_b
        D = space_a.dim * space_b.dim
        return cls(space_a, space_b, np.eye(D, dtype=complex) / D)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def eigenvalues(self) -> np.ndarray:
        """Ascending eigenvalues, with round-off negatives clamped to zero."""
        w = np.linalg.eigvalsh(self.matrix)
        return np.where((w < 0) & (w >= -POSITIVITY_TOL), 0.0, w)

    def validate(self) -> TwoPhotonDensity:
        w = np.linalg.eigvalsh(self.matrix)
        if w[0] < -POSITIVITY_TOL:
            raise ValueError(f"density matrix has negative eigenvalue {w[0]:.3g}")
        tr = self.trace
        if not 0 < tr <= 1 + POSITIVITY_TOL:
            raise ValueError(f"density matrix trace {tr} outside (0, 1]")
        return self

    def normalized(self) -> TwoPhotonDensity:
        tr = self.trace
        if tr <= 0:
            raise DegenerateStateError("degenerate state: zero-trace density matrix")
        return TwoPhotonDensity(self.space_a, self.space_b, self.matrix / tr)

    def same_spaces(self, other) -> bool:
        return self.space_a == other.space_a and self.space_b == other.space_b

    def element(self, ell_a: int, ell_b: int, ell_a2: int, ell_b2: int) -> complex:
        """``<l_a, l_b| rho |l_a2, l_b2>``."""
        db = self.space_b.dim
        i = self.space_a.index(ell_a) * db + self.space_b.index(ell_b)
        j = self.space_a.index(ell_a2) * db + self.space_b.index(ell_b2)
        return complex(self.matrix[i, j])


@dataclass(frozen=True, eq=False)
class SchmidtSpectrum:
    probabilities: np.ndarray = field()

    def rank(self, tol: float = 1e-12) -> int:
        return int(np.sum(self.probabilities > tol))


def normalize(state: TwoPhotonPureState) -> TwoPhotonPureState:
    n = state.norm
    if n == 0:
        raise DegenerateStateError("degenerate state: zero-norm amplitude matrix")
    return TwoPhotonPureState(state.space_a, state.space_b, state.amplitudes / n)


def schmidt_spectrum(state: TwoPhotonPureState) -> SchmidtSpectrum:
    """Squared singular values of the amplitude matrix, largest first."""
    if not state.is_normalized():
        raise DegenerateStateError(
            f"schmidt_spectrum needs a normalized state (norm={state.norm:.15g})")
    s = np.linalg.svd(state.amplitudes, compute_uv=False)
    lam = np.clip(s**2, 0.0, 1.0)
    return SchmidtSpectrum(np.sort(lam)[::-1])


def _parity_mask(ells: np.ndarray, parity: Parity) -> np.ndarray:
    if parity == "even":
        return ells % 2 == 0
    if parity == "odd":
        return ells % 2 != 0
    raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")


def parity_project(state: TwoPhotonPureState, photon: Photon,
                   parity: Parity) -> TwoPhotonPureState:
    """Zero the amplitudes whose ``photon`` index has the other parity.

    The result is left unnormalized; its squared norm is the weight of the
    selected sector.
    """
    amps = state.amplitudes.copy()
    if photon == "A":
        amps[~_parity_mask(state.space_a.ells, parity), :] = 0
    elif photon == "B":
        amps[:, ~_parity_mask(state.space_b.ells, parity)] = 0
    else:
        raise ValueError(f"photon must be 'A' or 'B', got {photon!r}")
    return TwoPhotonPureState(state.space_a, state.space_b, amps)


def parity_project_density(rho: TwoPhotonDensity, photon: Photon,
                           parity: Parity) -> TwoPhotonDensity:
    """``P rho P`` for the parity projector ``P`` on one photon (unnormalized)."""
    keep_a = np.ones(rho.space_a.dim, dtype=bool)
    keep_b = np.ones(rho.space_b.dim, dtype=bool)
    if photon == "A":
        keep_a = _parity_mask(rho.space_a.ells, parity)
    elif photon == "B":
        keep_b = _parity_mask(rho.space_b.ells, parity)
    else:
        raise ValueError(f"photon must be 'A' or 'B', got {photon!r}")
    keep = np.outer(keep_a, keep_b).reshape(-1)
    m = rho.matrix * np.outer(keep, keep)
    return TwoPhotonDensity(rho.space_a, rho.space_b, m)


def fidelity_pure(rho: TwoPhotonDensity, target: TwoPhotonPureState) -> float:
    """``<target| rho |target>``."""
    if not rho.same_spaces(target):
        raise DimensionMismatchError("rho and target live on different mode spaces")
    if not target.is_normalized():
        raise DegenerateStateError("target state must be normalized")
    v = target.vector
    return float(np.real(v.conj() @ rho.matrix @ v))


def mix(p: float, rho1: TwoPhotonDensity, rho2: TwoPhotonDensity) -> TwoPhotonDensity:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"mixing weight must lie in [0, 1], got {p}")
    if not rho1.same_spaces(rho2):
        raise DimensionMismatchError("cannot mix states on different mode spaces")
    if p == 1.0:
        return rho1
    if p == 0.0:
        return rho2
    return TwoPhotonDensity(rho1.space_a, rho1.space_b, p * rho1.matrix + (1 - p) * rho2.matrix)
