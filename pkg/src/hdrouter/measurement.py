"""Projective coincidence measurements and Poissonian counting.

Every sampled count draws from its own generator, derived from the run seed
and the count's coordinates, so scans are reproducible regardless of the
order (or the worker) in which cells are evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence, Union

import numpy as np

from .modes import (NORM_TOL, DimensionMismatchError, KetVector, ModeSpace,
                    TwoPhotonDensity)

SeedLike = Union[int, np.random.SeedSequence]


def substream(seed: SeedLike, *keys: int) -> np.random.SeedSequence:
    """Child seed sequence addressed by non-negative integer ``keys``."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + keys)
    return np.random.SeedSequence(int(seed), spawn_key=keys)


def stream_rng(seed: SeedLike, *keys: int) -> np.random.Generator:
    return np.random.default_rng(substream(seed, *keys))


@dataclass(frozen=True, eq=False)
class Projector:
    """Rank-one analyzer setting (SLM hologram + single-mode fibre)."""

    ket: KetVector

    def __post_init__(self):
        if abs(self.ket.norm - 1.0) > NORM_TOL:
            raise ValueError(f"projector ket must be normalized (norm={self.ket.norm})")

    @classmethod
    def mode(cls, space: ModeSpace, ell: int) -> Projector:
        return cls(KetVector.basis(space, ell))

    @property
    def space(self) -> ModeSpace:
        return self.ket.space


@dataclass(frozen=True)
class CoincidenceConfig:
    pair_rate: float = 1.0e5  # pairs / s
    efficiency_a: float = 1.0
    efficiency_b: float = 1.0
    accidental_rate: float = 0.0  # counts / s, per projector setting
    integration_time: float = 1.0  # s

    def __post_init__(self):
        if self.pair_rate < 0 or self.accidental_rate < 0:
            raise ValueError("rates must be non-negative")
        if not self.integration_time > 0:
            raise ValueError("integration_time must be positive")
        for name in ("efficiency_a", "efficiency_b"):
            eta = getattr(self, name)
            if not 0.0 < eta <= 1.0:
                raise ValueError(f"{name} = {eta} outside (0, 1]")


@dataclass(frozen=True, eq=False)
class CoincidenceMatrix:
    ells_a: np.ndarray
    ells_b: np.ndarray
    counts: np.ndarray
    normalization: Literal["raw", "unit-sum"] = "raw"

    def __post_init__(self):
        counts = np.asarray(self.counts)
        object.__setattr__(self, "ells_a", np.asarray(self.ells_a, dtype=int))
        object.__setattr__(self, "ells_b", np.asarray(self.ells_b, dtype=int))
        if counts.shape != (len(self.ells_a), len(self.ells_b)):
            raise ValueError("counts shape does not match the index ranges")
        if np.any(counts < 0):
            raise ValueError("coincidence counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def normalized(self) -> CoincidenceMatrix:
        total = self.total
        if total == 0:
            raise ValueError("cannot normalize an all-zero coincidence matrix")
        return CoincidenceMatrix(self.ells_a, self.ells_b, self.counts / total, "unit-sum")

    def __eq__(self, other):
        if not isinstance(other, CoincidenceMatrix):
            return NotImplemented
        return (self.normalization == other.normalization
                and np.array_equal(self.ells_a, other.ells_a)
                and np.array_equal(self.ells_b, other.ells_b)
                and np.array_equal(self.counts, other.counts))


def product_probabilities(rho: TwoPhotonDensity, kets_a: np.ndarray,
                          kets_b: np.ndarray) -> np.ndarray:
    """Vectorised ``<a b| rho |a b>`` for stacked amplitude rows ``kets_a[k], kets_b[k]``."""
    kets_a = np.atleast_2d(kets_a)
    kets_b = np.atleast_2d(kets_b)
    joint = np.einsum("ki,kj->kij", kets_a, kets_b).reshape(len(kets_a), -1)
    return np.real(np.einsum("ki,ij,kj->k", joint.conj(), rho.matrix, joint))


def coincidence_probability(rho: TwoPhotonDensity, proj_a: Projector,
                            proj_b: Projector) -> float:
    if proj_a.space != rho.space_a or proj_b.space != rho.space_b:
        raise DimensionMismatchError("projectors do not match the state's mode spaces")
    p = product_probabilities(rho, proj_a.ket.amplitudes, proj_b.ket.amplitudes)[0]
    return float(max(p, 0.0))


def expected_counts(prob, cfg: CoincidenceConfig, rate_scale: float = 1.0):
    """Mean coincidences ``(R0 * scale * eta_A * eta_B * p + accidentals) * T``."""
    if not 0 < rate_scale <= 1:
        raise ValueError(f"rate_scale {rate_scale} outside (0, 1]")
    signal = cfg.pair_rate * rate_scale * cfg.efficiency_a * cfg.efficiency_b
    return (signal * np.asarray(prob) + cfg.accidental_rate) * cfg.integration_time


def sample_counts(mu, rng: np.random.Generator):
    if np.any(np.asarray(mu) < 0):
        raise ValueError("Poisson mean must be non-negative")
    return rng.poisson(mu)


def _as_range(space: ModeSpace, ells: Sequence[int] | None) -> np.ndarray:
    if ells is None:
        return space.ells
    ells = np.asarray(list(ells), dtype=int)
    for ell in ells:
        space.index(ell)
    return ells


SCAN_STREAM = 1


def scan_oam_basis(rho: TwoPhotonDensity, range_a=None, range_b=None,
                   cfg: CoincidenceConfig | None = None, seed: SeedLike = 0, *,
                   exact: bool = False, rate_scale: float = 1.0) -> CoincidenceMatrix:
    """Coincidences for every ``|l_A> x |l_B>`` setting in the given ranges.

    With ``exact=True`` the expected counts are returned instead of Poisson
    draws (the infinite-statistics limit used by the oracle tests).
    """
    cfg = CoincidenceConfig() if cfg is None else cfg
    ells_a = _as_range(rho.space_a, range_a)
    ells_b = _as_range(rho.space_b, range_b)
    ia = ells_a + rho.space_a.L
    ib = ells_b + rho.space_b.L
    db = rho.space_b.dim
    diag = np.real(np.diag(rho.matrix)).reshape(rho.space_a.dim, db)
    probs = np.clip(diag[np.ix_(ia, ib)], 0.0, None)
    mu = expected_counts(probs, cfg, rate_scale)
    if exact:
        counts = mu
    else:
        # streams keyed by absolute mode indices, independent of the scan window
        counts = np.empty(mu.shape, dtype=np.int64)
        for i, a in enumerate(ia):
            for j, b in enumerate(ib):
                counts[i, j] = stream_rng(seed, SCAN_STREAM, int(a), int(b)).poisson(mu[i, j])
    return CoincidenceMatrix(ells_a, ells_b, counts)


def superposition_projector(space: ModeSpace, ell: int, ell2: int,
                            gamma: float = 0.0) -> Projector:
    """``(|l> + exp(i gamma) |l'>) / sqrt 2``."""
    if ell == ell2:
        raise ValueError("superposition needs two distinct modes")
    amps = np.zeros(space.dim, dtype=complex)
    amps[space.index(ell)] = 1 / math.sqrt(2)
    amps[space.index(ell2)] = np.exp(1j * gamma) / math.sqrt(2)
    return Projector(KetVector(space, amps))
