import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdrouter.measurement import (CoincidenceConfig, CoincidenceMatrix, Projector,
                                  coincidence_probability, expected_counts, sample_counts,
                                  scan_oam_basis, superposition_projector)
from hdrouter.modes import (DimensionMismatchError, KetVector, ModeSpace, TwoPhotonDensity,
                            TwoPhotonPureState, normalize)
from hdrouter.router import SorterSettings, route_photon_b

L5 = ModeSpace(5)


@pytest.fixture
def psi11():
    return TwoPhotonPureState.anti_correlated(L5, np.ones(11) / math.sqrt(11)).density()


class TestCoincidenceProbability:
    def test_diagonal_term(self, psi11):
        p = coincidence_probability(psi11, Projector.mode(L5, 1), Projector.mode(L5, -1))
        assert p == pytest.approx(1 / 11, abs=1e-14)

    def test_anti_correlation(self, psi11):
        p = coincidence_probability(psi11, Projector.mode(L5, 1), Projector.mode(L5, 2))
        assert p == 0

    def test_superpositions(self, psi11):
        a = superposition_projector(L5, 0, 2, 0.0)
        b = superposition_projector(L5, 0, -2, 0.0)
        # oracle: |<a b|psi>|^2 by hand; only |0,0> and |2,-2> overlap
        c = 1 / math.sqrt(11)
        oracle = abs(0.5 * c + 0.5 * c) ** 2
        assert oracle == pytest.approx(1 / 11)
        assert coincidence_probability(psi11, a, b) == pytest.approx(oracle, abs=1e-14)

    def test_dimension_mismatch(self, psi11):
        with pytest.raises(DimensionMismatchError):
            coincidence_probability(psi11, Projector.mode(ModeSpace(2), 0), Projector.mode(L5, 0))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_complete_basis_sums_to_trace(self, seed):
        rng = np.random.default_rng(seed)
        s = ModeSpace(1)
        m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        rho = TwoPhotonDensity(s, s, 0.7 * normalize(TwoPhotonPureState(s, s, m)).density().matrix)
        # random product basis built from two unitaries
        ua = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))[0]
        ub = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))[0]
        total = sum(coincidence_probability(rho, Projector(KetVector(s, ua[:, i])),
                                            Projector(KetVector(s, ub[:, j])))
                    for i in range(3) for j in range(3))
        assert total == pytest.approx(0.7, abs=1e-9)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
    def test_global_phase_invariance(self, ga, gb):
        rho = TwoPhotonPureState.anti_correlated(L5, np.arange(1, 12) / np.linalg.norm(np.arange(1, 12))).density()
        a = superposition_projector(L5, 1, 3, 0.4)
        b = superposition_projector(L5, -1, -3, 1.1)
        a2 = Projector(KetVector(L5, a.ket.amplitudes * np.exp(1j * ga)))
        b2 = Projector(KetVector(L5, b.ket.amplitudes * np.exp(1j * gb)))
        assert coincidence_probability(rho, a2, b2) == pytest.approx(
            coincidence_probability(rho, a, b), abs=1e-14)


class TestExpectedCounts:
    def test_zero(self):
        assert expected_counts(0.0, CoincidenceConfig(1000, 1, 1, 0, 2)) == 0

    def test_arithmetic(self):
        assert expected_counts(0.5, CoincidenceConfig(1000, 1, 1, 0, 2)) == pytest.approx(1000)
        assert expected_counts(0.5, CoincidenceConfig(1000, 1, 1, 1, 2)) == pytest.approx(1002)

    def test_rate_scale(self):
        assert expected_counts(0.5, CoincidenceConfig(1000, 0.5, 1, 0, 2), 0.5) == pytest.approx(250)
        with pytest.raises(ValueError):
            expected_counts(0.5, CoincidenceConfig(), 0.0)

    @pytest.mark.parametrize("kw", [dict(pair_rate=-1), dict(integration_time=0),
                                    dict(efficiency_a=0), dict(efficiency_b=1.5)])
    def test_invalid_config(self, kw):
        with pytest.raises(ValueError):
            CoincidenceConfig(**kw)


class TestSampling:
    def test_zero_mean(self):
        rng = np.random.default_rng(0)
        assert all(sample_counts(0.0, rng) == 0 for _ in range(100))

    def test_poisson_moments(self):
        draws = sample_counts(np.full(10_000, 1e6), np.random.default_rng(11))
        assert draws.mean() == pytest.approx(1e6, rel=0.005)
        assert 0.95 <= draws.var() / draws.mean() <= 1.05

    def test_deterministic(self):
        a = sample_counts(np.full(50, 3.0), np.random.default_rng(5))
        b = sample_counts(np.full(50, 3.0), np.random.default_rng(5))
        assert np.array_equal(a, b)

    def test_negative_mean(self):
        with pytest.raises(ValueError):
            sample_counts(-1.0, np.random.default_rng())


class TestScan:
    def test_ideal_anti_diagonal(self, psi11):
        m = scan_oam_basis(psi11, cfg=CoincidenceConfig(1e6, 1, 1, 0, 10), seed=3)
        off = ~np.eye(11, dtype=bool)[:, ::-1]
        assert np.all(m.counts[off] == 0)
        assert np.all(m.counts[~off] > 0)

    def test_routed_even_rows(self, psi11):
        cfg = CoincidenceConfig(1e6, 1, 1, 2.0, 10)
        port_b = route_photon_b(psi11, SorterSettings()).port_b
        m = scan_oam_basis(port_b, cfg=cfg, seed=3)
        for i, la in enumerate(m.ells_a):
            j = list(m.ells_b).index(-la)
            if la % 2 == 0:
                assert m.counts[i, j] > 1e5
            else:
                # only accidentals, mean 20
                assert m.counts[i, j] < 60

    def test_sparse_regime_normalization(self, psi11):
        m = scan_oam_basis(psi11, cfg=CoincidenceConfig(5.0, 1, 1, 0, 1), seed=1)
        assert m.counts.max() < 10
        if m.total > 0:
            assert m.normalized().counts.sum() == pytest.approx(1.0, abs=1e-9)

    def test_exact_mode_is_probability_matrix(self):
        rng = np.random.default_rng(0)
        s = ModeSpace(2)
        m = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        rho = normalize(TwoPhotonPureState(s, s, m)).density()
        cfg = CoincidenceConfig(1.0, 1, 1, 0, 1)
        scan = scan_oam_basis(rho, cfg=cfg, exact=True)
        probs = np.real(np.diag(rho.matrix)).reshape(5, 5)
        np.testing.assert_allclose(scan.counts, probs, atol=1e-15)

    def test_sub_range_uses_same_streams(self, psi11):
        cfg = CoincidenceConfig(1e4, 1, 1, 1.0, 1)
        full = scan_oam_basis(psi11, cfg=cfg, seed=9)
        part = scan_oam_basis(psi11, range(-2, 3), range(-3, 1), cfg, seed=9)
        np.testing.assert_array_equal(part.counts, full.counts[3:8, 2:6])

    def test_reproducible(self, psi11):
        cfg = CoincidenceConfig(1e3, 1, 1, 1.0, 1)
        assert scan_oam_basis(psi11, cfg=cfg, seed=4) == scan_oam_basis(psi11, cfg=cfg, seed=4)
        assert scan_oam_basis(psi11, cfg=cfg, seed=4) != scan_oam_basis(psi11, cfg=cfg, seed=5)

    def test_range_check(self, psi11):
        with pytest.raises(ValueError):
            scan_oam_basis(psi11, range(-6, 0))


class TestSuperpositionProjector:
    def test_zero_two(self):
        p = superposition_projector(L5, 0, 2, 0.0)
        assert p.ket.amplitude(0) == pytest.approx(1 / math.sqrt(2))
        assert p.ket.amplitude(2) == pytest.approx(1 / math.sqrt(2))

    def test_orthogonal_phase(self):
        a = superposition_projector(L5, 0, 2, 0.0).ket.amplitudes
        b = superposition_projector(L5, 0, 2, math.pi).ket.amplitudes
        assert abs(np.vdot(a, b)) < 1e-15

    def test_mixed_sign_modes(self):
        p = superposition_projector(L5, 1, -3, math.pi / 2)
        assert p.ket.norm == pytest.approx(1.0, abs=1e-12)
        assert abs(np.vdot(KetVector.basis(L5, 1).amplitudes, p.ket.amplitudes)) == pytest.approx(
            1 / math.sqrt(2))
        assert abs(p.ket.amplitude(-3)) == pytest.approx(1 / math.sqrt(2))

    def test_same_mode(self):
        with pytest.raises(ValueError):
            superposition_projector(L5, 2, 2)


def test_matrix_rejects_negative():
    with pytest.raises(ValueError):
        CoincidenceMatrix([0], [0], [[-1]])
