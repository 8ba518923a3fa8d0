import numpy as np
import pytest

from dephasim.errors import SpecificationError
from dephasim.lattice import (GOLDEN_MEAN, LatticeSpec, QuasiperiodicSpec,
                              build_hamiltonian, center_index, centered_positions,
                              inverse_participation_ratio, lattice_from_quasiperiodic,
                              quasiperiodic_couplings, spectral_report)


class TestLatticeSpec:
    def test_homogeneous_shapes(self):
        spec = LatticeSpec.homogeneous(7, 2.0, dephasing_rate=0.5)
        assert spec.n_sites == 7
        assert spec.couplings.shape == (6,)
        assert np.all(spec.couplings == 2.0)
        assert np.all(spec.dephasing_rates == 0.5)

    def test_length_mismatch_rejected(self):
        with pytest.raises(SpecificationError):
            LatticeSpec(detunings=np.zeros(4), couplings=np.zeros(4), dephasing_rates=np.zeros(4))
        with pytest.raises(SpecificationError):
            LatticeSpec(detunings=np.zeros(4), couplings=np.zeros(3), dephasing_rates=np.zeros(3))

    def test_negative_rate_rejected(self):
        with pytest.raises(SpecificationError):
            LatticeSpec.homogeneous(3, 1.0, dephasing_rate=-0.1)

    def test_single_site_rejected(self):
        with pytest.raises(SpecificationError):
            LatticeSpec(detunings=[0.0], couplings=[], dephasing_rates=[0.0])

    def test_two_sites_permitted(self):
        assert LatticeSpec.homogeneous(2, 1.0).n_sites == 2

    def test_inf_norm_matches_numpy(self):
        rng = np.random.default_rng(3)
        spec = LatticeSpec(detunings=rng.normal(size=6), couplings=rng.normal(size=5),
                           dephasing_rates=np.zeros(6))
        h = build_hamiltonian(spec)
        assert spec.hamiltonian_inf_norm() == pytest.approx(
            np.linalg.norm(h, ord=np.inf), rel=1e-14)


class TestHamiltonian:
    def test_two_site(self):
        spec = LatticeSpec(detunings=[0.0, 0.0], couplings=[1.3], dephasing_rates=[0.0, 0.0])
        assert np.array_equal(build_hamiltonian(spec), [[0.0, 1.3], [1.3, 0.0]])

    def test_three_site_explicit(self):
        spec = LatticeSpec(detunings=[1.0, 2.0, 3.0], couplings=[4.0, 5.0],
                           dephasing_rates=[0.0] * 3)
        expected = [[1.0, 4.0, 0.0], [4.0, 2.0, 5.0], [0.0, 5.0, 3.0]]
        assert np.array_equal(build_hamiltonian(spec), expected)

    def test_seven_site_homogeneous(self):
        j = 2 * np.pi * 8.3e6
        h = build_hamiltonian(LatticeSpec.homogeneous(7, j))
        assert np.all(np.diag(h) == 0.0)
        assert np.all(np.diag(h, 1) == j)
        assert np.array_equal(h, h.T)

    def test_tridiagonal_structure_random(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            n = rng.integers(2, 12)
            spec = LatticeSpec(detunings=rng.normal(size=n), couplings=rng.normal(size=n - 1),
                               dephasing_rates=rng.uniform(0, 1, size=n))
            h = build_hamiltonian(spec)
            assert np.array_equal(h, h.T)
            beyond = np.triu(h, 2)
            assert np.all(beyond == 0.0)


class TestQuasiperiodicCouplings:
    def test_zero_modulation_is_uniform(self):
        q = QuasiperiodicSpec(n_sites=9, a=1.4, b=0.0, alpha=0.37, theta=2.0)
        assert np.allclose(quasiperiodic_couplings(q), 1.4, atol=0.0)

    def test_center_bond_value(self):
        # The bond whose right-hand site is the chain center has index 0,
        # so theta=0 gives a + b there.
        q = QuasiperiodicSpec(n_sites=3, a=1.0, b=0.7)
        g = quasiperiodic_couplings(q)
        assert g[0] == pytest.approx(1.7, abs=1e-15)

    def test_split_of_total_coupling(self):
        total = 2 * np.pi * 8.3e6
        q = QuasiperiodicSpec.from_kappa(7, 0.3, total)
        assert q.a == pytest.approx(total / 1.3, rel=1e-14)
        assert q.b == pytest.approx(0.3 * total / 1.3, rel=1e-14)
        assert q.kappa == pytest.approx(0.3, rel=1e-14)
        g = quasiperiodic_couplings(q)
        j = np.arange(1, 7) - center_index(7)
        assert np.allclose(g, q.a + q.b * np.cos(2 * np.pi * q.alpha * j), rtol=1e-14)

    def test_theta_periodic(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            alpha, theta = rng.uniform(0, 1), rng.uniform(-5, 5)
            a = quasiperiodic_couplings(QuasiperiodicSpec(8, 1.0, 0.6, alpha, theta))
            b = quasiperiodic_couplings(QuasiperiodicSpec(8, 1.0, 0.6, alpha, theta + 2 * np.pi))
            assert np.allclose(a, b, atol=1e-12)

    def test_negated_modulation_equals_half_turn(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            alpha, theta, b = rng.uniform(0, 1), rng.uniform(-5, 5), rng.uniform(0, 2)
            q = QuasiperiodicSpec(9, 1.5, b, alpha, theta + np.pi)
            j = np.arange(1, 9) - center_index(9)
            negated = 1.5 + (-b) * np.cos(2 * np.pi * alpha * j + theta)
            assert np.allclose(quasiperiodic_couplings(q), negated, atol=1e-12)

    def test_subcritical_modulation_positive(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            q = QuasiperiodicSpec(rng.integers(2, 60), a=1.0, b=rng.uniform(0, 0.999),
                                  alpha=rng.uniform(0, 1), theta=rng.uniform(0, 2 * np.pi))
            assert np.all(quasiperiodic_couplings(q) > 0)

    def test_validation(self):
        with pytest.raises(SpecificationError):
            QuasiperiodicSpec(5, a=0.0, b=0.1)
        with pytest.raises(SpecificationError):
            QuasiperiodicSpec(5, a=1.0, b=-0.1)
        with pytest.raises(SpecificationError):
            QuasiperiodicSpec.from_kappa(5, -0.2, 1.0)
        with pytest.raises(SpecificationError):
            QuasiperiodicSpec.from_kappa(5, 0.3, 0.0)

    def test_lattice_from_quasiperiodic(self):
        q = QuasiperiodicSpec.from_kappa(7, 0.3, 1.0)
        spec = lattice_from_quasiperiodic(q, dephasing_rate=2.5)
        assert np.array_equal(spec.couplings, quasiperiodic_couplings(q))
        assert np.all(spec.dephasing_rates == 2.5)
        assert np.all(spec.detunings == 0.0)


class TestCenteredIndexing:
    def test_center_of_odd_chain(self):
        assert center_index(7) == 3
        assert centered_positions(7).tolist() == [-3, -2, -1, 0, 1, 2, 3]

    def test_center_of_even_chain(self):
        assert center_index(2) == 0
        assert centered_positions(2).tolist() == [0, 1]


class TestSpectralReport:
    def test_two_site_analytic(self):
        report = spectral_report(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.allclose(report.eigenvalues, [-1.0, 1.0], atol=1e-14)
        assert np.allclose(report.ipr, [0.5, 0.5], atol=1e-14)

    def test_decoupled_sites_fully_localized(self):
        spec = LatticeSpec(detunings=[0.3, 1.1, -0.4, 2.2], couplings=[0.0] * 3,
                           dephasing_rates=[0.0] * 4)
        report = spectral_report(build_hamiltonian(spec))
        assert np.allclose(report.ipr, 1.0, atol=1e-14)

    def test_eigensystem_residual_and_order(self):
        rng = np.random.default_rng(13)
        spec = LatticeSpec(detunings=rng.normal(size=12), couplings=rng.normal(size=11),
                           dephasing_rates=np.zeros(12))
        h = build_hamiltonian(spec)
        report = spectral_report(h)
        assert np.all(np.diff(report.eigenvalues) >= 0)
        residual = h @ report.eigenvectors - report.eigenvectors * report.eigenvalues
        assert np.linalg.norm(residual) <= 1e-10 * np.linalg.norm(h)
        assert np.all(report.ipr >= 1.0 / 12 - 1e-12)
        assert np.all(report.ipr <= 1.0 + 1e-12)

    def test_rejects_nonsymmetric(self):
        with pytest.raises(SpecificationError):
            spectral_report(np.array([[0.0, 1.0], [0.5, 0.0]]))
        with pytest.raises(SpecificationError):
            spectral_report(np.zeros((2, 3)))

    def test_extended_versus_localized_contrast(self):
        # Fibonacci-length chain: subcritical modulation keeps every state
        # extended (small IPR); supercritical modulation localizes some.
        extended = spectral_report(build_hamiltonian(lattice_from_quasiperiodic(
            QuasiperiodicSpec.from_kappa(89, 0.5, 1.0))))
        localized = spectral_report(build_hamiltonian(lattice_from_quasiperiodic(
            QuasiperiodicSpec.from_kappa(89, 2.0, 1.0))))
        assert extended.ipr.max() < 0.3
        assert extended.ipr.mean() < 0.05
        assert localized.ipr.max() > 0.4
        assert localized.ipr.max() > extended.ipr.max()
        assert localized.ipr.mean() > 2.5 * extended.ipr.mean()

    def test_ipr_helper_matches_definition(self):
        rng = np.random.default_rng(17)
        v = rng.normal(size=(6, 6))
        v /= np.linalg.norm(v, axis=0)
        assert np.allclose(inverse_participation_ratio(v), np.sum(v ** 4, axis=0))


def test_golden_mean_value():
    assert GOLDEN_MEAN == pytest.approx((np.sqrt(5) - 1) / 2, rel=1e-15)
