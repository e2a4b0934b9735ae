import numpy as np
import pytest

from rotorecho import (Coupling, DensityMatrix, RotorParams, StateVector, Torus,
                       UnitaryMatrix, allegiance_series, build_floquet,
                       coupling_family, dense_unitary, echo_stats,
                       brute_force_mean_f2, exact_mean_f, exact_mean_f2,
                       overlap_data, spectral_decompose)
from rotorecho.echo import (DegenerateSpectrumError, EchoError, EchoSeries,
                            batch_standard_error, effective_dimension, pair_family)
from rotorecho.rmt import haar_unitary
from rotorecho.rotor import Lattice

from conftest import random_density_matrix, random_state


def torus_pair(n, eps=0.1, k=5.0, shift=0.1):
    base = RotorParams(k=k, hbar_eff=2 * np.pi / n, shift=shift, geometry=Torus(n))
    return build_floquet(base), build_floquet(base.perturbed(eps))


def momentum_zero(n):
    return StateVector.basis_state(n, n // 2)


def haar_overlap_data(n, omega, seed):
    rng = np.random.default_rng(seed)
    du = spectral_decompose(UnitaryMatrix(haar_unitary(n, rng)))
    dp = spectral_decompose(UnitaryMatrix(haar_unitary(n, rng)))
    return overlap_data(du, dp, omega)


class TestEchoSeries:
    def test_starts_at_one(self):
        with pytest.raises(EchoError):
            EchoSeries(np.array([0, 1]), np.array([0.5, 0.5]), np.array([0.25, 0.25]))

    def test_f_squared_consistency(self):
        f = np.array([1.0, 0.5 + 0.1j])
        with pytest.raises(EchoError):
            EchoSeries(np.array([0, 1]), f, np.array([1.0, 0.9]))
        series = EchoSeries.from_amplitudes(f)
        assert series.F[1] == pytest.approx(abs(f[1]) ** 2, abs=1e-15)

    def test_conjugate_pair(self):
        series = EchoSeries.from_amplitudes(np.array([1.0, 0.3 + 0.4j]))
        swapped = series.conjugate()
        assert swapped.f[1] == pytest.approx(0.3 - 0.4j)
        assert swapped.F[1] == series.F[1]


class TestAllegiance:
    def test_identity_when_unperturbed(self):
        u0, _ = torus_pair(64, eps=0.0)
        series = allegiance_series(u0, u0, momentum_zero(64), 600)
        assert np.max(np.abs(series.F - 1.0)) < 1e-12

    def test_pure_and_projector_agree(self):
        u0, u1 = torus_pair(32)
        psi = momentum_zero(32)
        a = allegiance_series(u0, u1, psi, 200)
        b = allegiance_series(u0, u1, DensityMatrix.pure(psi), 200)
        assert np.max(np.abs(a.f - b.f)) < 1e-10

    def test_mixed_state_is_weighted_sum(self, rng):
        u0, u1 = torus_pair(32)
        psi1, psi2 = momentum_zero(32), StateVector.basis_state(32, 17)
        w1, w2 = 0.7, 0.3
        omega = DensityMatrix(w1 * np.outer(psi1.amplitudes, psi1.amplitudes.conj())
                              + w2 * np.outer(psi2.amplitudes, psi2.amplitudes.conj()))
        mixed = allegiance_series(u0, u1, omega, 150)
        s1 = allegiance_series(u0, u1, psi1, 150)
        s2 = allegiance_series(u0, u1, psi2, 150)
        assert np.max(np.abs(mixed.f - (w1 * s1.f + w2 * s2.f))) < 1e-10

    def test_phase_invariance_of_omega(self):
        # conjugation by any unitary commuting with both propagators must leave
        # F untouched; for two free rotors every momentum-diagonal unitary works
        n = 32
        base = RotorParams(k=0.0, hbar_eff=2 * np.pi / n, shift=0.0,
                           geometry=Torus(n))
        u0 = build_floquet(base)
        u1 = build_floquet(base.perturbed(0.2))
        rng = np.random.default_rng(5)
        omega = random_density_matrix(n, rng)
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, n))
        rotated = DensityMatrix((phases[:, None] * omega.elements) * phases.conj())
        a = allegiance_series(u0, u1, omega, 200)
        b = allegiance_series(u0, u1, rotated, 200)
        assert np.max(np.abs(a.F - b.F)) < 1e-10

    def test_family_matches_single_pairs(self):
        n = 32
        base = RotorParams(k=5.0, hbar_eff=2 * np.pi / n, shift=0.0,
                           geometry=Torus(n))
        shifts = [0.0, 0.1, 0.25]
        fam = coupling_family(base, shifts, momentum_zero(n), 100)
        for (i, j), series in fam.items():
            u_bra = build_floquet(base.perturbed(shifts[j]))
            u_ket = build_floquet(base.perturbed(shifts[i]))
            single = allegiance_series(u_bra, u_ket, momentum_zero(n), 100)
            assert np.max(np.abs(series.f - single.f)) < 1e-12

    def test_occupation_tracking(self):
        n = 256
        base = RotorParams(k=5.0, hbar_eff=2 * np.pi / n, shift=0.1,
                           geometry=Torus(n))
        ops = [build_floquet(base), build_floquet(base.perturbed(0.1))]
        fam = pair_family(ops, momentum_zero(n), 600, [(1, 0)],
                          track_occupation=[0], occupation_start=300)
        # chaotic spreading covers the whole torus
        assert fam.occupation_pr[0] > 0.5 * n


class TestEchoStats:
    def test_constant_series(self):
        series = EchoSeries.from_amplitudes(np.ones(1200, dtype=complex))
        st = echo_stats(series, 100)
        assert st.mean_f == 1.0 and st.std_f == 0.0
        assert st.window_len == 1100

    def test_window_too_short(self):
        series = EchoSeries.from_amplitudes(np.ones(600, dtype=complex))
        with pytest.raises(EchoError):
            echo_stats(series, 500)

    def test_batch_standard_error_scaling(self, rng):
        x = rng.standard_normal(10000)
        se = batch_standard_error(x, n_batches=25)
        assert se == pytest.approx(1 / np.sqrt(10000), rel=0.5)


class TestSpectralDecompose:
    def test_identity(self):
        dec = spectral_decompose(UnitaryMatrix(np.eye(8, dtype=complex)))
        assert np.max(np.abs(dec.eigenphases)) < 1e-12

    def test_free_rotor_phases(self):
        base = RotorParams(k=0.0, hbar_eff=2 * np.pi / 8, shift=0.0,
                           geometry=Torus(8))
        op = build_floquet(base)
        dec = spectral_decompose(dense_unitary(op))
        expected = np.sort(np.angle(op.free_phases))
        assert np.allclose(np.sort(dec.eigenphases), expected, atol=1e-10)

    def test_reconstruction_and_orthonormality(self, rng):
        u = UnitaryMatrix(haar_unitary(64, rng))
        dec = spectral_decompose(u)
        assert np.max(np.abs(dec.reconstruct() - u.elements)) < 1e-8
        v = dec.eigenvectors
        assert np.max(np.abs(v.conj().T @ v - np.eye(64))) < 1e-10

    def test_chaotic_spacings_repel(self):
        # nearest-neighbor spacing: closer to the Wigner surmise than to
        # Poisson (chi-square on a fixed histogram)
        u0, _ = torus_pair(256, shift=0.15)
        dec = spectral_decompose(dense_unitary(u0))
        phases = np.sort(dec.eigenphases)
        s = np.diff(phases) * len(phases) / (2 * np.pi)
        edges = np.linspace(0, 3, 13)
        hist, _ = np.histogram(s, bins=edges, density=True)
        mid = 0.5 * (edges[1:] + edges[:-1])
        wigner = (32 / np.pi**2) * mid**2 * np.exp(-4 * mid**2 / np.pi)
        poisson = np.exp(-mid)
        chi_w = np.sum((hist - wigner) ** 2)
        chi_p = np.sum((hist - poisson) ** 2)
        assert chi_w < chi_p


class TestOverlapData:
    def test_same_operator_gives_identity_overlap(self):
        u0, _ = torus_pair(32)
        dec = spectral_decompose(dense_unitary(u0))
        data = overlap_data(dec, dec, momentum_zero(32))
        assert np.max(np.abs(np.abs(data.o) - np.eye(32))) < 1e-10
        # B collapses to omega expressed in that eigenbasis
        omega_basis = (dec.eigenvectors.conj().T
                       @ DensityMatrix.pure(momentum_zero(32)).elements
                       @ dec.eigenvectors)
        assert np.max(np.abs(data.b - omega_basis)) < 1e-10

    def test_overlap_matrix_unitary(self):
        u0, u1 = torus_pair(64)
        d0 = spectral_decompose(dense_unitary(u0))
        d1 = spectral_decompose(dense_unitary(u1))
        data = overlap_data(d0, d1, momentum_zero(64))
        assert np.max(np.abs(data.o.conj().T @ data.o - np.eye(64))) < 1e-8

    def test_torus_neff_fills_space(self):
        u0, u1 = torus_pair(64)
        d0 = spectral_decompose(dense_unitary(u0))
        d1 = spectral_decompose(dense_unitary(u1))
        data = overlap_data(d0, d1, momentum_zero(64))
        assert data.n_eff >= 60

    def test_effective_dimension_counts(self):
        assert effective_dimension(np.array([0.5, 0.5, 0.0]), 1e-6) == 2
        assert effective_dimension(np.ones(8) / 8, 1e-6) == 8


class TestExactMeans:
    def test_trivial_pure_eigenstate(self):
        u0, _ = torus_pair(16, eps=0.0, shift=0.2)
        dec = spectral_decompose(dense_unitary(u0))
        omega = StateVector(dec.eigenvectors[:, 3])
        data = overlap_data(dec, dec, omega)
        assert exact_mean_f(data) == pytest.approx(1.0, abs=1e-10)
        assert exact_mean_f2(data) == pytest.approx(1.0, abs=1e-10)

    def test_variance_nonnegative(self, rng):
        data = haar_overlap_data(24, random_state(24, rng), 81)
        mean = exact_mean_f(data)
        mean2 = exact_mean_f2(data)
        assert mean2 >= mean**2 - 1e-12

    @pytest.mark.parametrize("n,seed", [(8, 0), (12, 1), (16, 2)])
    def test_nine_sets_match_brute_force_haar(self, n, seed, rng):
        omega = random_density_matrix(n, rng, rank=min(3, n))
        data = haar_overlap_data(n, omega, seed)
        assert exact_mean_f2(data) == pytest.approx(brute_force_mean_f2(data),
                                                    abs=1e-10)

    def test_nine_sets_match_brute_force_rotor(self):
        u0, u1 = torus_pair(16, eps=0.3)
        d0 = spectral_decompose(dense_unitary(u0))
        d1 = spectral_decompose(dense_unitary(u1))
        data = overlap_data(d0, d1, momentum_zero(16))
        assert exact_mean_f2(data) == pytest.approx(brute_force_mean_f2(data),
                                                    abs=1e-10)

    def test_time_domain_agreement(self):
        # spectral infinite-time averages vs the windowed series statistics
        n = 64
        u0, u1 = torus_pair(n)
        series = allegiance_series(u0, u1, momentum_zero(n), 5500)
        window = series.F[series.times >= 500]
        d0 = spectral_decompose(dense_unitary(u0))
        d1 = spectral_decompose(dense_unitary(u1))
        data = overlap_data(d0, d1, momentum_zero(n))
        mean_exact = exact_mean_f(data)
        se = batch_standard_error(window)
        assert abs(mean_exact - window.mean()) < 3 * se
        var_exact = exact_mean_f2(data) - mean_exact**2
        se2 = batch_standard_error(window**2)
        assert abs(exact_mean_f2(data) - (window**2).mean()) < 3 * se2
        assert np.sqrt(var_exact) == pytest.approx(window.std(), rel=0.2)

    def test_mean_halves_when_torus_doubles(self):
        means = {}
        for n in (128, 256):
            u0, u1 = torus_pair(n)
            d0 = spectral_decompose(dense_unitary(u0))
            d1 = spectral_decompose(dense_unitary(u1))
            means[n] = exact_mean_f(overlap_data(d0, d1, momentum_zero(n)))
        assert means[256] / means[128] == pytest.approx(0.5, rel=0.25)

    def test_degenerate_spectrum_rejected(self):
        xi = np.array([0.0, 0.0, 1.0])
        o = np.eye(3, dtype=complex)
        from rotorecho.echo import OverlapData
        data = OverlapData(o=o, b=np.eye(3, dtype=complex) / 3, xi_unpert=xi,
                           xi_pert=np.array([0.1, 0.7, 1.9]), n_eff=3)
        with pytest.raises(DegenerateSpectrumError):
            exact_mean_f(data)

    def test_degenerate_gaps_rejected_in_f2(self):
        # equally spaced phases: gap differences collide pairwise
        xi = np.array([0.1, 0.6, 1.1, 1.6])
        from rotorecho.echo import OverlapData
        data = OverlapData(o=np.eye(4, dtype=complex), b=np.eye(4, dtype=complex) / 4,
                           xi_unpert=xi, xi_pert=np.array([0.05, 0.5, 1.2, 2.2]),
                           n_eff=4)
        with pytest.raises(DegenerateSpectrumError):
            exact_mean_f2(data)

    def test_f2_dimension_cap(self, rng):
        data = haar_overlap_data(16, random_state(16, rng), 3)
        object.__setattr__(data, "o", np.eye(300, dtype=complex))
        with pytest.raises(EchoError):
            exact_mean_f2(data)


class TestCouplingFormEquivalence:
    def test_both_couplings_scale_as_hbar(self):
        # linear and kicked dephasing couplings must give the same power law
        from rotorecho.scan import loglog_fit
        slopes = {}
        ns = (64, 128, 256, 512)
        for coupling in (Coupling.LINEAR, Coupling.KICKED):
            means = []
            for n in ns:
                base = RotorParams(k=5.0, hbar_eff=2 * np.pi / n,
                                   coupling=coupling, shift=0.1,
                                   geometry=Torus(n))
                u0 = build_floquet(base)
                u1 = build_floquet(base.perturbed(0.1))
                series = allegiance_series(u0, u1, momentum_zero(n), 2300)
                means.append(echo_stats(series, 300).mean_f)
            slopes[coupling] = loglog_fit([2 * np.pi / n for n in ns], means).slope
        assert abs(slopes[Coupling.LINEAR] - 1.0) <= 0.2
        assert abs(slopes[Coupling.KICKED] - 1.0) <= 0.2
        assert abs(slopes[Coupling.LINEAR] - slopes[Coupling.KICKED]) <= 0.25


class TestLatticePlateau:
    def test_plateau_order_of_magnitude_and_hbar_trend(self):
        # coarse single-realization check of the localized-regime plateau
        stats = {}
        for hbar, m in ((0.92, 1024), (0.46, 2048)):
            geometry = Lattice.centered(m)
            base = RotorParams(k=5.0, hbar_eff=hbar, shift=0.1, geometry=geometry)
            u0 = build_floquet(base)
            u1 = build_floquet(base.perturbed(0.1))
            series = allegiance_series(u0, u1, momentum_zero(m), 2500)
            stats[hbar] = echo_stats(series, 500)
        assert 0.02 < stats[0.92].mean_f < 0.5
        assert stats[0.46].mean_f < stats[0.92].mean_f
