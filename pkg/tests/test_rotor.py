import math

import numpy as np
import pytest

from rotorecho import (Coupling, DensityMatrix, Lattice, RotorParams, StateVector,
                       Torus, allegiance_series, apply_step, build_floquet,
                       dense_unitary, estimate_localization)
from rotorecho.rotor import (BoundarySpreadError, FloquetBatch, ResonanceError,
                             RotorError, check_resonance)

from conftest import random_state


def torus_params(n=64, k=5.0, shift=0.1, coupling=Coupling.LINEAR):
    return RotorParams(k=k, hbar_eff=2 * np.pi / n, coupling=coupling,
                       shift=shift, geometry=Torus(n))


def lattice_params(m, hbar, k=5.0, shift=0.0, coupling=Coupling.LINEAR):
    return RotorParams(k=k, hbar_eff=hbar, coupling=coupling, shift=shift,
                       geometry=Lattice.centered(m))


def momentum_zero(dim):
    return StateVector.basis_state(dim, dim // 2)


class TestParams:
    def test_torus_locks_hbar(self):
        with pytest.raises(RotorError):
            RotorParams(k=5.0, hbar_eff=0.1, geometry=Torus(64))
        p = RotorParams(k=5.0, hbar_eff=2 * np.pi / 8, geometry=Torus(8))
        assert p.hbar_eff == pytest.approx(0.7853981634, abs=1e-9)

    def test_torus_must_be_power_of_two(self):
        with pytest.raises(RotorError):
            Torus(48)

    def test_lattice_minimum_size(self):
        with pytest.raises(RotorError):
            Lattice.centered(32)

    def test_momentum_grid_symmetric(self):
        j = torus_params(8).momentum_levels()
        assert list(j) == [-4, -3, -2, -1, 0, 1, 2, 3]

    def test_resonance_guard(self):
        with pytest.raises(ResonanceError):
            check_resonance(4 * np.pi / 8)
        with pytest.raises(ResonanceError):
            check_resonance(4 * np.pi / 8 + 5e-7)
        check_resonance(0.5)  # smallest guarded value is 4*pi/8 ~ 1.57
        with pytest.raises(ResonanceError):
            build_floquet(lattice_params(128, 4 * np.pi / 3))


class TestApplyStep:
    def test_free_rotor_preserves_momentum_eigenstates(self):
        op = build_floquet(torus_params(k=0.0, shift=0.0))
        psi = momentum_zero(64)
        out = apply_step(op, psi)
        overlap = abs(np.vdot(out.amplitudes, psi.amplitudes))
        assert overlap == pytest.approx(1.0, abs=1e-12)

    def test_single_step_norm(self):
        op = build_floquet(torus_params())
        out = apply_step(op, momentum_zero(64))
        assert abs(np.linalg.norm(out.amplitudes) - 1) < 1e-12

    def test_norm_preserved_over_many_random_states(self, rng):
        # spec property: 1e4 random states stay normalized within 1e-10
        op = build_floquet(torus_params(n=64))
        batch = FloquetBatch([op] * 100)
        for _ in range(100):  # 100 batches of 100 states = 1e4 states
            states = rng.standard_normal((64, 100)) + 1j * rng.standard_normal((64, 100))
            states /= np.linalg.norm(states, axis=0)
            out = batch.step(states)
            assert np.max(np.abs(np.linalg.norm(out, axis=0) - 1)) < 1e-10

    def test_long_run_norm_drift(self):
        op = build_floquet(torus_params(n=256))
        psi = momentum_zero(256)
        for _ in range(2000):
            psi = apply_step(op, psi)
        assert abs(np.linalg.norm(psi.amplitudes) - 1) < 1e-10

    def test_dimension_mismatch(self):
        op = build_floquet(torus_params(n=64))
        with pytest.raises(RotorError):
            apply_step(op, momentum_zero(128))

    def test_boundary_guard_trips_on_small_lattice(self):
        op = build_floquet(lattice_params(64, 0.5, k=5.0))
        psi = momentum_zero(64)
        with pytest.raises(BoundarySpreadError):
            for _ in range(200):
                psi = apply_step(op, psi)

    def test_batch_matches_sequential(self, rng):
        ops = [build_floquet(torus_params(shift=s)) for s in (0.0, 0.3, 0.7)]
        batch = FloquetBatch(ops)
        states = np.column_stack([random_state(64, rng).amplitudes for _ in ops])
        out = batch.step(states.copy())
        for i, op in enumerate(ops):
            single = apply_step(op, StateVector(states[:, i]))
            assert np.max(np.abs(out[:, i] - single.amplitudes)) < 1e-12


class TestDenseUnitary:
    def test_free_rotor_is_diagonal(self):
        # N=4 would put hbar right on the 4*pi/8 resonance the guard excludes,
        # so the smallest usable torus for this check is N=8
        op = build_floquet(RotorParams(k=0.0, hbar_eff=2 * np.pi / 8,
                                       shift=0.0, geometry=Torus(8)))
        u = dense_unitary(op).elements
        off = u - np.diag(np.diag(u))
        assert np.max(np.abs(off)) < 1e-12
        assert np.allclose(np.diag(u), op.free_phases, atol=1e-12)

    def test_unitarity(self):
        u = dense_unitary(build_floquet(torus_params())).elements
        assert np.max(np.abs(u.conj().T @ u - np.eye(64))) < 1e-9

    def test_columns_match_apply_step(self, rng):
        op = build_floquet(torus_params(n=32))
        u = dense_unitary(op).elements
        for j in (0, 7, 31):
            col = apply_step(op, StateVector.basis_state(32, j))
            assert np.max(np.abs(u[:, j] - col.amplitudes)) < 1e-10
        psi = random_state(32, rng)
        assert np.max(np.abs(u @ psi.amplitudes
                             - apply_step(op, psi).amplitudes)) < 1e-10

    def test_dimension_cap(self):
        op = build_floquet(lattice_params(8192, 0.4))
        with pytest.raises(RotorError):
            dense_unitary(op)


class TestBrillouinShift:
    def test_full_momentum_period_is_identity_on_torus(self):
        n = 32
        base = torus_params(n=n, shift=0.2)
        shifted = torus_params(n=n, shift=0.2 + n * (2 * np.pi / n))
        u0 = build_floquet(base)
        u1 = build_floquet(base.perturbed(0.1))
        v0 = build_floquet(shifted)
        v1 = build_floquet(shifted.perturbed(0.1))
        w = momentum_zero(n)
        a = allegiance_series(u0, u1, w, 300)
        b = allegiance_series(v0, v1, w, 300)
        assert np.max(np.abs(a.F - b.F)) < 1e-10


class TestKickedCoupling:
    def test_kick_amplitude_carries_the_coupling(self):
        p = torus_params(coupling=Coupling.KICKED, shift=0.3)
        op = build_floquet(p)
        ref = build_floquet(torus_params(k=5.3, shift=0.0, coupling=Coupling.LINEAR))
        assert np.max(np.abs(op.kick_phases - ref.kick_phases)) < 1e-12
        # free phases must not contain the coupling term
        bare = build_floquet(torus_params(k=5.0, shift=0.0))
        assert np.max(np.abs(op.free_phases - bare.free_phases)) < 1e-12


@pytest.fixture(scope="module")
def estimate():
    params = lattice_params(8192, 0.2, k=5.0)
    return estimate_localization(params, momentum_zero(8192), max_kicks=2500)


class TestLocalization:
    def test_self_consistency(self, estimate):
        # J ~ sqrt(D * t_R) / hbar within the measurement protocol
        implied = math.sqrt(estimate.d_k * estimate.t_relax) / 0.2
        assert estimate.j_loc == pytest.approx(implied, rel=0.5)

    def test_diffusion_coefficient_near_quasilinear(self, estimate):
        # D(K) ~ K^2/2 with the standard oscillatory correction (~0.9 at K=5)
        assert 0.5 * 25 / 2 < estimate.d_k < 1.5 * 25 / 2

    def test_hbar_scaling_quarters_j(self):
        # J ~ hbar^-2: halving hbar quadruples the localization length.
        # Realization scatter of a single sample is broad, so average a few
        # coupling offsets per hbar before comparing.
        js = {}
        for hbar, m in ((0.4, 4096), (0.2, 8192)):
            vals = []
            for shift in (0.0, 0.45, 0.9):
                params = lattice_params(m, hbar, shift=shift)
                est = estimate_localization(params, momentum_zero(m),
                                            max_kicks=1600)
                vals.append(est.j_loc)
            js[hbar] = float(np.exp(np.mean(np.log(vals))))
        ratio = js[0.2] / js[0.4]
        assert 2.3 < ratio < 7.0

    def test_larger_k_diffuses_faster(self):
        ests = {}
        for k in (5.0, 10.0):
            params = lattice_params(16384, 0.4, k=k)
            ests[k] = estimate_localization(params, momentum_zero(16384),
                                            max_kicks=1200)
        assert ests[10.0].d_k > ests[5.0].d_k
        # quasilinear sanity bound: D should scale roughly like K^2/2
        assert ests[10.0].d_k == pytest.approx(10.0**2 / 2, rel=0.6)

    def test_requires_lattice_and_chaotic_k(self):
        with pytest.raises(RotorError):
            estimate_localization(torus_params(), momentum_zero(64), 500)
        with pytest.raises(RotorError):
            estimate_localization(lattice_params(256, 0.4, k=2.0),
                                  momentum_zero(256), 500)

    def test_no_saturation_error(self):
        params = lattice_params(65536, 0.1)
        with pytest.raises(RotorError, match="increase max_kicks"):
            estimate_localization(params, momentum_zero(65536), max_kicks=120)

    def test_accepts_density_matrix(self):
        m = 4096
        omega = DensityMatrix.pure(momentum_zero(m))
        est = estimate_localization(lattice_params(m, 0.4), omega, max_kicks=1200)
        assert est.j_loc > 10
