import numpy as np
import pytest

from rotorecho import (DensityMatrix, StateVector, UnitaryMatrix, hs_distance,
                       inverse_participation_ratio, purity, trace_distance)
from rotorecho.states import StateError
from rotorecho.rmt import haar_unitary

from conftest import random_density_matrix


def diag_state(*weights) -> DensityMatrix:
    return DensityMatrix(np.diag(np.array(weights, dtype=complex)))


class TestConstructors:
    def test_state_vector_norm_enforced(self):
        with pytest.raises(StateError):
            StateVector(np.array([1.0, 1.0]))
        psi = StateVector.normalized(np.array([1.0, 1.0]))
        assert psi.dim == 2
        assert abs(np.linalg.norm(psi.amplitudes) - 1) < 1e-12

    def test_density_matrix_rejects_bad_inputs(self):
        with pytest.raises(StateError):
            DensityMatrix(np.array([[0.5, 0.1], [0.3, 0.5]]))  # not Hermitian
        with pytest.raises(StateError):
            DensityMatrix(np.eye(2) * 0.7)  # trace != 1
        with pytest.raises(StateError):
            DensityMatrix(np.diag([1.5, -0.5]))  # negative eigenvalue

    def test_density_matrix_tolerates_solver_noise(self):
        m = np.diag([1.0, -0.5e-8, 0.0]).astype(complex)
        m[0, 0] = 1.0 + 0.5e-8
        DensityMatrix(m)  # within the PSD/trace floors

    def test_unitary_rejected_beyond_tolerance(self):
        with pytest.raises(StateError):
            UnitaryMatrix(np.eye(3) * (1 + 1e-6))
        UnitaryMatrix(np.eye(3, dtype=complex))

    def test_immutability(self):
        rho = diag_state(0.5, 0.5)
        with pytest.raises(ValueError):
            rho.elements[0, 0] = 2.0


class TestTraceDistance:
    def test_identical_states(self):
        rho = diag_state(0.5, 0.5)
        assert trace_distance(rho, rho) == 0.0

    def test_orthogonal_pure_states(self):
        assert trace_distance(diag_state(1, 0), diag_state(0, 1)) == pytest.approx(1.0)

    def test_swapped_diagonal(self):
        # eigenvalues of the difference are +-0.5
        a, b = diag_state(0.75, 0.25), diag_state(0.25, 0.75)
        assert trace_distance(a, b) == pytest.approx(0.5, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(StateError):
            trace_distance(diag_state(1, 0), diag_state(1, 0, 0))

    def test_matches_singular_value_route(self, rng):
        # independent oracle: singular values of the (non-symmetrized) difference
        for _ in range(5):
            a = random_density_matrix(5, rng)
            b = random_density_matrix(5, rng)
            sv = np.linalg.svd(a.elements - b.elements, compute_uv=False)
            assert trace_distance(a, b) == pytest.approx(0.5 * sv.sum(), abs=1e-10)


class TestHsDistance:
    def test_orthogonal_pure_states(self):
        assert hs_distance(diag_state(1, 0), diag_state(0, 1)) == pytest.approx(np.sqrt(2))

    def test_bounds_trace_distance(self, rng):
        for dim in (2, 3, 4, 8):
            for _ in range(10):
                a = random_density_matrix(dim, rng)
                b = random_density_matrix(dim, rng)
                assert trace_distance(a, b) <= np.sqrt(dim) / 2 * hs_distance(a, b) + 1e-12

    def test_metric_properties(self, rng):
        states = [random_density_matrix(4, rng) for _ in range(6)]
        for a in states:
            for b in states:
                assert hs_distance(a, b) == pytest.approx(hs_distance(b, a), abs=1e-12)
                assert trace_distance(a, b) == pytest.approx(trace_distance(b, a), abs=1e-12)
        for a in states:
            for b in states:
                for c in states:
                    assert trace_distance(a, c) <= (trace_distance(a, b)
                                                    + trace_distance(b, c) + 1e-10)
                    assert hs_distance(a, c) <= (hs_distance(a, b)
                                                 + hs_distance(b, c) + 1e-10)


class TestPurity:
    def test_pure_state(self, rng):
        v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        rho = DensityMatrix.pure(StateVector.normalized(v))
        assert purity(rho) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("dim", [2, 5, 17])
    def test_maximally_mixed(self, dim):
        assert purity(DensityMatrix.maximally_mixed(dim)) == pytest.approx(1 / dim)

    def test_diagonal_example(self):
        assert purity(diag_state(0.5, 0.3, 0.2)) == pytest.approx(0.38)

    def test_range_and_unitary_invariance(self, rng):
        for dim in (3, 6):
            rho = random_density_matrix(dim, rng)
            p = purity(rho)
            assert 1 / dim - 1e-12 <= p <= 1 + 1e-12
            u = haar_unitary(dim, rng)
            rotated = DensityMatrix(u @ rho.elements @ u.conj().T)
            assert purity(rotated) == pytest.approx(p, abs=1e-10)


class TestParticipationRatio:
    def test_concentrated(self):
        rho = diag_state(1, 0, 0)
        basis = np.eye(3, dtype=complex)
        assert inverse_participation_ratio(rho, basis) == pytest.approx(1.0)

    def test_maximally_mixed_any_basis(self, rng):
        rho = DensityMatrix.maximally_mixed(5)
        u = haar_unitary(5, rng)
        assert inverse_participation_ratio(rho, u) == pytest.approx(1 / 5, abs=1e-12)

    def test_equal_pair(self):
        rho = diag_state(0.5, 0.5)
        assert inverse_participation_ratio(rho, np.eye(2, dtype=complex)) == \
            pytest.approx(0.5)

    def test_rejects_non_orthonormal_basis(self):
        rho = diag_state(0.5, 0.5)
        bad = np.array([[1.0, 0.5], [0.0, 1.0]], dtype=complex)
        with pytest.raises(StateError):
            inverse_participation_ratio(rho, bad)

    def test_accepts_state_vector_list(self):
        rho = diag_state(0.25, 0.75)
        basis = [StateVector.basis_state(2, 0), StateVector.basis_state(2, 1)]
        expected = 0.25**2 + 0.75**2
        assert inverse_participation_ratio(rho, basis) == pytest.approx(expected)
