"""Finite-dimensional complex states and operators, with the distance,
purity and participation-ratio utilities the rest of the package builds on.

Everything here is immutable after construction and all operations are pure
functions, so the types are safe to share across threads or processes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
NORM_TOL = 1e-10
# Eigenvalue floor: double-precision eigensolver noise must not reject
# physical states.
PSD_EIGVAL_FLOOR = -1e-8
UNITARITY_TOL = 1e-9
GRAM_TOL = 1e-8


class StateError(ValueError):
    """Raised when an array fails the invariants of a quantum state/operator."""


def _readonly_complex(a, name: str, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=complex, order="C")
    if arr.ndim != ndim:
        raise StateError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state; amplitudes in a fixed orthonormal basis."""

    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _readonly_complex(self.amplitudes, "amplitudes", 1)
        object.__setattr__(self, "amplitudes", arr)
        norm = np.linalg.norm(arr)
        if abs(norm - 1.0) > NORM_TOL:
            raise StateError(f"state norm {norm!r} deviates from 1 beyond {NORM_TOL}")

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @classmethod
    def normalized(cls, amplitudes) -> "StateVector":
        """Build a state from an unnormalized amplitude array."""
        arr = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(arr)
        if norm == 0:
            raise StateError("cannot normalize the zero vector")
        return cls(arr / norm)

    @classmethod
    def basis_state(cls, dim: int, index: int) -> "StateVector":
        amps = np.zeros(dim, dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    def overlap(self, other: "StateVector") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state: Hermitian, unit trace, positive semidefinite (within tolerance)."""

    elements: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _readonly_complex(self.elements, "elements", 2)
        n, m = arr.shape
        if n != m:
            raise StateError(f"density matrix must be square, got {arr.shape}")
        object.__setattr__(self, "elements", arr)
        herm_dev = np.max(np.abs(arr - arr.conj().T))
        if herm_dev > HERMITICITY_TOL:
            raise StateError(f"Hermiticity violated: max deviation {herm_dev:.3e}")
        tr = np.trace(arr)
        if abs(tr - 1.0) > TRACE_TOL:
            raise StateError(f"trace {tr!r} deviates from 1 beyond {TRACE_TOL}")
        lo = float(np.min(np.linalg.eigvalsh(arr)))
        if lo < PSD_EIGVAL_FLOOR:
            raise StateError(f"not positive semidefinite: min eigenvalue {lo:.3e}")

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    @classmethod
    def pure(cls, psi: StateVector) -> "DensityMatrix":
        return cls(np.outer(psi.amplitudes, psi.amplitudes.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    def eigensystem(self, weight_cutoff: float = 0.0):
        """Eigenvalues (descending) and eigenvectors (columns), dropping
        weights at or below ``weight_cutoff``."""
        w, v = np.linalg.eigh(self.elements)
        order = np.argsort(w)[::-1]
        w, v = w[order], v[:, order]
        keep = w > weight_cutoff
        return w[keep], v[:, keep]


@dataclass(frozen=True)
class UnitaryMatrix:
    """Dense unitary operator (deviation from unitarity below 1e-9)."""

    elements: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _readonly_complex(self.elements, "elements", 2)
        n, m = arr.shape
        if n != m:
            raise StateError(f"unitary must be square, got {arr.shape}")
        object.__setattr__(self, "elements", arr)
        dev = np.max(np.abs(arr.conj().T @ arr - np.eye(n)))
        if dev > UNITARITY_TOL:
            raise StateError(f"unitarity violated: max |U^H U - I| = {dev:.3e}")

    @property
    def dim(self) -> int:
        return self.elements.shape[0]


def _check_same_dim(a: DensityMatrix, b: DensityMatrix):
    if a.dim != b.dim:
        raise StateError(f"dimension mismatch: {a.dim} vs {b.dim}")


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """(1/2) Tr|a - b|, computed from the eigenvalues of the Hermitian
    difference (more accurate than generic singular values)."""
    _check_same_dim(a, b)
    eigs = np.linalg.eigvalsh(a.elements - b.elements)
    return 0.5 * float(np.sum(np.abs(eigs)))


def hs_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Hilbert-Schmidt distance sqrt(Tr[(a-b)^2]) = Frobenius norm of a - b."""
    _check_same_dim(a, b)
    return float(np.linalg.norm(a.elements - b.elements))


def purity(rho: DensityMatrix) -> float:
    """Tr[rho^2]; equals sum of |elements|^2 for a Hermitian matrix."""
    return float(np.sum(np.abs(rho.elements) ** 2))


def _basis_matrix(basis) -> np.ndarray:
    """Stack a basis (list of StateVector or 2-d array of columns) into columns."""
    if isinstance(basis, np.ndarray):
        return basis
    return np.column_stack([b.amplitudes for b in basis])


def check_orthonormal(basis, tol: float = GRAM_TOL) -> np.ndarray:
    """Return the basis as a column matrix, raising if the Gram matrix
    deviates from the identity by more than ``tol``."""
    v = _basis_matrix(basis)
    gram_dev = np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1])))
    if gram_dev > tol:
        raise StateError(f"basis not orthonormal: Gram deviation {gram_dev:.3e}")
    return v


def inverse_participation_ratio(rho: DensityMatrix, basis) -> float:
    """sum_l |<l|rho|l>|^2 over the supplied orthonormal basis."""
    v = check_orthonormal(basis)
    diag = np.einsum("il,ij,jl->l", v.conj(), rho.elements, v)
    return float(np.sum(np.abs(diag) ** 2))
