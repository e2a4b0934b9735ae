"""Two noninteracting central systems with identical local chaotic environments.

Because the environments are uncoupled, the bipartite coherences factor into
products of single-environment echo amplitudes; entanglement is tracked by
the negativity of the partial transpose, including the sudden-death point of
the dephased-Bell family, and the time-averaged state decomposes into a
separable diagonal plus an exchange correction whose size is set by the
mean decoherence functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .reduced import COHERENCE_SKIP, CentralError, CentralSpec
from .states import DensityMatrix, StateError

NEGATIVITY_SNAP = 1e-13
BETA_CROSS_CHECK_TOL = 1e-10
GAP_TOL = 1e-9


class BipartiteError(ValueError):
    pass


@dataclass(frozen=True)
class BipartiteSpec:
    """Joint initial state of two central systems in the product preferred basis.

    a_joint[(n1,n2),(m1,m2)] are the coefficients of rho(0); spec1/spec2 carry
    the local energies and couplings (their A blocks are the reduced states).
    shared_env records that both local environments use the same rotor
    parameters (as distinct instances).
    """

    spec1: CentralSpec
    spec2: CentralSpec
    a_joint: np.ndarray = field(repr=False)
    shared_env: bool = True

    def __post_init__(self):
        d = self.spec1.n_c * self.spec2.n_c
        a = np.asarray(self.a_joint, dtype=complex)
        if a.shape != (d, d):
            raise BipartiteError(f"a_joint must be {d}x{d}, got {a.shape}")
        if np.max(np.abs(a - a.conj().T)) > 1e-8 or abs(np.trace(a) - 1) > 1e-8:
            raise BipartiteError("a_joint must be Hermitian with unit trace")
        a.setflags(write=False)
        object.__setattr__(self, "a_joint", a)

    @property
    def dims(self) -> tuple[int, int]:
        return self.spec1.n_c, self.spec2.n_c


def two_qubit_bell_like(omega_c: float = 1.0) -> BipartiteSpec:
    """The entangled two-qubit benchmark (|0>|+> + |1>|->)/sqrt(2) with
    H_c = omega_c * sigma_z / 2 per qubit and number-like couplings (0, 1).

    Energies are stored ascending, so the ground state is index 0; relative
    to the convention with the excited state listed first this conjugates
    the free phases and leaves every entanglement quantity unchanged.
    """
    qubit = CentralSpec(energies=np.array([-omega_c / 2, omega_c / 2]),
                        couplings=np.array([0.0, 1.0]),
                        a=np.eye(2, dtype=complex) / 2)
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    minus = np.array([1.0, -1.0]) / np.sqrt(2)
    psi = (np.kron([1, 0], plus) + np.kron([0, 1], minus)) / np.sqrt(2)
    return BipartiteSpec(spec1=qubit, spec2=qubit, a_joint=np.outer(psi, psi.conj()))


def _pair_value(echoes: dict, n: int, m: int, t: int) -> complex:
    if n == m:
        return 1.0 + 0.0j
    series = echoes.get((n, m))
    if series is not None:
        return series.value_at(t)
    conj = echoes.get((m, n))
    if conj is None:
        raise BipartiteError(f"echo series for pair ({n},{m}) missing")
    return complex(np.conj(conj.value_at(t)))


def assemble_bipartite_rho_t(spec: BipartiteSpec, echoes1: dict, echoes2: dict,
                             t: int) -> DensityMatrix:
    """rho(t) of the bipartite central system: each coefficient dressed with
    its free phase and the product of the two local echo amplitudes."""
    d1, d2 = spec.dims
    e1, e2 = spec.spec1.energies, spec.spec2.energies
    f1 = np.ones((d1, d1), dtype=complex)
    for n in range(d1):
        for m in range(d1):
            if n != m:
                f1[n, m] = _pair_value(echoes1, n, m, t)
    f2 = np.ones((d2, d2), dtype=complex)
    for n in range(d2):
        for m in range(d2):
            if n != m:
                f2[n, m] = _pair_value(echoes2, n, m, t)
    ph1 = np.exp(-1j * e1 * t)
    ph2 = np.exp(-1j * e2 * t)
    dress1 = np.outer(ph1, ph1.conj()) * f1
    dress2 = np.outer(ph2, ph2.conj()) * f2
    dressed = spec.a_joint * np.kron(dress1, dress2)
    try:
        return DensityMatrix(dressed)
    except StateError as exc:
        raise BipartiteError(f"assembled bipartite state invalid: {exc}") from exc


@dataclass(frozen=True)
class NegativityResult:
    """Negativity of a bipartite state; beta is only set for states of the
    dephased-Bell family, where (|beta| - beta)/8 must reproduce the
    eigenvalue computation."""

    negativity: float
    entangled: bool
    beta: float | None = None


def partial_transpose(rho: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    """Transpose on the second subsystem."""
    d1, d2 = dims
    r = rho.reshape(d1, d2, d1, d2)
    return r.transpose(0, 3, 2, 1).reshape(d1 * d2, d1 * d2)


def negativity(rho: DensityMatrix, dims: tuple[int, int],
               beta: float | None = None) -> NegativityResult:
    """Sum of negative partial-transpose eigenvalues (magnitude).

    Values below the numerical snap threshold are reported as exactly zero so
    that `entangled` is equivalent to `negativity > 0`.  A caller holding the
    family parameter beta may pass it in for the closed-form cross-check.
    """
    d1, d2 = dims
    if d1 * d2 != rho.dim:
        raise BipartiteError(f"dims {dims} incompatible with matrix of size {rho.dim}")
    eigs = np.linalg.eigvalsh(partial_transpose(np.asarray(rho.elements), dims))
    neg = float(np.sum(np.abs(eigs[eigs < 0])))
    if neg < NEGATIVITY_SNAP:
        neg = 0.0
    if beta is not None:
        closed = (abs(beta) - beta) / 8.0
        if abs(closed - neg) > BETA_CROSS_CHECK_TOL:
            raise BipartiteError(
                f"negativity {neg!r} disagrees with (|beta|-beta)/8 = {closed!r}")
    return NegativityResult(negativity=neg, entangled=neg > 0.0, beta=beta)


def dephased_bell_state(f01: complex, omega_t: float = 0.0) -> DensityMatrix:
    """Two-qubit state of the Bell-like benchmark after each qubit's (0,1)
    coherence has been multiplied by the echo amplitude f01 (free phase
    omega_t = omega_c * t)."""
    f = complex(f01)
    p = np.exp(-1j * omega_t)
    m = np.array([
        [1.0,                f * p,            f * p,            -f * f * p * p],
        [np.conj(f * p),     1.0,              abs(f) ** 2,      -f * p],
        [np.conj(f * p),     abs(f) ** 2,      1.0,              -f * p],
        [np.conj(-f * f * p * p), np.conj(-f * p), np.conj(-f * p), 1.0],
    ]) / 4.0
    return DensityMatrix(m)


def family_negativity(big_f: float) -> NegativityResult:
    """Negativity along the dephased-Bell family as a function of F = |f01|^2,
    cross-checked against beta = 1 - F - 2*sqrt(F)."""
    if not (0.0 <= big_f <= 1.0):
        raise BipartiteError("F must lie in [0, 1]")
    rho = dephased_bell_state(np.sqrt(big_f))
    beta = 1.0 - big_f - 2.0 * np.sqrt(big_f)
    return negativity(rho, (2, 2), beta=beta)


def sudden_death_threshold(bracket_tol: float = 5e-13) -> float:
    """Bisect the entanglement boundary of the dephased-Bell family on
    F in (0, 1), deciding each point from the partial-transpose eigenvalues
    (not from beta, which only serves as a cross-check elsewhere)."""
    lo, hi = 1e-6, 1.0  # separable at lo, entangled at hi
    while hi - lo > bracket_tol:
        mid = 0.5 * (lo + hi)
        rho = dephased_bell_state(np.sqrt(mid))
        eigs = np.linalg.eigvalsh(partial_transpose(np.asarray(rho.elements), (2, 2)))
        neg = float(np.sum(np.abs(eigs[eigs < 0])))
        if neg > NEGATIVITY_SNAP:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _check_nondegenerate_gaps(energies: np.ndarray, tol: float = GAP_TOL):
    n = energies.shape[0]
    if n < 3:
        return
    e = np.asarray(energies)
    combo = (e[:, None, None, None] - e[None, :, None, None]
             + e[None, None, :, None] - e[None, None, None, :])
    f, j, k, l = np.indices((n,) * 4)
    allowed = ((f == j) & (k == l)) | ((f == l) & (k == j))
    bad = (np.abs(combo) < tol) & ~allowed
    if np.any(bad):
        idx = tuple(int(v[0]) for v in np.nonzero(bad))
        raise BipartiteError(
            f"degenerate energy gaps: indices {idx} survive the time average")


def equilibrium_decomposition(spec: BipartiteSpec, mean_f: dict):
    """Time-averaged bipartite state split into its separable diagonal and the
    exchange correction.

    Returns (diagonal DensityMatrix, correction operator, correction trace
    norm).  The correction collects the (n1,m1,n2,m2) = (n1,n2,n2,n1) terms
    with n1 != n2, each weighted by the long-time mean <F_{n1 n2}>; it is
    traceless and its norm scales with the largest mean echo.  Requires
    identical central systems with non-degenerate-gap spectra.
    """
    d1, d2 = spec.dims
    if d1 != d2 or not np.array_equal(spec.spec1.energies, spec.spec2.energies):
        raise BipartiteError("decomposition requires identical central systems")
    _check_nondegenerate_gaps(spec.spec1.energies)
    a = spec.a_joint.reshape(d1, d2, d1, d2)  # [(n1,n2),(m1,m2)]
    diag = np.zeros((d1 * d2, d1 * d2), dtype=complex)
    for n1 in range(d1):
        for n2 in range(d2):
            idx = n1 * d2 + n2
            diag[idx, idx] = a[n1, n2, n1, n2]
    correction = np.zeros_like(diag)
    for n1 in range(d1):
        for n2 in range(d2):
            if n1 == n2:
                continue
            coeff = a[n1, n2, n2, n1]
            if abs(coeff) < COHERENCE_SKIP:
                continue
            key = (n1, n2) if (n1, n2) in mean_f else (n2, n1)
            if key not in mean_f:
                raise BipartiteError(f"mean F for pair ({n1},{n2}) missing")
            correction[n1 * d2 + n2, n2 * d2 + n1] = coeff * mean_f[key]
    norm = float(np.sum(np.linalg.svd(correction, compute_uv=False)))
    try:
        diag_state = DensityMatrix(diag)
    except StateError as exc:
        raise CentralError(f"diagonal part not a state: {exc}") from exc
    return diag_state, correction, norm
