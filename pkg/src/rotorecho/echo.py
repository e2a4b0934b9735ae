"""Echo dynamics of the chaotic environment.

Time-domain side: allegiance amplitudes f_nm(t) = Tr[U_m^(-t) U_n^t w(0)]
sampled kick by kick (the echo operator is never materialized; the bra and
ket are co-evolved).  Spectral side: Floquet diagonalization, the overlap
matrix between the perturbed and unperturbed eigenbases, and the exact
infinite-time mean and second moment of F_nm(t) from the stationary terms of
the double spectral sum.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .rotor import FloquetBatch, FloquetOperator, RotorParams, build_floquet
from .states import DensityMatrix, StateVector, UnitaryMatrix

F_CONSISTENCY_TOL = 1e-12
F_RANGE_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-8
EIGENPHASE_GAP_TOL = 1e-9
MIN_WINDOW_SAMPLES = 500
F2_DIM_CAP = 256
BRUTE_FORCE_DIM_CAP = 16
DEFAULT_WEIGHT_CUTOFF = 1e-12
NEFF_WEIGHT_CUTOFF = 1e-6


class EchoError(ValueError):
    pass


class DegenerateSpectrumError(EchoError):
    """Quasi-energy degeneracy (or degenerate gap) breaks the stationary-term analysis."""


@dataclass(frozen=True)
class EchoSeries:
    """f_nm(t) and F_nm(t) = |f_nm(t)|^2 on integer kick times starting at 0."""

    times: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=int)
        f = np.asarray(self.f, dtype=complex)
        F = np.asarray(self.F, dtype=float)
        if not (times.shape == f.shape == F.shape):
            raise EchoError("times, f and F must have matching shapes")
        if times[0] != 0 or abs(f[0] - 1.0) > F_CONSISTENCY_TOL:
            raise EchoError("series must start at t=0 with f(0)=1")
        if np.max(np.abs(F - np.abs(f) ** 2)) > F_CONSISTENCY_TOL:
            raise EchoError("F deviates from |f|^2")
        if F.min() < 0 or F.max() > 1 + F_RANGE_TOL:
            raise EchoError(f"F out of [0,1]: min={F.min()!r} max={F.max()!r}")
        for name, arr in (("times", times), ("f", f), ("F", F)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_amplitudes(cls, f: np.ndarray) -> "EchoSeries":
        f = np.asarray(f, dtype=complex)
        return cls(np.arange(f.shape[0]), f, np.abs(f) ** 2)

    def conjugate(self) -> "EchoSeries":
        """Series of the swapped index pair, f_mn = conj(f_nm)."""
        return EchoSeries(self.times, self.f.conj(), self.F)

    def value_at(self, t: int) -> complex:
        if t < 0 or t >= self.times.shape[0] or self.times[t] != t:
            raise EchoError(f"time {t} not sampled by this series")
        return complex(self.f[t])


@dataclass(frozen=True)
class EchoStats:
    mean_f: float
    std_f: float
    window_start: int
    window_len: int

    def __post_init__(self):
        if self.std_f < 0 or not (0.0 <= self.mean_f <= 1.0):
            raise EchoError("invalid echo statistics")


def _weighted_ensemble(omega0, weight_cutoff: float):
    if isinstance(omega0, StateVector):
        return np.array([1.0]), omega0.amplitudes[:, None].copy()
    if isinstance(omega0, DensityMatrix):
        w, v = omega0.eigensystem(weight_cutoff)
        return w / np.sum(w), v
    raise TypeError(f"unsupported initial state type {type(omega0)!r}")


@dataclass(frozen=True)
class FamilyResult:
    """Echo series per requested (ket, bra) operator pair, plus (optionally)
    the participation ratio of each tracked operator's time-averaged momentum
    distribution over the tail window."""

    series: dict
    occupation_pr: dict


def _pair_components(n_ops: int, pairs):
    """Connected components of the operator graph induced by the echo pairs."""
    parent = list(range(n_ops))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for ket, bra in pairs:
        a, b = find(ket), find(bra)
        if a != b:
            parent[a] = b
    groups: dict = {}
    for i, (ket, bra) in enumerate(pairs):
        groups.setdefault(find(ket), []).append(i)
    return list(groups.values())


class _InnerPlan:
    """Per-kick inner-product strategy: a small Gram per dense component of
    the pair graph (contiguous column blocks become views), a strided gather
    for sparse ones."""

    def __init__(self, n_ops: int, n_ev: int, pairs):
        self.n_ev = n_ev
        self.gram_blocks = []
        gather_pairs = []
        for comp in _pair_components(n_ops, pairs):
            ops_c = sorted({i for p in comp for i in pairs[p]})
            dense = (len(ops_c) * n_ev) ** 2 <= 15 * len(comp) * n_ev
            if dense:
                local = {op: j for j, op in enumerate(ops_c)}
                lo = ops_c[0] * n_ev
                hi = (ops_c[-1] + 1) * n_ev
                contiguous = len(ops_c) == ops_c[-1] - ops_c[0] + 1
                cidx = None if contiguous else np.concatenate(
                    [np.arange(n_ev) + op * n_ev for op in ops_c])
                ev = np.arange(n_ev)
                bra_l = np.concatenate([local[pairs[p][1]] * n_ev + ev for p in comp])
                ket_l = np.concatenate([local[pairs[p][0]] * n_ev + ev for p in comp])
                self.gram_blocks.append((lo, hi, cidx, bra_l, ket_l,
                                         np.asarray(comp)))
            else:
                gather_pairs.extend(comp)
        if gather_pairs:
            ev = np.arange(n_ev)
            self.gather = (
                np.concatenate([pairs[p][1] * n_ev + ev for p in gather_pairs]),
                np.concatenate([pairs[p][0] * n_ev + ev for p in gather_pairs]),
                np.asarray(gather_pairs))
        else:
            self.gather = None

    def inner(self, states: np.ndarray, weights: np.ndarray, out_row: np.ndarray):
        n_ev = self.n_ev
        for lo, hi, cidx, bra_l, ket_l, targets in self.gram_blocks:
            sub = states[:, lo:hi] if cidx is None else states[:, cidx]
            gram = sub.conj().T @ sub
            vals = gram[bra_l, ket_l]
            out_row[targets] = vals.reshape(-1, n_ev) @ weights
        if self.gather is not None:
            bra_idx, ket_idx, targets = self.gather
            vals = np.sum(states[:, bra_idx].conj() * states[:, ket_idx], axis=0)
            out_row[targets] = vals.reshape(-1, n_ev) @ weights


def pair_family(ops: list[FloquetOperator], omega0, t_max: int,
                pairs: Sequence[tuple[int, int]],
                weight_cutoff: float = DEFAULT_WEIGHT_CUTOFF,
                track_occupation: Sequence[int] = (),
                occupation_start: int = 0) -> FamilyResult:
    """Co-evolve one copy of each omega0 eigenvector per operator and collect
    f(t) = sum_k w_k <bra-op state|ket-op state> for every (ket, bra) pair."""
    weights, cols = _weighted_ensemble(omega0, weight_cutoff)
    n_ev = cols.shape[1]
    batch = FloquetBatch([op for op in ops for _ in range(n_ev)])
    states = np.tile(cols, (1, len(ops)))
    pairs = list(pairs)
    plan = _InnerPlan(len(ops), n_ev, pairs)
    track = list(track_occupation)
    occ = {i: np.zeros(batch.dim) for i in track}
    n_occ = 0
    out = np.empty((t_max + 1, len(pairs)), dtype=complex)
    out[0] = 1.0
    for t in range(1, t_max + 1):
        states = batch.step(states)
        plan.inner(states, weights, out[t])
        if track and t > occupation_start:
            n_occ += 1
            for i in track:
                block = states[:, i * n_ev:(i + 1) * n_ev]
                occ[i] += (np.abs(block) ** 2) @ weights
    series = {pair: EchoSeries.from_amplitudes(out[:, i])
              for i, pair in enumerate(pairs)}
    pr = {}
    for i in track:
        if n_occ == 0:
            raise EchoError("occupation tracking window is empty")
        pbar = occ[i] / n_occ
        pr[i] = float(1.0 / np.sum(pbar**2))
    return FamilyResult(series=series, occupation_pr=pr)


def allegiance_series(u_unpert: FloquetOperator, u_pert: FloquetOperator,
                      omega0, t_max: int,
                      weight_cutoff: float = DEFAULT_WEIGHT_CUTOFF) -> EchoSeries:
    """f(t) = Tr[U_unpert^(-t) U_pert^t w(0)], one value per kick.

    Equals the trace of the echo operator against omega0 without building
    either propagator as a matrix.
    """
    if u_unpert.dim != u_pert.dim:
        raise EchoError(f"operator dims differ: {u_unpert.dim} vs {u_pert.dim}")
    if t_max < 1:
        raise EchoError("t_max must be >= 1")
    fam = pair_family([u_pert, u_unpert], omega0, t_max, [(0, 1)], weight_cutoff)
    return fam.series[(0, 1)]


def coupling_family(base: RotorParams, shifts: Sequence[float], omega0,
                    t_max: int, pairs: Sequence[tuple[int, int]] | None = None,
                    weight_cutoff: float = DEFAULT_WEIGHT_CUTOFF,
                    ) -> dict[tuple[int, int], EchoSeries]:
    """Echo series for a family of conditional propagators.

    Operator i carries coupling term shifts[i] (replacing base.shift); the
    returned map holds, for each requested (n, m) pair, the series with ket
    evolved under operator n and bra under operator m.  Default pairs: all
    n > m.
    """
    ops = [build_floquet(base.perturbed(s - base.shift)) for s in shifts]
    if pairs is None:
        pairs = [(n, m) for n in range(len(shifts)) for m in range(n)]
    fam = pair_family(ops, omega0, t_max, pairs, weight_cutoff)
    return fam.series


def echo_stats(series: EchoSeries, window_start: int) -> EchoStats:
    """Mean and fluctuation width of F over [window_start, t_max], the
    finite-window estimate of the infinite-time average."""
    if window_start >= series.times[-1]:
        raise EchoError("window_start beyond the end of the series")
    window = series.F[series.times >= window_start]
    if window.shape[0] < MIN_WINDOW_SAMPLES:
        raise EchoError(
            f"only {window.shape[0]} samples in window, need {MIN_WINDOW_SAMPLES}")
    return EchoStats(mean_f=float(window.mean()), std_f=float(window.std()),
                     window_start=int(window_start), window_len=int(window.shape[0]))


def batch_standard_error(values: np.ndarray, n_batches: int = 25) -> float:
    """Standard error of the mean of a correlated series via batch means."""
    values = np.asarray(values, dtype=float)
    usable = (values.shape[0] // n_batches) * n_batches
    if usable < n_batches:
        raise EchoError("series too short for batch-mean error estimate")
    means = values[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


# ---------------------------------------------------------------------------
# Spectral machinery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralDecomp:
    """Eigenphases in [-pi, pi) (ascending) and orthonormal eigenvector columns
    of a unitary: U = V diag(exp(i xi)) V^H."""

    eigenphases: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("eigenphases", "eigenvectors"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.eigenphases.shape[0]

    def states(self) -> list[StateVector]:
        return [StateVector(self.eigenvectors[:, l]) for l in range(self.dim)]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * np.exp(1j * self.eigenphases)) @ v.conj().T


def spectral_decompose(u: UnitaryMatrix) -> SpectralDecomp:
    """Full eigendecomposition of a unitary via its (diagonal) complex Schur form.

    Schur keeps the eigenvector columns exactly orthonormal, which the later
    overlap matrices rely on.
    """
    t, z = scipy.linalg.schur(np.asarray(u.elements), output="complex")
    phases = np.angle(np.diag(t))
    phases[phases >= np.pi] -= 2 * np.pi
    order = np.argsort(phases, kind="stable")
    dec = SpectralDecomp(phases[order], z[:, order])
    dev = np.max(np.abs(dec.reconstruct() - u.elements))
    if dev > RECONSTRUCTION_TOL:
        raise EchoError(f"eigendecomposition failed to reconstruct: {dev:.3e}")
    return dec


@dataclass(frozen=True)
class OverlapData:
    """Overlap matrix O[l,l'] = <psi_l|psit_l'>, mixed matrix
    B[l',l] = <psit_l'|w(0)|psi_l>, the two quasi-energy spectra, and the
    effective Hilbert-space dimension of w(0) over the two eigenbases."""

    o: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    xi_unpert: np.ndarray = field(repr=False)
    xi_pert: np.ndarray = field(repr=False)
    n_eff: int

    def __post_init__(self):
        for name in ("o", "b", "xi_unpert", "xi_pert"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.o.shape[0]

    def stationary_amplitudes(self) -> np.ndarray:
        """G[l,l'] = O[l,l'] B[l',l]: the weight of each stationary phase in f(t)."""
        return self.o * self.b.T


def effective_dimension(weights: np.ndarray, cutoff: float = NEFF_WEIGHT_CUTOFF) -> int:
    """Smallest number of eigenvectors whose cumulative weight reaches 1 - cutoff."""
    w = np.sort(np.asarray(weights, dtype=float))[::-1]
    total = np.cumsum(w)
    target = total[-1] * (1.0 - cutoff)
    return int(np.searchsorted(total, target) + 1)


def overlap_data(unpert: SpectralDecomp, pert: SpectralDecomp, omega0,
                 weight_cutoff: float = NEFF_WEIGHT_CUTOFF) -> OverlapData:
    """Assemble the spectral overlap data of an echo pair for omega0."""
    if unpert.dim != pert.dim:
        raise EchoError("decompositions have different dimensions")
    vm, vn = unpert.eigenvectors, pert.eigenvectors
    o = vm.conj().T @ vn
    if isinstance(omega0, StateVector):
        wm = vm.conj().T @ omega0.amplitudes
        wn = vn.conj().T @ omega0.amplitudes
        b = np.outer(wn, wm.conj())
        diag_m, diag_n = np.abs(wm) ** 2, np.abs(wn) ** 2
    elif isinstance(omega0, DensityMatrix):
        b = vn.conj().T @ omega0.elements @ vm
        diag_m = np.einsum("il,ij,jl->l", vm.conj(), omega0.elements, vm).real
        diag_n = np.einsum("il,ij,jl->l", vn.conj(), omega0.elements, vn).real
    else:
        raise TypeError(f"unsupported initial state type {type(omega0)!r}")
    n_eff = max(effective_dimension(diag_m, weight_cutoff),
                effective_dimension(diag_n, weight_cutoff))
    return OverlapData(o=o, b=b, xi_unpert=unpert.eigenphases,
                       xi_pert=pert.eigenphases, n_eff=n_eff)


def _check_phase_spacing(xi: np.ndarray, label: str):
    """All eigenphases pairwise separated (mod 2*pi) by more than the tolerance."""
    s = np.sort(xi)
    gaps = np.diff(s)
    if gaps.size and gaps.min() <= EIGENPHASE_GAP_TOL:
        i = int(np.argmin(gaps))
        raise DegenerateSpectrumError(
            f"{label} eigenphases {i} and {i + 1} collide: gap {gaps.min():.3e}")
    wrap = s[0] + 2 * np.pi - s[-1]
    if s.size > 1 and wrap <= EIGENPHASE_GAP_TOL:
        raise DegenerateSpectrumError(
            f"{label} eigenphases collide across the 2*pi wrap: gap {wrap:.3e}")


def _check_nondegenerate_gaps(xi: np.ndarray, label: str):
    """No two distinct ordered pairs share the same phase difference (mod 2*pi)."""
    n = xi.shape[0]
    ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    diffs = np.mod(xi[ii] - xi[jj], 2 * np.pi)
    order = np.argsort(diffs)
    d = diffs[order]
    close = np.nonzero(np.diff(d) <= EIGENPHASE_GAP_TOL)[0]
    if close.size:
        a, b = order[close[0]], order[close[0] + 1]
        raise DegenerateSpectrumError(
            f"{label} gap degeneracy: pairs ({ii[a]},{jj[a]}) and ({ii[b]},{jj[b]}) "
            f"differ by {d[close[0] + 1] - d[close[0]]:.3e}")
    if (2 * np.pi - d[-1]) + d[0] <= EIGENPHASE_GAP_TOL and len(d) > 1:
        a, b = order[-1], order[0]
        raise DegenerateSpectrumError(
            f"{label} gap degeneracy across the 2*pi wrap: pairs "
            f"({ii[a]},{jj[a]}) and ({ii[b]},{jj[b]})")


def exact_mean_f(data: OverlapData) -> float:
    """Exact infinite-time average of F: the diagonal stationary terms
    sum_ll' |O_ll'|^2 |B_l'l|^2 (valid for non-degenerate spectra)."""
    _check_phase_spacing(data.xi_unpert, "unperturbed")
    _check_phase_spacing(data.xi_pert, "perturbed")
    g = data.stationary_amplitudes()
    return float(np.sum(np.abs(g) ** 2))


def exact_mean_f2(data: OverlapData) -> float:
    """Exact infinite-time average of F^2 by stationary-term bookkeeping.

    With non-degenerate gaps, the eight-index phase sum survives only when
    the four unprimed indices pair up as (f=j, k=l) or (f=l, k=j) and the
    four primed ones independently do the same; together with the all-equal
    overlap correction of each pairing family this leaves nine index-set
    families, evaluated here in closed form on G = O * B^T.
    """
    n = data.dim
    if n > F2_DIM_CAP:
        raise EchoError(f"dimension {n} above the F2 cap {F2_DIM_CAP}")
    _check_phase_spacing(data.xi_unpert, "unperturbed")
    _check_phase_spacing(data.xi_pert, "perturbed")
    _check_nondegenerate_gaps(data.xi_unpert, "unperturbed")
    _check_nondegenerate_gaps(data.xi_pert, "perturbed")
    g = data.stationary_amplitudes()
    g2 = np.abs(g) ** 2
    mu = float(np.sum(g2))
    m = g @ g.conj().T
    tr2 = float(np.sum(np.abs(m) ** 2))  # Tr[(G G^H)^2] since m is Hermitian
    col = g2.sum(axis=0)
    row = g2.sum(axis=1)
    return (2 * mu**2 + 2 * tr2
            - 2 * float(np.sum(col**2)) - 2 * float(np.sum(row**2))
            + float(np.sum(g2**2)))


def brute_force_mean_f2(data: OverlapData, phase_tol: float = EIGENPHASE_GAP_TOL) -> float:
    """Oracle for exact_mean_f2: enumerate all quadruple pairs and keep those
    whose total phase actually survives the discrete-time average.

    Every 4-index combination of each spectrum is formed explicitly and the
    two sides are matched on their phase sums mod 2*pi, so no index-pattern
    analysis enters; cost ~ dim^4 log(dim), capped at dim 16.
    """
    n = data.dim
    if n > BRUTE_FORCE_DIM_CAP:
        raise EchoError(f"dimension {n} above the brute-force cap {BRUTE_FORCE_DIM_CAP}")
    g = data.stationary_amplitudes()
    idx = np.indices((n,) * 4).reshape(4, -1)
    two_pi = 2 * np.pi

    def quad_sums(xi):
        return np.mod(xi[idx[0]] - xi[idx[1]] + xi[idx[2]] - xi[idx[3]], two_pi)

    du = quad_sums(data.xi_unpert)
    dp = quad_sums(data.xi_pert)
    order = np.argsort(dp)
    dps = dp[order]
    total = 0.0 + 0.0j
    gc = g.conj()
    for q in range(idx.shape[1]):
        v = du[q]
        sel = []
        for shift in (-two_pi, 0.0, two_pi):
            lo = np.searchsorted(dps, v + shift - phase_tol, side="left")
            hi = np.searchsorted(dps, v + shift + phase_tol, side="right")
            if hi > lo:
                sel.append(order[lo:hi])
        if not sel:
            continue
        sel = np.concatenate(sel)
        f, j, k, l = idx[:, q]
        total += np.sum(g[f, idx[0, sel]] * gc[j, idx[1, sel]]
                        * g[k, idx[2, sel]] * gc[l, idx[3, sel]])
    return float(total.real)
