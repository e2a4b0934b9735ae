"""Reduced density matrix of the central system under dephasing.

The (n,m) coherence of rho(t) is A_nm * exp(-i(e_n - e_m)t) * f_nm(t):
populations never move, every off-diagonal element carries its own echo
amplitude.  The equilibrium state is the time average, i.e. the dephased
diagonal, and the equilibration diagnostics compare the trajectory against
it in trace and Hilbert-Schmidt distance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .states import DensityMatrix, hs_distance, purity, trace_distance

CENTRAL_PSD_TOL = 1e-8
POPULATION_TOL = 1e-9
EXPANSION_TOL = 1e-9
COHERENCE_SKIP = 1e-12
CAT_DIM_CAP = 128


class CentralError(ValueError):
    pass


@dataclass(frozen=True)
class CentralSpec:
    """Central system in its preferred basis: energies e_n, coupling
    eigenvalues s_n, and the initial state coefficients A_nm."""

    energies: np.ndarray = field(repr=False)
    couplings: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        s = np.asarray(self.couplings, dtype=float)
        a = np.asarray(self.a, dtype=complex)
        n = e.shape[0]
        if s.shape != (n,) or a.shape != (n, n):
            raise CentralError("energies, couplings and A have inconsistent shapes")
        if np.any(np.diff(e) <= 0):
            raise CentralError("energies must be strictly increasing (non-degenerate)")
        if np.max(np.abs(a - a.conj().T)) > CENTRAL_PSD_TOL:
            raise CentralError("A must be Hermitian")
        if abs(np.trace(a) - 1.0) > CENTRAL_PSD_TOL:
            raise CentralError("A must have unit trace")
        if float(np.min(np.linalg.eigvalsh(a))) < -CENTRAL_PSD_TOL:
            raise CentralError("A must be positive semidefinite")
        for name, arr in (("energies", e), ("couplings", s), ("a", a)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_c(self) -> int:
        return self.energies.shape[0]

    def coherence_pairs(self, skip: float = COHERENCE_SKIP) -> list[tuple[int, int]]:
        """Ordered pairs n > m whose coherence is worth propagating."""
        return [(n, m) for n in range(self.n_c) for m in range(n)
                if abs(self.a[n, m]) >= skip]


def cat_state_spec(alpha: complex, omega_c: float = 1.0,
                   weight_cutoff: float = 1e-10) -> CentralSpec:
    """Even coherent superposition N(|alpha> + |-alpha>) of a harmonic
    oscillator, truncated in the number basis at cumulative weight
    1 - weight_cutoff; energies omega_c*(n + 1/2), number coupling s_n = n."""
    if abs(alpha) == 0:
        raise CentralError("alpha must be nonzero (the limit alpha->0 is the vacuum)")
    asq = abs(alpha) ** 2
    # Coherent amplitudes via cumulative products to avoid factorial overflow.
    n_max_scan = CAT_DIM_CAP + 32
    log_w = (-asq + np.arange(n_max_scan) * np.log(asq)
             - np.cumsum(np.concatenate([[0.0], np.log(np.arange(1, n_max_scan))])))
    coherent = np.exp(log_w / 2.0) * np.power(alpha / abs(alpha), np.arange(n_max_scan))
    cat = coherent.copy()
    cat[1::2] = 0.0  # odd components cancel in |alpha> + |-alpha>
    weights = np.abs(cat) ** 2
    total = np.cumsum(weights) / np.sum(weights)
    n_max = int(np.searchsorted(total, 1.0 - weight_cutoff))
    if n_max + 1 > CAT_DIM_CAP:
        raise CentralError(
            f"cat state needs {n_max + 1} levels, above the cap {CAT_DIM_CAP}")
    amps = cat[: n_max + 1]
    amps = amps / np.linalg.norm(amps)
    n = np.arange(n_max + 1)
    return CentralSpec(energies=omega_c * (n + 0.5), couplings=n.astype(float),
                       a=np.outer(amps, amps.conj()))


class _CoherenceTable:
    """Echo amplitudes of every needed pair stacked into one (n_pairs, T)
    array so that a time slice is a fancy-indexed scatter, not a dict walk."""

    def __init__(self, spec: CentralSpec, echoes: dict):
        rows, cols, series_list = [], [], []
        for n, m in spec.coherence_pairs():
            series = echoes.get((n, m))
            if series is None:
                conj = echoes.get((m, n))
                if conj is None:
                    raise CentralError(f"echo series for pair ({n},{m}) missing")
                series = conj.conjugate()
            rows.append(n)
            cols.append(m)
            series_list.append(series)
        self.n_c = spec.n_c
        self.rows = np.asarray(rows, dtype=int)
        self.cols = np.asarray(cols, dtype=int)
        if series_list:
            self.t_max = min(int(s.times[-1]) for s in series_list)
            self.f = np.vstack([s.f[: self.t_max + 1] for s in series_list])
        else:
            self.t_max = np.iinfo(np.int64).max
            self.f = np.empty((0, 0), dtype=complex)

    def at(self, t: int) -> np.ndarray:
        if t < 0 or t > self.t_max:
            raise CentralError(f"time {t} not sampled by the echo series")
        f = np.ones((self.n_c, self.n_c), dtype=complex)
        if self.rows.size:
            vals = self.f[:, t]
            f[self.rows, self.cols] = vals
            f[self.cols, self.rows] = vals.conj()
        return f


def _coherence_factors(spec: CentralSpec, echoes: dict, t: int) -> np.ndarray:
    """Matrix of f_nm(t) for every needed pair (1 on the diagonal)."""
    return _CoherenceTable(spec, echoes).at(t)


def _assemble(spec: CentralSpec, table: "_CoherenceTable", t: int) -> DensityMatrix:
    phases = np.exp(-1j * spec.energies * t)
    free = np.outer(phases, phases.conj())
    return DensityMatrix(spec.a * free * table.at(t))


def assemble_rho_t(spec: CentralSpec, echoes: dict, t: int) -> DensityMatrix:
    """rho(t) with elements A_nm exp(-i(e_n-e_m)t) f_nm(t).

    Pairs with |A_nm| below the skip threshold need no echo series; their
    (negligible) coherences evolve with f = 1.
    """
    return _assemble(spec, _CoherenceTable(spec, echoes), t)


def equilibrium_state(spec: CentralSpec) -> DensityMatrix:
    """Time-averaged state: the dephased diagonal of A (needs non-degenerate
    energies, which CentralSpec already guarantees)."""
    return DensityMatrix(np.diag(np.diag(spec.a)))


@dataclass(frozen=True)
class ReducedTrajectory:
    times: np.ndarray = field(repr=False)
    states: tuple = field(repr=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=int)
        states = tuple(self.states)
        if times.shape[0] != len(states) or not states:
            raise CentralError("times and states must align and be nonempty")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def n_c(self) -> int:
        return self.states[0].dim


def build_trajectory(spec: CentralSpec, echoes: dict, times) -> ReducedTrajectory:
    """Assemble rho(t) on the given kick times, enforcing population
    conservation against the initial diagonal."""
    times = np.asarray(times, dtype=int)
    pops = np.real(np.diag(spec.a))
    table = _CoherenceTable(spec, echoes)
    states = []
    for t in times:
        rho = _assemble(spec, table, int(t))
        drift = np.max(np.abs(np.real(np.diag(rho.elements)) - pops))
        if drift > POPULATION_TOL:
            raise CentralError(f"populations drifted by {drift:.3e} at t={t}")
        states.append(rho)
    return ReducedTrajectory(times=times, states=tuple(states))


@dataclass(frozen=True)
class EquilibrationReport:
    """Per-time distances to equilibrium plus their window averages.

    bound_rhs is (sqrt(N_c)/2) * D_HS, the proven ceiling on the trace
    distance; expansion_residual is the worst deviation of D_HS^2 from
    sum_{n!=m} |A_nm|^2 F_nm(t) when echoes were supplied.
    """

    times: np.ndarray = field(repr=False)
    trace_dist: np.ndarray = field(repr=False)
    hs_dist: np.ndarray = field(repr=False)
    purities: np.ndarray = field(repr=False)
    bound_rhs: np.ndarray = field(repr=False)
    window_start: int
    mean_trace_dist: float
    mean_hs_dist: float
    bound_margin: float
    purity_floor_margin: float
    expansion_residual: float | None

    def __post_init__(self):
        for name in ("times", "trace_dist", "hs_dist", "purities", "bound_rhs"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def equilibration_report(traj: ReducedTrajectory, spec: CentralSpec,
                         echoes: dict | None = None,
                         window_start: int = 0) -> EquilibrationReport:
    """Distances of the trajectory to the equilibrium state, the trace-distance
    bound check, the purity floor check, and (when the echo map is supplied)
    verification of the Hilbert-Schmidt expansion over the echo functions."""
    eq = equilibrium_state(spec)
    n_t = traj.times.shape[0]
    td = np.empty(n_t)
    hs = np.empty(n_t)
    pur = np.empty(n_t)
    for i, rho in enumerate(traj.states):
        td[i] = trace_distance(rho, eq)
        hs[i] = hs_distance(rho, eq)
        pur[i] = purity(rho)
    rhs = (math.sqrt(spec.n_c) / 2.0) * hs

    bound_margin = float(np.max(td - rhs))
    if bound_margin > POPULATION_TOL:
        raise CentralError(
            f"trace-distance bound violated by {bound_margin:.3e}")
    floor = float(np.sum(np.real(np.diag(spec.a)) ** 2))
    purity_floor_margin = float(np.max(floor - pur))
    if purity_floor_margin > POPULATION_TOL:
        raise CentralError(
            f"purity fell below its dephasing floor by {purity_floor_margin:.3e}")

    expansion_residual = None
    if echoes is not None:
        table = _CoherenceTable(spec, echoes)
        a2 = np.abs(spec.a[table.rows, table.cols]) ** 2
        worst = 0.0
        for i, t in enumerate(traj.times):
            total = 2.0 * float(a2 @ np.abs(table.f[:, int(t)]) ** 2)
            worst = max(worst, abs(hs[i] ** 2 - total))
        expansion_residual = worst
        if worst > EXPANSION_TOL:
            raise CentralError(
                f"Hilbert-Schmidt expansion over echoes off by {worst:.3e}")

    sel = traj.times >= window_start
    if not np.any(sel):
        raise CentralError("window_start beyond the trajectory")
    return EquilibrationReport(
        times=traj.times, trace_dist=td, hs_dist=hs, purities=pur, bound_rhs=rhs,
        window_start=int(window_start),
        mean_trace_dist=float(td[sel].mean()), mean_hs_dist=float(hs[sel].mean()),
        bound_margin=bound_margin, purity_floor_margin=purity_floor_margin,
        expansion_residual=expansion_residual)
