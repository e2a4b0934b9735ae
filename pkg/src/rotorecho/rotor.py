"""Conditional Floquet propagators of the kicked-rotor environment.

One period is a split step: free phases exp(-i(p^2/2 + shift*p)/hbar) applied
in the momentum representation, then the kick exp(-i K_eff cos(theta)/hbar)
applied on the position grid, with FFTs in between.  Two coupling forms are
supported: the linear one folds the coupling term shift*p into the free
phases, the kicked one adds its increment to the kick amplitude.

Geometries: a torus of dimension N (hbar locked to 2*pi/N) or a truncated
momentum lattice ("cylinder") with a guard against probability reaching the
truncation edges.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as _fft

from .states import DensityMatrix, StateVector, UnitaryMatrix

FFT_WORKERS = 2  # column-parallel batched transforms; per-column results are exact

TORUS_HBAR_TOL = 1e-12
RESONANCE_TOL = 1e-6
RESONANCE_MAX_ORDER = 8
EDGE_MASS_LIMIT = 1e-8
EDGE_FRACTION = 0.05
DENSE_DIM_CAP = 4096
CHAOTIC_K_MIN = 5.0


class RotorError(ValueError):
    """Invalid rotor parameters."""


class ResonanceError(RotorError):
    """hbar_eff too close to a quantum resonance 4*pi*q/r."""


class BoundarySpreadError(RuntimeError):
    """Evolved state reached the truncation edge of the momentum lattice."""


class Coupling(enum.Enum):
    LINEAR = "linear"
    KICKED = "kicked"


@dataclass(frozen=True)
class Torus:
    """Phase space closed on [-pi, pi) x [-pi, pi); dimension must be a power of two."""

    n: int

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise RotorError(f"torus dimension must be a power of two, got {self.n}")

    @property
    def dim(self) -> int:
        return self.n

    @property
    def p_min(self) -> int:
        return -self.n // 2


@dataclass(frozen=True)
class Lattice:
    """Truncated momentum lattice standing in for the infinite cylinder."""

    p_min: int
    p_max: int

    def __post_init__(self):
        if self.p_max - self.p_min + 1 < 64:
            raise RotorError("lattice needs at least 64 momentum levels")

    @property
    def dim(self) -> int:
        return self.p_max - self.p_min + 1

    @classmethod
    def centered(cls, m: int) -> "Lattice":
        return cls(-(m // 2), m - m // 2 - 1)


def check_resonance(hbar_eff: float, tol: float = RESONANCE_TOL,
                    max_order: int = RESONANCE_MAX_ORDER):
    """Reject hbar_eff within ``tol`` of a low-order quantum resonance 4*pi*q/r."""
    for r in range(1, max_order + 1):
        q = round(hbar_eff * r / (4 * math.pi))
        if q >= 1 and abs(hbar_eff - 4 * math.pi * q / r) < tol:
            raise ResonanceError(
                f"hbar_eff={hbar_eff} is within {tol} of the quantum resonance "
                f"4*pi*{q}/{r}; the diffusive picture does not apply")


@dataclass(frozen=True)
class RotorParams:
    """Kick strength K, effective Planck constant, coupling form and the
    coupling term (shift = s_m * g_bar for the conditional Hamiltonian)."""

    k: float
    hbar_eff: float
    coupling: Coupling = Coupling.LINEAR
    shift: float = 0.0
    geometry: Torus | Lattice = field(default_factory=lambda: Torus(64))

    def __post_init__(self):
        if self.k < 0:
            raise RotorError("kick strength K must be >= 0")
        if self.hbar_eff <= 0:
            raise RotorError("hbar_eff must be > 0")
        if isinstance(self.geometry, Torus):
            locked = 2 * math.pi / self.geometry.n
            if abs(self.hbar_eff - locked) > TORUS_HBAR_TOL:
                raise RotorError(
                    f"torus of dimension {self.geometry.n} forces hbar_eff="
                    f"{locked!r}, got {self.hbar_eff!r}")

    @property
    def dim(self) -> int:
        return self.geometry.dim

    def momentum_levels(self) -> np.ndarray:
        """Integer momentum quantum numbers j (p = hbar_eff * j), ascending."""
        lo = self.geometry.p_min
        return np.arange(lo, lo + self.dim)

    def perturbed(self, epsilon: float) -> "RotorParams":
        """Same rotor with the coupling term increased by epsilon = g_bar*(s_n - s_m)."""
        return RotorParams(self.k, self.hbar_eff, self.coupling,
                           self.shift + epsilon, self.geometry)


def _phase_tables(params: RotorParams):
    j = params.momentum_levels()
    lin = params.shift if params.coupling is Coupling.LINEAR else 0.0
    free = np.exp(-1j * (params.hbar_eff * j * j / 2.0 + lin * j))
    kick_amp = params.k
    if params.coupling is Coupling.KICKED:
        kick_amp = params.k + params.shift
    theta = 2 * np.pi * np.arange(params.dim) / params.dim
    kick = np.exp(-1j * (kick_amp / params.hbar_eff) * np.cos(theta))
    return free, kick


@dataclass(frozen=True)
class FloquetOperator:
    """One-period propagator U = U_kick o U_free in split form.

    free_phases act in the momentum representation, kick_phases on the
    position grid; both are unit-modulus, so every step is exactly unitary
    up to FFT round-off.
    """

    params: RotorParams
    free_phases: np.ndarray = field(repr=False)
    kick_phases: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("free_phases", "kick_phases"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.params.dim


def build_floquet(params: RotorParams) -> FloquetOperator:
    """Build the split-step one-period propagator for one conditional Hamiltonian."""
    check_resonance(params.hbar_eff)
    free, kick = _phase_tables(params)
    return FloquetOperator(params, free, kick)


def _edge_mass(prob: np.ndarray) -> float:
    m = prob.shape[0]
    ne = max(1, int(m * EDGE_FRACTION / 2))
    return float(np.sum(prob[:ne]) + np.sum(prob[-ne:]))


def _check_edges(op: FloquetOperator, prob: np.ndarray):
    if isinstance(op.params.geometry, Lattice):
        mass = _edge_mass(prob)
        if mass > EDGE_MASS_LIMIT:
            raise BoundarySpreadError(
                f"probability {mass:.3e} in the outer {EDGE_FRACTION:.0%} of the "
                f"momentum lattice exceeds {EDGE_MASS_LIMIT}; enlarge the lattice")


def _step_raw(op: FloquetOperator, amps: np.ndarray) -> np.ndarray:
    x = np.fft.ifft(amps * op.free_phases)
    x *= op.kick_phases
    return np.fft.fft(x)


def apply_step(op: FloquetOperator, psi: StateVector) -> StateVector:
    """Advance a state by one kick period."""
    if psi.dim != op.dim:
        raise RotorError(f"state dim {psi.dim} != operator dim {op.dim}")
    out = _step_raw(op, psi.amplitudes)
    _check_edges(op, np.abs(out) ** 2)
    return StateVector(out)


def dense_unitary(op: FloquetOperator) -> UnitaryMatrix:
    """Materialize the one-period propagator; column j is the step applied to e_j."""
    n = op.dim
    if n > DENSE_DIM_CAP:
        raise RotorError(
            f"dimension {n} above the dense cap {DENSE_DIM_CAP}; "
            "use time-domain methods instead")
    cols = np.fft.ifft(np.diag(op.free_phases), axis=0)
    cols *= op.kick_phases[:, None]
    return UnitaryMatrix(np.fft.fft(cols, axis=0))


class FloquetBatch:
    """Several same-dimension Floquet operators applied to one state per column.

    Columns evolve independently (the operators act columnwise), which turns a
    family of conditional propagators into a single set of batched FFTs.
    """

    def __init__(self, ops: list[FloquetOperator]):
        dims = {op.dim for op in ops}
        if len(dims) != 1:
            raise RotorError("batched operators must share one dimension")
        self.ops = list(ops)
        self.dim = dims.pop()
        self.free = np.column_stack([op.free_phases for op in ops])
        self.kick = np.column_stack([op.kick_phases for op in ops])
        self._lattice = isinstance(ops[0].params.geometry, Lattice)

    @property
    def width(self) -> int:
        return len(self.ops)

    def step(self, states: np.ndarray) -> np.ndarray:
        """One kick period for an (dim, width) array of column states."""
        workers = FFT_WORKERS if states.size >= 1 << 20 else 1
        x = _fft.ifft(states * self.free, axis=0, workers=workers)
        x *= self.kick
        out = _fft.fft(x, axis=0, workers=workers)
        if self._lattice:
            ne = max(1, int(self.dim * EDGE_FRACTION / 2))
            edges = (np.sum(np.abs(out[:ne, :]) ** 2, axis=0)
                     + np.sum(np.abs(out[-ne:, :]) ** 2, axis=0))
            worst = float(edges.max())
            if worst > EDGE_MASS_LIMIT:
                raise BoundarySpreadError(
                    f"probability {worst:.3e} in the outer {EDGE_FRACTION:.0%} of the "
                    f"momentum lattice exceeds {EDGE_MASS_LIMIT}; enlarge the lattice")
        return out


@dataclass(frozen=True)
class LocalizationEstimate:
    """Measured dynamical-localization summary.

    j_loc is the momentum-distribution participation ratio (levels), d_k the
    early-time diffusion coefficient of p (per kick), t_relax the kick count
    where diffusion shut down; they satisfy j_loc ~ sqrt(d_k*t_relax)/hbar_eff
    only up to the measurement protocol (checked at the ~20% level in tests).
    """

    j_loc: float
    d_k: float
    t_relax: int

    def __post_init__(self):
        if min(self.j_loc, self.d_k, self.t_relax) <= 0:
            raise RotorError("localization estimate fields must be positive")


DIFFUSION_FIT_KICKS = 30
SATURATION_RATE_FRACTION = 0.10


def _as_weighted_states(omega0, weight_cutoff: float = 1e-12):
    """Spectral decomposition of an initial environment state.

    Accepts a StateVector (pure fast path) or a DensityMatrix; returns
    (weights, column matrix of states).
    """
    if isinstance(omega0, StateVector):
        return np.array([1.0]), omega0.amplitudes[:, None].copy()
    if isinstance(omega0, DensityMatrix):
        w, v = omega0.eigensystem(weight_cutoff)
        return w, v
    raise TypeError(f"unsupported initial state type {type(omega0)!r}")


def estimate_localization(params: RotorParams, omega0, max_kicks: int) -> LocalizationEstimate:
    """Evolve omega0 on the lattice until momentum diffusion saturates.

    The diffusion coefficient is the variance slope over the first
    DIFFUSION_FIT_KICKS kicks (converted to p^2 per kick), the relaxation
    time is where the smoothed variance growth rate falls below 10% of it,
    and the localization length is the participation ratio of the momentum
    distribution time-averaged from relaxation to max_kicks.
    """
    if not isinstance(params.geometry, Lattice):
        raise RotorError("localization estimates require Lattice geometry")
    if params.k < CHAOTIC_K_MIN:
        raise RotorError(f"K={params.k} below the chaotic regime K>={CHAOTIC_K_MIN}")
    if max_kicks <= 2 * DIFFUSION_FIT_KICKS:
        raise RotorError("max_kicks too small to fit the early diffusive slope")

    op = build_floquet(params)
    j = params.momentum_levels().astype(float)
    weights, cols = _as_weighted_states(omega0, 1e-12)
    batch = FloquetBatch([op] * cols.shape[1])

    var = np.empty(max_kicks + 1)
    prob = (np.abs(cols) ** 2) @ weights
    var[0] = prob @ (j - prob @ j) ** 2
    level_rate = None
    t_relax = None
    tail = np.zeros_like(prob)
    n_tail = 0
    states = cols
    for t in range(1, max_kicks + 1):
        states = batch.step(states)
        prob = (np.abs(states) ** 2) @ weights
        mu = prob @ j
        var[t] = prob @ (j - mu) ** 2
        if t == DIFFUSION_FIT_KICKS:
            t_fit = np.arange(DIFFUSION_FIT_KICKS + 1)
            level_rate = np.polyfit(t_fit, var[: DIFFUSION_FIT_KICKS + 1], 1)[0]
            if level_rate <= 0:
                raise RotorError("no initial momentum diffusion measured")
        if level_rate is not None and t_relax is None:
            w = max(DIFFUSION_FIT_KICKS, t // 5)
            if t >= w and (var[t] - var[t - w]) / w < SATURATION_RATE_FRACTION * level_rate:
                t_relax = t
        if t_relax is not None:
            tail += prob
            n_tail += 1

    if t_relax is None:
        raise RotorError(
            f"diffusion did not saturate within {max_kicks} kicks; "
            "increase max_kicks or the lattice")
    if n_tail < max(50, t_relax // 4):
        raise RotorError(
            f"only {n_tail} kicks beyond relaxation ({t_relax}); increase max_kicks")
    pbar = tail / n_tail
    j_loc = 1.0 / float(np.sum(pbar**2))
    d_k = params.hbar_eff**2 * float(level_rate)
    return LocalizationEstimate(j_loc=j_loc, d_k=d_k, t_relax=int(t_relax))
