"""Random-matrix predictions for the long-time echo statistics.

In the strongly perturbed chaotic regime the overlap matrix between the
perturbed and unperturbed Floquet eigenbases behaves like a CUE unitary, and
the time-averaged decoherence function and its fluctuation width reduce to
closed forms in the initial environment state: mean C/N_eff and width
G/N_eff, with C and G functionals of w(0) expressed in the unperturbed
eigenbasis.  A seeded Haar-sampling oracle validates the Gaussian moment
inputs of that reduction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .states import DensityMatrix, check_orthonormal

LARGE_N_MIN = 10


class RmtError(ValueError):
    pass


@dataclass(frozen=True)
class RmtInputs:
    """State functionals entering the long-time predictions.

    r_inv: inverse participation ratio of w(0) over the reference eigenbasis;
    tr_omega_sq: purity of w(0); phi: the fluctuation cross term (= r_inv +
    purity, see note in predict_constants); sum_w4: sum of |w_ll|^4; gamma:
    environment degrees of freedom, i.e. the exponent in 1/N_eff ~ hbar^gamma.
    """

    n_eff: int
    r_inv: float
    tr_omega_sq: float
    phi: float
    sum_w4: float
    gamma: int = 1

    def __post_init__(self):
        if self.n_eff < 1 or self.gamma < 1:
            raise RmtError("n_eff and gamma must be positive integers")
        # floating-point headroom: a pure state evaluates to purity 1 + O(eps)
        if not (0 < self.r_inv <= 1 + 1e-9 and 0 < self.tr_omega_sq <= 1 + 1e-9):
            raise RmtError("r_inv and tr_omega_sq must lie in (0, 1]")
        if self.sum_w4 > self.r_inv + 1e-12:
            raise RmtError("sum |w_ll|^4 cannot exceed the participation ratio")

    @property
    def c_const(self) -> float:
        """Mean-value constant: <F> = c_const / n_eff."""
        return self.r_inv + self.tr_omega_sq

    @property
    def g_const(self) -> float:
        """Fluctuation-width constant: dF = g_const / n_eff."""
        return float(np.sqrt(2 * self.r_inv**2 - 2 * self.sum_w4 + self.phi**2))


def predict_constants(omega0: DensityMatrix, basis, n_eff: int | None = None,
                      weight_cutoff: float = 1e-6, gamma: int = 1) -> RmtInputs:
    """Evaluate the C and G functionals of w(0) over an orthonormal eigenbasis.

    phi is taken as r_inv + purity.  The fluctuation formula is quoted in the
    literature with an ambiguous double-sum normalization for this term; the
    brute-force second-moment oracle (tests) singles out this reading: it
    reproduces dF*N -> sqrt(6) for the maximally mixed state and dF = <F>
    (hence G = C) for pure states, both required of the prediction.
    """
    v = check_orthonormal(basis)
    omega_b = v.conj().T @ omega0.elements @ v
    diag = np.real(np.diag(omega_b))
    r_inv = float(np.sum(diag**2))
    tr_sq = float(np.sum(np.abs(omega_b) ** 2))
    sum_w4 = float(np.sum(diag**4))
    if n_eff is None:
        w = np.sort(diag)[::-1]
        total = np.cumsum(w)
        n_eff = int(np.searchsorted(total, total[-1] * (1 - weight_cutoff)) + 1)
    return RmtInputs(n_eff=int(n_eff), r_inv=r_inv, tr_omega_sq=tr_sq,
                     phi=r_inv + tr_sq, sum_w4=sum_w4, gamma=gamma)


def predicted_mean_std(inputs: RmtInputs) -> tuple[float, float]:
    """(C/N_eff, G/N_eff); only meaningful in the large-N_eff regime."""
    if inputs.n_eff < LARGE_N_MIN:
        raise RmtError(
            f"n_eff={inputs.n_eff} is outside the large-N validity (need >= {LARGE_N_MIN})")
    return inputs.c_const / inputs.n_eff, inputs.g_const / inputs.n_eff


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary: QR of a complex Ginibre matrix with the
    R-diagonal phase ambiguity fixed."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


@dataclass(frozen=True)
class MomentReport:
    """Sampled CUE moments of a single designated overlap element.

    One matrix element per draw keeps the samples independent (elements of
    one unitary are correlated by the unitarity constraints), so the standard
    errors below are honest.
    """

    n: int
    samples: int
    mean_sq: float
    se_sq: float
    mean_quart: float
    se_quart: float

    @property
    def expected_sq(self) -> float:
        return 1.0 / self.n

    @property
    def expected_quart(self) -> float:
        return 2.0 / self.n**2

    @property
    def sq_deviation_sigmas(self) -> float:
        return abs(self.mean_sq - self.expected_sq) / self.se_sq

    @property
    def quart_deviation_sigmas(self) -> float:
        return abs(self.mean_quart - self.expected_quart) / self.se_quart


def cue_moment_oracle(n: int, samples: int, seed: int) -> MomentReport:
    """Monte Carlo check of the Gaussian moments |O|^2 -> 1/N, |O|^4 -> 2/N^2."""
    if n < 8:
        raise RmtError("n must be >= 8")
    if samples < 100:
        raise RmtError("need at least 100 samples")
    rng = np.random.default_rng(seed)
    sq = np.empty(samples)
    for i in range(samples):
        u = haar_unitary(n, rng)
        sq[i] = np.abs(u[0, 0]) ** 2
    quart = sq**2
    return MomentReport(
        n=n, samples=samples,
        mean_sq=float(sq.mean()), se_sq=float(sq.std(ddof=1) / np.sqrt(samples)),
        mean_quart=float(quart.mean()), se_quart=float(quart.std(ddof=1) / np.sqrt(samples)),
    )
