"""Decoherence, equilibration and disentanglement by a chaotic kicked-rotor
environment: echo-amplitude simulation, spectral long-time averages,
random-matrix predictions, and a batch scan CLI."""

__version__ = "0.1.0"

from .states import (DensityMatrix, StateVector, UnitaryMatrix, hs_distance,
                     inverse_participation_ratio, purity, trace_distance)
from .rotor import (Coupling, FloquetOperator, Lattice, LocalizationEstimate,
                    RotorParams, Torus, apply_step, build_floquet, dense_unitary,
                    estimate_localization)
from .echo import (EchoSeries, EchoStats, OverlapData, SpectralDecomp,
                   allegiance_series, coupling_family, echo_stats, exact_mean_f,
                   exact_mean_f2, brute_force_mean_f2, overlap_data,
                   spectral_decompose)
from .rmt import (MomentReport, RmtInputs, cue_moment_oracle, haar_unitary,
                  predict_constants, predicted_mean_std)
from .reduced import (CentralSpec, ReducedTrajectory, assemble_rho_t,
                      build_trajectory, cat_state_spec, equilibration_report,
                      equilibrium_state)
from .bipartite import (BipartiteSpec, NegativityResult, assemble_bipartite_rho_t,
                        equilibrium_decomposition, family_negativity, negativity,
                        partial_transpose, sudden_death_threshold,
                        two_qubit_bell_like)

__all__ = [name for name in dir() if not name.startswith("_")]
