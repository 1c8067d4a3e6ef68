"""Energy-filtered and thermal observables from time-series amplitudes.

The package rebuilds microcanonical and canonical expectation values from
stroboscopic return amplitudes a(t) through a cosine-filter expansion, with
an exact free-fermion chain and dense diagonalization standing in for the
measuring device, plus Metropolis samplers whose weights come from the
filtered norms.
"""

from .dense import (DenseModel, DenseState, TiltedIsingSectors,
                    build_fermion_chain, build_tilted_ising,
                    build_transverse_ising, build_xy_chain,
                    eigenwindow_average, filtered_expectation_exact,
                    product_state_theta)
from .device import (AmplitudeSource, DenseSource, FreeFermionSource,
                     NoiseSpec, NoisySource, child_seed, reconstruct_signed,
                     wrap_noisy)
from .estimators import (EnergySearchReport, EstimateResult,
                         UnresolvableEnergyError, double_filtered_observable,
                         filtered_observable, find_valid_energy, ldos,
                         shot_budget)
from .filters import (FilterExpansion, FilterSpec, binomial_coefficients,
                      build_expansion, gaussian_cos_gap, nearest_even,
                      truncation_error_bound)
from .ising import (BlockObservable, FockState, IsingModel, block_spectrum,
                    block_traces, exact_canonical, exact_microcanonical,
                    hamiltonian_blocks, loschmidt_amplitude,
                    magnetization_blocks, random_fock_state, state_energy)
from .qamc import (ColdStartError, McConfig, McTrace, integrated_weight,
                   metropolis_canonical, metropolis_micro)

__version__ = "0.1.0"

__all__ = [
    "AmplitudeSource", "BlockObservable", "ColdStartError", "DenseModel",
    "DenseSource", "DenseState", "EnergySearchReport", "EstimateResult",
    "FilterExpansion", "FilterSpec", "FockState", "FreeFermionSource",
    "IsingModel", "McConfig", "McTrace", "NoiseSpec", "NoisySource",
    "TiltedIsingSectors", "UnresolvableEnergyError", "binomial_coefficients",
    "block_spectrum", "block_traces", "build_expansion", "build_fermion_chain",
    "build_tilted_ising", "build_transverse_ising", "build_xy_chain",
    "child_seed", "double_filtered_observable", "eigenwindow_average",
    "exact_canonical", "exact_microcanonical", "filtered_expectation_exact",
    "filtered_observable", "find_valid_energy", "gaussian_cos_gap",
    "hamiltonian_blocks", "integrated_weight", "ldos", "loschmidt_amplitude",
    "magnetization_blocks", "metropolis_canonical", "metropolis_micro",
    "nearest_even", "product_state_theta", "random_fock_state",
    "reconstruct_signed", "shot_budget", "state_energy",
    "truncation_error_bound", "wrap_noisy",
]
