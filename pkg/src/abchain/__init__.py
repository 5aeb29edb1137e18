"""Tilted dissipative Aharonov-Bohm chain in the synthetic dimensions of a trapped ion.

Submodules
----------
params, model
    Parameters, basis layout, Hamiltonians and jump operators.
spectral
    Dense complex eigensolver and localization profiles.
states, dynamics
    Initial states and the three propagation models.
observables
    Phonon statistics, entropy, flux sweeps, trajectory differences.
scenarios, output, plotting, cli
    Figure reproductions, CSV/PNG output and the ``simulate`` command.
"""

__version__ = "0.1.0"

from .dynamics import (
    IntegrationError,
    Model,
    PositivityError,
    Trajectory,
    evolve_hybrid,
    evolve_lindblad,
    evolve_schrodinger,
    run_model,
)
from .model import (
    BasisLayout,
    JumpFamily,
    LatticeOperator,
    Sublattices,
    build_coherent_hamiltonian,
    build_effective_hamiltonian,
    build_jump_operators,
    laguerre,
    sideband_coupling,
)
from .observables import PhononStats, SweepResult, entropy, flux_sweep, phonon_stats, trajectory_diff
from .params import ChainParams, LambDicke, ParameterError, Uniform
from .spectral import EigenPair, EigenSolverError, eigendecompose, localization_profile
from .states import BasisState, DensityState, Gaussian, PureState, Thermal, make_initial_state

__all__ = [
    "__version__",
    "BasisLayout",
    "BasisState",
    "ChainParams",
    "DensityState",
    "EigenPair",
    "EigenSolverError",
    "Gaussian",
    "IntegrationError",
    "JumpFamily",
    "LambDicke",
    "LatticeOperator",
    "Model",
    "ParameterError",
    "PhononStats",
    "PositivityError",
    "PureState",
    "Sublattices",
    "SweepResult",
    "Thermal",
    "Trajectory",
    "Uniform",
    "build_coherent_hamiltonian",
    "build_effective_hamiltonian",
    "build_jump_operators",
    "eigendecompose",
    "entropy",
    "evolve_hybrid",
    "evolve_lindblad",
    "evolve_schrodinger",
    "flux_sweep",
    "laguerre",
    "localization_profile",
    "make_initial_state",
    "phonon_stats",
    "run_model",
    "sideband_coupling",
    "trajectory_diff",
]
