"""Digital three-state adiabatic passage with exact piecewise-constant propagation."""

from .analysis import (
    ErrorEstimate,
    ResonanceSet,
    adiabaticity_general,
    adiabaticity_linear,
    adiabaticity_sincos,
    resonance_times,
    step_overlap_error,
    total_error_estimate,
)
from .core import CouplingPair, DegenerateCouplingError, EigenSystem, StateVector, dark_state, eigensystem, hamiltonian
from .experiments import SweepResult, error_vs_n, sweep_grid, sweep_tmax, timeseries_experiment
from .io import read_dataset, write_dataset
from .propagator import Trajectory, compose, evolve_trajectory, expm_oracle, step_unitary, transfer_fidelity
from .schemes import Protocol, PulseStep, Scheme, Timing, build_protocol, digital_couplings

__version__ = "0.1.0"
