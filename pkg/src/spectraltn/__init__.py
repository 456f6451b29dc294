"""Fermionic FFT circuits as tensor networks, with free-fermion oracles."""

__version__ = "0.1.0"

from .circuit import Circuit, build_qfft_1d, build_qfft_2d, dumps_circuit, loads_circuit
from .engine import Engine, LocalOperator, energy, environment, expect_all_two_site, expect_one_site, expect_two_site
from .graded import Gate, GradedTensor, WireSpace
from .models import ModelSpec, build_model, correlation_experiment, susceptibility_sweep
from .state import MomentumOccupation, SpectralState, build_state, dense_amplitudes
from .variational import OptimizationConfig, bond_grow, minimize_energy

__all__ = [
    "Circuit",
    "Engine",
    "Gate",
    "GradedTensor",
    "LocalOperator",
    "ModelSpec",
    "MomentumOccupation",
    "OptimizationConfig",
    "SpectralState",
    "WireSpace",
    "bond_grow",
    "build_model",
    "build_qfft_1d",
    "build_qfft_2d",
    "build_state",
    "correlation_experiment",
    "dense_amplitudes",
    "dumps_circuit",
    "energy",
    "environment",
    "expect_all_two_site",
    "expect_one_site",
    "expect_two_site",
    "loads_circuit",
    "minimize_energy",
    "susceptibility_sweep",
]
