"""Quantum-jump trajectory simulation and martingale verification of
stochastic entropy production in nonequilibrium steady states."""

from .model import (
    JumpChannel,
    QuantumModel,
    QubitParams,
    SteadyState,
    build_liouvillian,
    model_from_json,
    qubit_from_rates,
    qubit_preset,
    steady_state,
    thermal_qubit,
)
from .rng import StreamKey, stream

__version__ = "0.1.0"
