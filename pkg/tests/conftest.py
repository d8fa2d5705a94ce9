import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qmartin import model as qm


@pytest.fixture(scope="session")
def fig2b():
    """Reference workload: omega=1, beta=0.2, eta=0.5, gamma_gap=0.01."""
    model = qm.qubit_preset(qm.QubitParams(1.0, 0.2, 0.5, 0.01))
    return model, qm.steady_state(model)


@pytest.fixture(scope="session")
def fig2c():
    """Near-classical workload: beta = eta = 0.04, gamma_gap = 0.01."""
    model = qm.qubit_preset(qm.QubitParams(1.0, 0.04, 0.04, 0.01))
    return model, qm.steady_state(model)


@pytest.fixture(scope="session")
def thermal():
    """Thermal-noise-only qubit (equilibrium; the classical limit)."""
    model = qm.thermal_qubit(1.0, 0.2, 0.01)
    return model, qm.steady_state(model)


@pytest.fixture(scope="session")
def zero_rate():
    """No channels at all; any H-diagonal density matrix is stationary."""
    model = qm.QuantumModel(dim=2, hamiltonian=qm.SIGMA_Z, channels=())
    steady = qm.SteadyState.from_density(model, np.diag([0.7, 0.3]).astype(complex))
    return model, steady
