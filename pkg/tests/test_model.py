import math

import numpy as np
import pytest

from qmartin import errors, model as qm
from qmartin.rng import stream, PURPOSE_TEST

from oracles import model_ops, steady_from_nullspace

FIG2B = qm.QubitParams(omega=1.0, beta=0.2, eta=0.5, gamma_gap=0.01)


def test_hamiltonian_must_be_hermitian():
    with pytest.raises(errors.ModelValidationError):
        qm.QuantumModel(dim=2, hamiltonian=np.array([[0, 1], [0, 0]]), channels=())


def test_channel_shape_mismatch_rejected():
    ch = qm.JumpChannel(np.zeros((3, 3)), 0.0)
    with pytest.raises(errors.ModelValidationError):
        qm.QuantumModel(dim=2, hamiltonian=np.eye(2), channels=(ch,))


def test_pairing_validation_rejects_wrong_factor():
    down = qm.JumpChannel(qm.SIGMA_MINUS, 1.0)
    up = qm.JumpChannel(qm.SIGMA_PLUS, -1.0)  # rates equal -> factor e^{1/2} missing
    with pytest.raises(errors.ModelValidationError):
        qm.QuantumModel(dim=2, hamiltonian=qm.SIGMA_Z, channels=(down, up),
                        pairing=((0, 1),))


def test_liouvillian_matches_direct_action():
    model = qm.qubit_preset(FIG2B)
    liou = qm.build_liouvillian(model)
    gen = stream(1, PURPOSE_TEST)
    for _ in range(5):
        a = gen.normal(size=(2, 2)) + 1j * gen.normal(size=(2, 2))
        rho = a + a.conj().T
        lhs = (liou @ rho.reshape(-1, order="F")).reshape((2, 2), order="F")
        rhs = qm.apply_liouvillian(model, rho)
        assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_zero_rate_liouvillian_is_commutator_only():
    # no channels: diagonal states are stationary under -i[H, .]
    model = qm.QuantumModel(dim=2, hamiltonian=qm.SIGMA_Z, channels=())
    liou = qm.build_liouvillian(model)
    rho = np.diag([0.3, 0.7]).astype(complex)
    assert np.max(np.abs(liou @ rho.reshape(-1, order="F"))) == 0.0


def test_liouvillian_spectrum_qubit_preset():
    # full 4x4 eigendecomposition: exactly one zero mode, rest decaying
    model = qm.qubit_preset(FIG2B)
    vals = np.linalg.eigvals(qm.build_liouvillian(model))
    vals = vals[np.argsort(np.abs(vals))]
    assert abs(vals[0]) < 1e-10
    assert np.all(vals[1:].real < 0)


def test_trace_preservation_property():
    model = qm.qubit_preset(FIG2B)
    liou = qm.build_liouvillian(model)
    gen = stream(2, PURPOSE_TEST)
    for _ in range(20):
        a = gen.normal(size=(2, 2)) + 1j * gen.normal(size=(2, 2))
        rho = a + a.conj().T
        out = (liou @ rho.reshape(-1, order="F")).reshape((2, 2), order="F")
        assert abs(np.trace(out)) < 1e-12


def test_steady_state_annihilated_by_liouvillian():
    model = qm.qubit_preset(FIG2B)
    steady = qm.steady_state(model)
    liou = qm.build_liouvillian(model)
    resid = liou @ steady.density.reshape(-1, order="F")
    assert np.max(np.abs(resid)) < 1e-10


def test_steady_state_matches_nullspace_oracle():
    model = qm.qubit_preset(FIG2B)
    steady = qm.steady_state(model)
    rho_ref = steady_from_nullspace(model.hamiltonian, model_ops(model))
    assert np.max(np.abs(steady.density - rho_ref)) < 1e-10
    vals_ref = np.sort(np.linalg.eigvalsh(rho_ref))[::-1]
    assert np.allclose(steady.eigenvalues, vals_ref, atol=1e-10)
    assert 0.0 < steady.pi_min < steady.pi_max < 1.0
    assert abs(steady.eigenvalues.sum() - 1.0) < 1e-12


def test_infinite_temperature_limit_is_maximally_mixed():
    # beta = eta = 0 has no gap solution; equal absolute rates realize it
    model = qm.qubit_from_rates(1.0, 0.05, 0.05, 0.02, 0.02)
    steady = qm.steady_state(model)
    assert np.max(np.abs(steady.density - 0.5 * np.eye(2))) < 1e-12


def test_thermal_qubit_is_gibbs_diagonal():
    omega, beta = 1.0, 0.2
    model = qm.thermal_qubit(omega, beta, 0.01)
    steady = qm.steady_state(model)
    off = steady.density - np.diag(np.diag(steady.density))
    assert np.max(np.abs(off)) < 1e-12
    # detailed-balance fixed point of the two-state rate equation
    assert steady.eigenvalues[0] / steady.eigenvalues[1] == pytest.approx(
        math.exp(beta * omega), rel=1e-10)


def test_spectral_reconstruction():
    model = qm.qubit_preset(FIG2B)
    steady = qm.steady_state(model)
    rebuilt = (steady.eigenvectors * steady.eigenvalues) @ steady.eigenvectors.conj().T
    assert np.max(np.abs(rebuilt - steady.density)) < 1e-10


def test_qubit_rates_reproduce_gap():
    g_down, g_up, g_minus, g_plus = qm.qubit_rates(FIG2B)
    assert abs((g_down - g_up) - 0.01) < 1e-15
    assert abs((g_minus - g_plus) - 0.01) < 1e-15


def test_qubit_rates_closed_form():
    params = qm.QubitParams(omega=1.0, beta=0.04, eta=0.04, gamma_gap=0.01)
    expected = 0.01 / (1.0 - math.exp(-0.04))  # computed before the build
    g_down, _, g_minus, _ = qm.qubit_rates(params)
    assert g_down == pytest.approx(expected, rel=1e-12)
    assert g_minus == pytest.approx(expected, rel=1e-12)


def test_preset_pairing_holds_entrywise():
    model = qm.qubit_preset(FIG2B)
    bw = FIG2B.beta * FIG2B.omega
    l_down, l_up = model.channels[0].operator, model.channels[1].operator
    assert np.max(np.abs(l_down - l_up.conj().T * math.exp(bw / 2))) < 1e-12
    assert model.partner(0) == 1 and model.partner(2) == 3


def test_pairing_property_random_parameters():
    gen = stream(3, PURPOSE_TEST)
    for _ in range(50):
        params = qm.QubitParams(
            omega=0.1 + 2.9 * gen.random(),
            beta=0.01 + 1.99 * gen.random(),
            eta=0.01 + 1.99 * gen.random(),
            gamma_gap=0.001 + 0.099 * gen.random(),
        )
        model = qm.qubit_preset(params)  # __post_init__ enforces the pairing
        for k, kp in model.pairing:
            ds = model.channels[k].env_entropy
            lhs = model.channels[k].operator
            rhs = model.channels[kp].operator.conj().T * math.exp(ds / 2)
            assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_rate_resolution_fails_at_zero_bias():
    with pytest.raises(errors.RateResolutionError):
        qm.qubit_preset(qm.QubitParams(omega=1.0, beta=0.0, eta=0.5, gamma_gap=0.01))
    with pytest.raises(errors.RateResolutionError):
        qm.qubit_preset(qm.QubitParams(omega=1.0, beta=0.2, eta=0.0, gamma_gap=0.01))


def test_degenerate_null_space_rejected():
    model = qm.QuantumModel(dim=2, hamiltonian=qm.SIGMA_Z, channels=())
    with pytest.raises(errors.NonUniqueSteadyStateError):
        qm.steady_state(model)


def test_rank_deficient_steady_state_rejected():
    # pure decay -> pi = |1><1| is rank one
    model = qm.QuantumModel(
        dim=2, hamiltonian=0.5 * qm.SIGMA_Z,
        channels=(qm.JumpChannel(0.3 * qm.SIGMA_MINUS, 0.0),))
    with pytest.raises(errors.RankDeficientSteadyStateError):
        qm.steady_state(model)


def test_json_round_trip():
    model = qm.qubit_preset(FIG2B)
    doc = qm.model_to_json(model)
    model2 = qm.model_from_json(doc)
    assert np.array_equal(model.hamiltonian, model2.hamiltonian)
    for a, b in zip(model.channels, model2.channels):
        assert np.array_equal(a.operator, b.operator)
        assert a.env_entropy == b.env_entropy
    assert model.pairing == model2.pairing


def test_json_preset_form():
    doc = {"preset": "qubit", "omega": 1.0, "beta": 0.2, "eta": 0.5, "gamma_gap": 0.01}
    model = qm.model_from_json(doc)
    assert model.n_channels == 4


def test_json_malformed_rejected():
    with pytest.raises(errors.ModelValidationError):
        qm.model_from_json({"preset": "squeezed"})
    with pytest.raises(errors.ModelValidationError):
        qm.model_from_json({"dim": 2, "hamiltonian": [[1, 0]], "channels": []})
