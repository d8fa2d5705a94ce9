import numpy as np
import pytest

from qmartin import entropy as qe
from qmartin import model as qm
from qmartin import trajectory as qt
from qmartin.rng import StreamKey, stream, PURPOSE_TEST

from oracles import steady_from_nullspace, model_ops


def _random_state(gen, d=2):
    v = gen.normal(size=d) + 1j * gen.normal(size=d)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------- fidelity weight

def test_fidelity_weight_eigenstate(fig2b):
    _, steady = fig2b
    for k in range(2):
        fw = qe.fidelity_weight(steady.eigenvectors[:, k], steady)
        assert abs(fw - steady.eigenvalues[k]) < 1e-14


def test_fidelity_weight_maximally_mixed():
    model = qm.qubit_from_rates(1.0, 0.05, 0.05, 0.02, 0.02)
    steady = qm.steady_state(model)
    gen = stream(40, PURPOSE_TEST)
    for _ in range(20):
        assert abs(qe.fidelity_weight(_random_state(gen), steady) - 0.5) < 1e-14


def test_fidelity_weight_equals_direct_expectation(fig2b):
    # eigenbasis formula vs <psi|pi|psi> from the density matrix
    _, steady = fig2b
    gen = stream(41, PURPOSE_TEST)
    for _ in range(50):
        psi = _random_state(gen)
        direct = (psi.conj() @ steady.density @ psi).real
        assert abs(qe.fidelity_weight(psi, steady) - direct) < 1e-12


def test_fidelity_weight_stays_in_spectrum_range(fig2b):
    _, steady = fig2b
    gen = stream(42, PURPOSE_TEST)
    for _ in range(200):
        fw = qe.fidelity_weight(_random_state(gen), steady)
        assert steady.pi_min <= fw <= steady.pi_max


# ---------------------------------------------------------------- dS_unc

def test_delta_s_unc_eigenstate_is_zero(fig2b):
    _, steady = fig2b
    for n in range(2):
        assert abs(qe.delta_s_unc(n, steady.eigenvectors[:, n], steady)) < 1e-12


def test_delta_s_unc_maximally_mixed_always_zero():
    model = qm.qubit_from_rates(1.0, 0.05, 0.05, 0.02, 0.02)
    steady = qm.steady_state(model)
    gen = stream(43, PURPOSE_TEST)
    for n in range(2):
        for _ in range(10):
            assert abs(qe.delta_s_unc(n, _random_state(gen), steady)) < 1e-12


def test_delta_s_unc_cross_outcome_value(fig2b):
    # state |pi_0> but outcome 1: -ln(pi_1/pi_0), pi from the null-space oracle
    model, steady = fig2b
    rho_ref = steady_from_nullspace(model.hamiltonian, model_ops(model))
    pv_ref = np.sort(np.linalg.eigvalsh(rho_ref))[::-1]
    got = qe.delta_s_unc(1, steady.eigenvectors[:, 0], steady)
    assert got == pytest.approx(np.log(pv_ref[0] / pv_ref[1]), abs=1e-10)


def test_delta_s_unc_bounds(fig2b):
    _, steady = fig2b
    hi = np.log(steady.pi_max / steady.pi_min)
    gen = stream(44, PURPOSE_TEST)
    for _ in range(200):
        psi = _random_state(gen)
        for n in range(2):
            v = qe.delta_s_unc(n, psi, steady)
            assert -hi - 1e-12 <= v <= hi + 1e-12


def test_delta_s_unc_index_range(fig2b):
    _, steady = fig2b
    with pytest.raises(IndexError):
        qe.delta_s_unc(5, steady.eigenvectors[:, 0], steady)


# ---------------------------------------------------------------- dS_tot

def _synthetic_record(steady, n0, events, env_final, n_final, stream_key=None):
    d = steady.dim
    grid = np.array([0.0, 1.0])
    states = np.stack([steady.eigenvectors[:, n0]] * 2)
    w = np.stack([steady.overlaps(states[i]) for i in range(2)])
    return qt.TrajectoryRecord(
        n0=n0, events=events, grid=grid, states=states,
        env_entropy_cum=np.array([0.0, env_final]), born_weights=w,
        stream=stream_key or StreamKey(0), dt=1.0, sample_every=1,
        integrator="euler", n_final=n_final)


def test_delta_s_tot_no_jumps_round_trip(fig2b):
    _, steady = fig2b
    rec = _synthetic_record(steady, 0, (), 0.0, 0)
    assert qe.delta_s_tot(rec, steady) == 0.0


def test_delta_s_tot_single_down_jump(fig2b):
    # boundary term cancels; only the environmental quantum remains
    model, steady = fig2b
    bw = model.channels[0].env_entropy
    rec = _synthetic_record(steady, 0, (qt.JumpEvent(0, 0.5),), bw, 0)
    assert qe.delta_s_tot(rec, steady) == pytest.approx(bw, abs=1e-15)


def test_delta_s_tot_requires_final_measurement(fig2b):
    model, steady = fig2b
    rec = qt.simulate(model, steady, 1.0, 0.01, StreamKey(45))
    with pytest.raises(ValueError):
        qe.delta_s_tot(rec, steady)


# ---------------------------------------------------------------- series

def test_series_zero_rate_all_zero(zero_rate):
    model, steady = zero_rate
    rec = qt.simulate(model, steady, 10.0, 0.01, StreamKey(46), sample_every=10)
    ser = qe.entropy_series(rec, steady)
    assert np.all(ser.s_env == 0.0)
    assert np.max(np.abs(ser.s_mar)) < 1e-12
    assert np.max(np.abs(ser.s_tot_virtual)) < 1e-12


def test_series_identity_pointwise(fig2b):
    # s_mar[i] = ln pi_n0 - ln <pi>_psi(t_i) + s_env[i], by construction
    model, steady = fig2b
    lnpv = np.log(steady.eigenvalues)
    rec = qt.simulate(model, steady, 100.0, 0.01, StreamKey(47), sample_every=10,
                      integrator="exact")
    ser = qe.entropy_series(rec, steady)
    for i in (0, 137, -1):
        fw = qe.fidelity_weight(rec.states[i], steady)
        expect = lnpv[rec.n0] - np.log(fw) + rec.env_entropy_cum[i]
        assert abs(ser.s_mar[i] - expect) < 1e-12


def test_decomposition_identity_exact(fig2b):
    model, steady = fig2b
    for integ in ("euler", "exact"):
        for i in range(20):
            rec = qt.measure_final(
                qt.simulate(model, steady, 50.0, 0.01, StreamKey(48, 0, i),
                            sample_every=10, integrator=integ), steady)
            ser = qe.entropy_series(rec, steady)
            s_tot = qe.delta_s_tot(rec, steady)
            s_unc = qe.delta_s_unc(rec.n_final, rec.states[-1], steady)
            assert abs(s_tot - (ser.s_mar[-1] + s_unc)) < 1e-12


def test_series_unaffected_by_final_measurement(fig2b):
    # dS_mar is measurement-free: snapshots are kept premeasurement
    model, steady = fig2b
    rec = qt.simulate(model, steady, 50.0, 0.01, StreamKey(49), sample_every=10)
    before = qe.entropy_series(rec, steady)
    after = qe.entropy_series(qt.measure_final(rec, steady), steady)
    assert np.array_equal(before.s_mar, after.s_mar)
    assert np.array_equal(before.s_tot_virtual, after.s_tot_virtual)


def test_series_env_increments_exact_at_events(fig2b):
    model, steady = fig2b
    ds = np.array([ch.env_entropy for ch in model.channels])
    rec = qt.simulate(model, steady, 200.0, 0.01, StreamKey(50), sample_every=10,
                      integrator="exact")
    assert len(rec.events) > 3
    ser = qe.entropy_series(rec, steady)
    h = rec.dt * rec.sample_every
    running = 0.0
    k = 0
    for i, t in enumerate(ser.grid):
        while k < len(rec.events) and rec.events[k].time <= t:
            running += ds[rec.events[k].channel]
            k += 1
        assert ser.s_env[i] == pytest.approx(running, abs=1e-12)


def test_series_classical_limit_s_mar_flat(thermal):
    # equilibrium thermal qubit: dS_tot = 0 on every trajectory, so the
    # martingale trace stays at zero across jumps
    model, steady = thermal
    rec = qt.simulate(model, steady, 500.0, 0.01, StreamKey(51), sample_every=10,
                      integrator="exact")
    assert len(rec.events) > 0
    ser = qe.entropy_series(rec, steady)
    assert np.max(np.abs(ser.s_mar)) < 1e-12
    assert np.max(np.abs(ser.s_tot_virtual)) < 1e-12


def test_series_unc_candidates_bounded(fig2b):
    model, steady = fig2b
    lo, hi = np.log(steady.pi_min / steady.pi_max), np.log(steady.pi_max / steady.pi_min)
    rec = qt.simulate(model, steady, 100.0, 0.01, StreamKey(52), sample_every=10,
                      integrator="exact")
    ser = qe.entropy_series(rec, steady)
    assert np.all(ser.s_unc_candidates >= lo - 1e-12)
    assert np.all(ser.s_unc_candidates <= hi + 1e-12)


def test_series_virtual_reproducible_and_infima(fig2b):
    model, steady = fig2b
    rec = qt.simulate(model, steady, 100.0, 0.01, StreamKey(53), sample_every=10,
                      integrator="exact")
    a = qe.entropy_series(rec, steady)
    b = qe.entropy_series(rec, steady)
    assert np.array_equal(a.s_tot_virtual, b.s_tot_virtual)
    assert a.running_inf_mar[-1] == np.min(a.s_mar)
    assert np.all(np.diff(a.running_inf_mar) <= 0)
    assert a.s_tot_virtual[0] == 0.0


def test_series_csv_export(tmp_path, fig2b):
    model, steady = fig2b
    rec = qt.simulate(model, steady, 10.0, 0.01, StreamKey(54), sample_every=10)
    ser = qe.entropy_series(rec, steady)
    path = tmp_path / "series.csv"
    qe.write_series_csv(ser, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "time,s_env,s_mar,s_unc_virtual,s_tot_virtual,inf_mar,inf_tot"
    assert len(lines) == ser.grid.size + 1
    row = [float(x) for x in lines[1].split(",")]
    assert row[0] == 0.0 and abs(row[2]) < 1e-12
