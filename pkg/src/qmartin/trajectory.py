"""Stochastic wavefunction trajectories under continuous monitoring.

A trajectory starts from a projective measurement in the pi-eigenbasis
(outcome n(0) with probability pi_n), evolves by smooth non-Hermitian
drift interrupted by jumps (k_j, t_j), and is optionally closed by a
second projective measurement defining n(t).  Records keep the
premeasurement state snapshots on a uniform sampling grid together with
the cumulative environmental entropy, which is everything the entropy
functionals need.

Two integrators are available (see ``_kernels``): the per-step Euler
scheme whose single-step behaviour is exposed by :func:`step`, and the
waiting-time scheme ("exact") that samples jump times in continuous
time.  Both are pure functions of their stream address, so a record is
reproducible from (model, dt, stream) alone.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as kern
from .errors import ModelValidationError, OffGridError, StepSizeError
from .model import QuantumModel, SteadyState
from .rng import (
    PURPOSE_BRANCH,
    PURPOSE_BRANCH_VIRTUAL,
    PURPOSE_TRAJ,
    PURPOSE_VIRTUAL,
    StreamKey,
)

# A pure state is a complex amplitude vector of unit Euclidean norm.
PureState = np.ndarray

NORM_ATOL = 1e-9


@dataclass(frozen=True)
class JumpEvent:
    """Detection of an environment event: channel index and time."""

    channel: int
    time: float


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """One monitored trajectory with sampled snapshots.

    ``states`` holds the premeasurement wavefunction at the grid times;
    ``measure_final`` does not overwrite them (it fills ``n_final`` and
    ``final_state``), so entropy series recomputed from the snapshots
    are unaffected by the final measurement.
    """

    n0: int
    events: tuple[JumpEvent, ...]
    grid: np.ndarray
    states: np.ndarray
    env_entropy_cum: np.ndarray
    born_weights: np.ndarray
    stream: StreamKey
    dt: float
    sample_every: int
    integrator: str
    t0: float = 0.0
    n_final: int | None = None
    final_state: np.ndarray | None = None
    pending_n_final: int = -1    # Born outcome pre-drawn from the stream

    def __post_init__(self):
        norms = np.linalg.norm(self.states, axis=1)
        if np.max(np.abs(norms - 1.0)) > NORM_ATOL:
            raise ModelValidationError("stored states deviate from unit norm")
        times = np.array([ev.time for ev in self.events])
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ModelValidationError("event times must be strictly increasing")

    @property
    def t_final(self) -> float:
        return float(self.grid[-1])

    @property
    def rng_stream_id(self) -> tuple[int, int, int, int]:
        return self.stream.words()

    def counts(self, n_channels: int) -> np.ndarray:
        """Number of jumps per channel, N_k(t_final)."""
        out = np.zeros(n_channels, dtype=np.int64)
        for ev in self.events:
            out[ev.channel] += 1
        return out


@dataclass(frozen=True)
class Checkpoint:
    """State of a trajectory at a grid time, sufficient for branching."""

    time: float
    state: PureState
    env_entropy_cum: float
    n0: int


@functools.lru_cache(maxsize=32)
def _bundle(model: QuantumModel, steady: SteadyState, integrator: str):
    """Precomputed kernel arrays for (model, steady)."""
    d = model.dim
    ham = np.ascontiguousarray(model.hamiltonian)
    ls = np.ascontiguousarray(
        np.stack([ch.operator for ch in model.channels])
        if model.channels else np.zeros((0, d, d), dtype=complex))
    ms = np.ascontiguousarray(
        np.stack([op.conj().T @ op for op in ls])
        if len(ls) else np.zeros((0, d, d), dtype=complex))
    ds_env = np.ascontiguousarray(
        np.array([ch.env_entropy for ch in model.channels], dtype=float))
    sum_m = ms.sum(axis=0) if len(ms) else np.zeros((d, d), dtype=complex)
    pi_vecs = np.ascontiguousarray(steady.eigenvectors)
    pv = np.ascontiguousarray(steady.eigenvalues)
    lnpv = np.log(pv)
    if integrator == "euler":
        drift = np.ascontiguousarray(-1j * ham - 0.5 * sum_m)
        return {
            "integrator": "euler",
            "A": drift, "Ls": ls, "Ms": ms, "ds": ds_env,
            "PiH": np.ascontiguousarray(pi_vecs.conj().T),
            "pv": pv, "lnpv": lnpv,
            "psi_cols": pi_vecs.copy(),
        }
    if integrator == "exact":
        heff = ham - 0.5j * sum_m
        lam, vmat = np.linalg.eig(heff)
        if np.linalg.cond(vmat) > 1e8:
            raise ModelValidationError(
                "effective Hamiltonian is nearly defective; use the euler integrator")
        vinv = np.linalg.inv(vmat)
        gops = np.ascontiguousarray(
            np.stack([vinv @ op @ vmat for op in ls])
            if len(ls) else np.zeros((0, d, d), dtype=complex))
        mv = np.ascontiguousarray(
            np.stack([vmat.conj().T @ m @ vmat for m in ms])
            if len(ms) else np.zeros((0, d, d), dtype=complex))
        return {
            "integrator": "exact",
            "lam": np.ascontiguousarray(lam),
            "W": np.ascontiguousarray(pi_vecs.conj().T @ vmat),
            "G": gops, "MV": mv, "ds": ds_env,
            "pv": pv, "lnpv": lnpv,
            "cinit_cols": np.ascontiguousarray(vinv @ pi_vecs),
            "Pi": pi_vecs.copy(),
            "Vinv": np.ascontiguousarray(vinv),
        }
    raise ValueError(f"unknown integrator {integrator!r}")


def expected_activity(model: QuantumModel, steady: SteadyState) -> float:
    """Mean jump rate in the stationary ensemble, sum_k tr(L_k pi L_k^+)."""
    rho = steady.density
    return float(sum((ch.operator @ rho @ ch.operator.conj().T).trace().real
                     for ch in model.channels))


def sample_initial(steady: SteadyState, rng: np.random.Generator) -> tuple[int, PureState]:
    """Draw n with probability pi_n; the initial state is |pi_n>."""
    u = rng.random()
    cum = np.cumsum(steady.eigenvalues)
    n0 = min(int(np.searchsorted(cum, u, side="right")), steady.dim - 1)
    return n0, steady.eigenvectors[:, n0].copy()


@functools.lru_cache(maxsize=32)
def _step_arrays(model: QuantumModel):
    ls = [ch.operator for ch in model.channels]
    ms = [op.conj().T @ op for op in ls]
    sum_m = sum(ms) if ms else np.zeros((model.dim, model.dim), dtype=complex)
    drift = -1j * model.hamiltonian - 0.5 * sum_m
    return ls, ms, drift


def step(model: QuantumModel, state: PureState, dt: float,
         rng: np.random.Generator, t: float = 0.0) -> tuple[PureState, JumpEvent | None]:
    """Advance one Euler step of size dt.

    With probability p_k = dt*<L_k^+ L_k> the state collapses through
    channel k (one jump at most per step, channel chosen proportionally
    to p_k); otherwise the renormalized no-jump update

        psi <- psi + dt*(-iH + (sum_k <L_k^+L_k> - L_k^+L_k)/2) psi

    is applied.  The jump decision and the channel selection share a
    single uniform draw.  Raises StepSizeError when the total jump
    probability exceeds 0.5.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    ls, ms, drift = _step_arrays(model)
    psi = np.asarray(state, dtype=complex)
    ew = np.array([max((psi.conj() @ (m @ psi)).real, 0.0) for m in ms])
    q_tot = float(ew.sum())
    p_tot = dt * q_tot
    if p_tot > 0.5:
        raise StepSizeError(
            f"per-step jump probability {p_tot:.3f} > 0.5; reduce dt")
    u = rng.random()
    if u < p_tot:
        k = min(int(np.searchsorted(np.cumsum(dt * ew), u, side="right")), ew.size - 1)
        phi = ls[k] @ psi
        return phi / np.linalg.norm(phi), JumpEvent(channel=k, time=t + dt)
    phi = psi + dt * (drift @ psi + 0.5 * q_tot * psi)
    return phi / np.linalg.norm(phi), None


def _as_stream(stream) -> StreamKey:
    if isinstance(stream, StreamKey):
        return stream
    return StreamKey(int(stream))


def _n_steps(t_final: float, dt: float, sample_every: int) -> tuple[int, int]:
    if t_final <= 0 or dt <= 0:
        raise ValueError("t_final and dt must be positive")
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    n_steps = int(round(t_final / dt))
    if n_steps < 1 or abs(n_steps * dt - t_final) > 1e-9 * max(1.0, abs(t_final)):
        raise ValueError(f"dt={dt} does not divide t_final={t_final}")
    if n_steps % sample_every:
        raise ValueError("sample_every must divide the number of steps")
    return n_steps, n_steps // sample_every


def _run_segment(model, steady, *, stream, aux_purpose, horizon, dt, sample_every,
                 integrator, draw_initial, n0=0, psi0=None, s_env0=0.0, t0=0.0,
                 track_virtual=False):
    """Run one trajectory segment through the record kernel, with retry
    when the event buffer overflows."""
    bun = _bundle(model, steady, integrator)
    n_steps, n_grid = _n_steps(horizon, dt, sample_every)
    d = model.dim
    h = sample_every * dt
    act = expected_activity(model, steady)
    cap = max(64, int(8 * act * horizon))
    if integrator == "euler":
        cap = min(cap, n_steps)
    key = _as_stream(stream)
    seed, purpose, a_id, b_id = (np.uint64(x) for x in key.words())

    cdummy = np.zeros(d, dtype=complex)
    while True:
        grid_w = np.empty((n_grid + 1, d))
        grid_senv = np.empty(n_grid + 1)
        grid_states = np.empty((n_grid + 1, d), dtype=complex)
        ev_k = np.empty(cap, dtype=np.int64)
        ev_t = np.empty(cap)
        out = np.empty(kern.NOUT)
        counts = np.zeros(max(model.n_channels, 1), dtype=np.int64)
        if integrator == "euler":
            psi_in = cdummy if draw_initial else np.ascontiguousarray(psi0, dtype=complex)
            kern.record_euler(bun["A"], bun["Ls"], bun["Ms"], bun["ds"], bun["PiH"],
                              bun["pv"], bun["lnpv"], bun["psi_cols"],
                              draw_initial, n0, psi_in, s_env0,
                              seed, purpose, a_id, b_id, np.uint64(aux_purpose),
                              n_grid, sample_every, dt, track_virtual,
                              grid_w, grid_senv, grid_states, ev_k, ev_t, out, counts)
        else:
            c_in = cdummy if draw_initial else np.ascontiguousarray(
                bun["Vinv"] @ np.asarray(psi0, dtype=complex))
            kern.record_exact(bun["lam"], bun["W"], bun["G"], bun["MV"], bun["ds"],
                              bun["pv"], bun["lnpv"], bun["cinit_cols"],
                              draw_initial, n0, c_in, s_env0,
                              seed, purpose, a_id, b_id, np.uint64(aux_purpose),
                              n_grid, h, track_virtual,
                              grid_w, grid_senv, grid_states, ev_k, ev_t, out, counts)
        status = int(out[kern.OUT_STATUS])
        if status == kern.STATUS_EVENT_OVERFLOW:
            cap *= 4
            continue
        if status == kern.STATUS_STEP_TOO_COARSE:
            raise StepSizeError("per-step jump probability exceeded 0.5; reduce dt")
        if status != kern.STATUS_OK:
            raise RuntimeError(f"trajectory kernel failed with status {status}")
        break

    if integrator == "exact":
        # kernel stores pi-basis amplitudes; convert to the computational basis
        states = grid_states @ bun["Pi"].T
    else:
        states = grid_states
    n_events = int(out[kern.OUT_N_EVENTS])
    events = tuple(JumpEvent(channel=int(ev_k[j]), time=t0 + float(ev_t[j]))
                   for j in range(n_events))
    grid = t0 + np.arange(n_grid + 1) * h
    return TrajectoryRecord(
        n0=int(out[kern.OUT_N0]), events=events, grid=grid, states=states,
        env_entropy_cum=grid_senv, born_weights=grid_w, stream=key,
        dt=dt, sample_every=sample_every, integrator=integrator, t0=t0,
        pending_n_final=int(out[kern.OUT_N_FINAL]))


def simulate(model: QuantumModel, steady: SteadyState, t_final: float, dt: float,
             stream, *, sample_every: int = 1, integrator: str = "euler",
             track_virtual: bool = False) -> TrajectoryRecord:
    """Full trajectory over [0, t_final] without the final measurement.

    ``stream`` is a StreamKey (or a bare seed, meaning trajectory 0 of
    that seed).  The initial outcome n(0) is drawn from the steady-state
    spectrum as the stream's first uniform.
    """
    return _run_segment(model, steady, stream=stream, aux_purpose=PURPOSE_VIRTUAL,
                        horizon=t_final, dt=dt, sample_every=sample_every,
                        integrator=integrator, draw_initial=True,
                        track_virtual=track_virtual)


def measure_final(record: TrajectoryRecord, steady: SteadyState,
                  rng: np.random.Generator | None = None) -> TrajectoryRecord:
    """Projective measurement in the pi-eigenbasis at the record's end.

    With rng=None the outcome pre-drawn from the record's own stream is
    used (bitwise-reproducible); an explicit generator draws afresh.
    """
    if record.n_final is not None:
        raise ValueError("record already carries a final measurement")
    if rng is None:
        n = record.pending_n_final
    else:
        w = record.born_weights[-1]
        u = rng.random()
        n = min(int(np.searchsorted(np.cumsum(w), u * w.sum(), side="right")),
                w.size - 1)
    return replace(record, n_final=n, final_state=steady.eigenvectors[:, n].copy())


def checkpoint_at(record: TrajectoryRecord, tau: float) -> Checkpoint:
    """Snapshot (tau, psi(tau), cumulative s_env, n0) for branching."""
    idx = int(np.argmin(np.abs(record.grid - tau)))
    if abs(record.grid[idx] - tau) > 5e-10 * max(1.0, abs(tau)):
        raise OffGridError(f"tau={tau} is not on the sampling grid")
    return Checkpoint(time=float(record.grid[idx]),
                      state=record.states[idx].copy(),
                      env_entropy_cum=float(record.env_entropy_cum[idx]),
                      n0=record.n0)


def branch(model: QuantumModel, steady: SteadyState, checkpoint: Checkpoint,
           t_final: float, dt: float, n_branches: int, seed: int, *,
           parent_index: int = 0, sample_every: int = 1, integrator: str = "euler",
           streams: list[StreamKey] | None = None) -> tuple[TrajectoryRecord, ...]:
    """Independent continuations of a trajectory from a checkpoint.

    No projection is applied at the branch point: each branch continues
    the unmeasured wavefunction psi(tau), inheriting n(0) and the
    accumulated environment entropy.  Branch b reads the stream
    (seed, BRANCH, parent_index, b) unless explicit streams are given.
    """
    if t_final < checkpoint.time - 1e-12:
        raise ValueError("t_final must be >= checkpoint.time")
    horizon = t_final - checkpoint.time
    out = []
    for bidx in range(n_branches):
        key = (streams[bidx] if streams is not None
               else StreamKey(seed, PURPOSE_BRANCH, parent_index, bidx))
        out.append(_run_segment(
            model, steady, stream=key, aux_purpose=PURPOSE_BRANCH_VIRTUAL,
            horizon=horizon, dt=dt, sample_every=sample_every,
            integrator=integrator, draw_initial=False, n0=checkpoint.n0,
            psi0=checkpoint.state, s_env0=checkpoint.env_entropy_cum,
            t0=checkpoint.time))
    return tuple(out)


def dump_jsonl(records, path, include_states: bool = False) -> None:
    """One JSON document per record: {n0, events, grid_dt, env_cum, n_final}."""
    with open(path, "w") as fh:
        for rec in records:
            doc = {
                "n0": rec.n0,
                "events": [[ev.channel, ev.time] for ev in rec.events],
                "grid_dt": rec.dt * rec.sample_every,
                "t0": rec.t0,
                "env_cum": [float(x) for x in rec.env_entropy_cum],
                "n_final": rec.n_final,
            }
            if include_states:
                doc["states"] = [[[z.real, z.imag] for z in row] for row in rec.states]
            fh.write(json.dumps(doc) + "\n")
