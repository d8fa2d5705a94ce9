"""numba kernels for trajectory generation and online entropy tracking.

Two integrators share one output contract:

``euler``  -- the baseline scheme: per step of size dt, jump of channel k
with probability dt*<L_k^+ L_k>, otherwise the renormalized first-order
no-jump update.  One uniform is consumed per step; within a jump step
the same uniform also selects the channel through the cumulative
probabilities dt*<L_k^+ L_k>.

``exact``  -- waiting-time sampling: between jumps the unnormalized
state evolves with exp(-i H_eff t) (H_eff = H - i/2 sum_k L_k^+ L_k,
held in its eigenbasis), the next jump time solves |psi~(t)|^2 = u
by safeguarded Newton, and the channel is drawn from the conditional
weights <L_k^+ L_k> at the jump time.  The sampled path measure is that
of the stochastic Schroedinger equation itself -- jump times are not
binned to a step grid; the grid only samples the entropy observables.
Main-stream consumption: one initial draw (when requested), one
survival draw, then per jump one channel draw plus one fresh survival
draw, and one final projective draw.

Entropy bookkeeping per grid point t_i (i = 0 .. n_grid):

    w_n(t_i)   = |<pi_n|psi(t_i)>|^2
    fw(t_i)    = sum_n pi_n w_n            (clamped into [pi_min, pi_max])
    s_mar(t_i) = ln pi_n0 - ln fw(t_i) + s_env(t_i)
    s_tot_virtual(t_i) = ln pi_n0 - ln pi_n(t_i) + s_env(t_i),
                         n(t_i) ~ w(t_i) from the auxiliary stream

with running minima of s_mar and s_tot_virtual, optional threshold
detection on s_mar, and a final Born draw from the main stream.  At
t_0 the state is an exact pi-eigenstate, so the virtual outcome is n0
without consuming an auxiliary draw.

All kernels fill one row of ``out`` (see OUT_* indices) plus per-channel
jump counts; grid/event buffers are written only when non-empty arrays
are passed.  A trajectory is a pure function of its stream address
(seed, purpose, trajectory, branch), so ensembles are reproducible
under any processing order.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

from ._philox import make_stream, next_double

# out-row layout shared by every kernel
OUT_N0 = 0
OUT_S_ENV = 1
OUT_FW = 2
OUT_N_FINAL = 3
OUT_INF_MAR = 4
OUT_INF_TOT = 5
OUT_T = 6
OUT_S_MAR_T = 7
OUT_STOP_REASON = 8
OUT_N_EVENTS = 9
OUT_STATUS = 10
OUT_DRAWS = 11
OUT_S_MAR_END = 12
NOUT = 13

STOP_CAP = 0
STOP_UPPER = 1
STOP_LOWER = 2

STATUS_OK = 0
STATUS_EVENT_OVERFLOW = 1
STATUS_STEP_TOO_COARSE = 2
STATUS_STUCK = 3

_DARK_FLOOR = 1e-300


@nb.njit(inline="always", nogil=True, cache=True)
def _pick_index(target, weights):
    """First index whose cumulative weight exceeds target."""
    acc = 0.0
    k = weights.size - 1
    for i in range(weights.size):
        acc += weights[i]
        if target < acc:
            k = i
            break
    return k


@nb.njit(inline="always", nogil=True, cache=True)
def _draw_initial(pv, u):
    acc = 0.0
    n0 = pv.size - 1
    for n in range(pv.size):
        acc += pv[n]
        if u < acc:
            n0 = n
            break
    return n0


@nb.njit(nogil=True, cache=True)
def _jump_time(lam, W, c, u, hi):
    """Solve |W exp(-i lam x) c|^2 = u for x in (0, hi].

    The survival norm is nonincreasing and crosses u inside the
    bracket by construction; Newton steps fall back to bisection
    whenever they leave it.
    """
    d = lam.size
    lo = 0.0
    x = 0.5 * hi
    for _ in range(200):
        s = 0.0
        dsdx = 0.0
        for n in range(d):
            z = 0.0 + 0.0j
            zp = 0.0 + 0.0j
            for m in range(d):
                e = np.exp(-1j * lam[m] * x) * c[m]
                z += W[n, m] * e
                zp += W[n, m] * (-1j * lam[m]) * e
            s += z.real * z.real + z.imag * z.imag
            dsdx += 2.0 * (z.real * zp.real + z.imag * zp.imag)
        f = s - u
        if abs(f) <= 1e-13 * u:
            return x
        if f > 0.0:
            lo = x
        else:
            hi = x
        if hi - lo < 1e-13 * (1.0 + hi):
            break
        if dsdx < 0.0:
            x_new = x - f / dsdx
        else:
            x_new = lo + 0.5 * (hi - lo)
        if x_new <= lo or x_new >= hi:
            x_new = lo + 0.5 * (hi - lo)
        x = x_new
    return 0.5 * (lo + hi)


@nb.njit(nogil=True, cache=True)
def _exact_core(lam, W, G, MV, ds_env, pv, lnpv, cinit_cols,
                draw_initial, n0_in, c_in, s_env0,
                n_grid, h, track_virtual,
                stop_upper, stop_lower, early_stop,
                main, aux,
                grid_w, grid_senv, grid_amp, ev_k, ev_t,
                out, counts):
    d = lam.size
    K = ds_env.size
    pv_min = pv[d - 1]
    pv_max = pv[0]
    draws = 0

    if draw_initial:
        u0 = next_double(main)
        draws += 1
        n0 = _draw_initial(pv, u0)
        c = cinit_cols[:, n0].copy()
    else:
        n0 = n0_in
        c = c_in.copy()

    eh = np.empty(d, np.complex128)
    for n in range(d):
        eh[n] = np.exp(-1j * lam[n] * h)
    a = np.empty(d, np.complex128)
    ctmp = np.empty(d, np.complex128)
    ew = np.empty(K, np.float64)

    s_env = s_env0
    n_events = 0
    status = STATUS_OK
    inf_mar = np.inf
    inf_tot = np.inf
    stop_reason = STOP_CAP
    t_stop = n_grid * h
    s_mar_t = 0.0
    stopped = False
    store_grid = grid_w.shape[0] > 0
    store_states = grid_amp.shape[0] > 0
    store_events = ev_k.shape[0] > 0

    u_jump = next_double(main)
    draws += 1

    fw = 0.0
    s_mar = 0.0
    s_try = 1.0
    for i in range(n_grid + 1):
        if i > 0:
            # propagate one grid cell, resolving any jumps inside it
            h_rem = h
            t_cell = (i - 1) * h
            n_cell_jumps = 0
            while True:
                if h_rem == h:
                    for n in range(d):
                        ctmp[n] = eh[n] * c[n]
                else:
                    for n in range(d):
                        ctmp[n] = np.exp(-1j * lam[n] * h_rem) * c[n]
                s_try = 0.0
                for n in range(d):
                    z = 0.0 + 0.0j
                    for m in range(d):
                        z += W[n, m] * ctmp[m]
                    a[n] = z
                    s_try += z.real * z.real + z.imag * z.imag
                if s_try > u_jump:
                    for n in range(d):
                        c[n] = ctmp[n]
                    break
                # survival dropped below the target: jump inside (0, h_rem]
                n_cell_jumps += 1
                if n_cell_jumps > 10000:
                    status = STATUS_STUCK
                    break
                # dark-state guard: no channel can fire, accept the step
                q_dark = 0.0
                for k in range(K):
                    e = 0.0
                    for n in range(d):
                        z = 0.0 + 0.0j
                        for m in range(d):
                            z += MV[k, n, m] * c[m]
                        e += (c[n].conjugate() * z).real
                    q_dark += max(e, 0.0)
                if q_dark <= _DARK_FLOOR:
                    for n in range(d):
                        c[n] = ctmp[n]
                    break
                dt_jump = _jump_time(lam, W, c, u_jump, h_rem)
                for n in range(d):
                    c[n] = np.exp(-1j * lam[n] * dt_jump) * c[n]
                # channel weights <L_k^+ L_k> at the pre-jump state
                q_tot = 0.0
                for k in range(K):
                    e = 0.0
                    for n in range(d):
                        z = 0.0 + 0.0j
                        for m in range(d):
                            z += MV[k, n, m] * c[m]
                        e += (c[n].conjugate() * z).real
                    ew[k] = max(e, 0.0)
                    q_tot += ew[k]
                if q_tot <= 0.0:
                    status = STATUS_STUCK
                    break
                u_ch = next_double(main)
                draws += 1
                k = _pick_index(u_ch * q_tot, ew)
                for n in range(d):
                    z = 0.0 + 0.0j
                    for m in range(d):
                        z += G[k, n, m] * c[m]
                    ctmp[n] = z
                nrm2 = 0.0
                for n in range(d):
                    z = 0.0 + 0.0j
                    for m in range(d):
                        z += W[n, m] * ctmp[m]
                    nrm2 += z.real * z.real + z.imag * z.imag
                inv = 1.0 / math.sqrt(nrm2)
                for n in range(d):
                    c[n] = ctmp[n] * inv
                s_env += ds_env[k]
                counts[k] += 1
                if store_events:
                    if n_events >= ev_k.shape[0]:
                        status = STATUS_EVENT_OVERFLOW
                        break
                    ev_k[n_events] = k
                    ev_t[n_events] = t_cell + (h - h_rem) + dt_jump
                n_events += 1
                h_rem -= dt_jump
                u_jump = next_double(main)
                draws += 1
                if h_rem <= 0.0:
                    s_try = 0.0
                    for n in range(d):
                        z = 0.0 + 0.0j
                        for m in range(d):
                            z += W[n, m] * c[m]
                        a[n] = z
                        s_try += z.real * z.real + z.imag * z.imag
                    break
            if status != STATUS_OK:
                break
        else:
            s_try = 0.0
            for n in range(d):
                z = 0.0 + 0.0j
                for m in range(d):
                    z += W[n, m] * c[m]
                a[n] = z
                s_try += z.real * z.real + z.imag * z.imag

        # grid-point observables from amplitudes a (norm^2 = s_try)
        fw = 0.0
        for n in range(d):
            fw += pv[n] * (a[n].real * a[n].real + a[n].imag * a[n].imag)
        fw /= s_try
        if fw < pv_min:
            fw = pv_min
        elif fw > pv_max:
            fw = pv_max
        s_mar = lnpv[n0] - math.log(fw) + s_env
        if s_mar < inf_mar:
            inf_mar = s_mar
        if track_virtual:
            if i == 0:
                n_virt = n0
            else:
                u_v = next_double(aux)
                n_virt = d - 1
                acc = 0.0
                target = u_v * s_try
                for n in range(d):
                    acc += a[n].real * a[n].real + a[n].imag * a[n].imag
                    if target < acc:
                        n_virt = n
                        break
            s_tot_v = lnpv[n0] - lnpv[n_virt] + s_env
            if s_tot_v < inf_tot:
                inf_tot = s_tot_v
        if store_grid:
            inv = 1.0 / s_try
            for n in range(d):
                grid_w[i, n] = (a[n].real * a[n].real + a[n].imag * a[n].imag) * inv
            grid_senv[i] = s_env
        if store_states:
            inv = 1.0 / math.sqrt(s_try)
            for n in range(d):
                grid_amp[i, n] = a[n] * inv
        if not stopped:
            trigger = 0
            if not math.isnan(stop_upper) and s_mar >= stop_upper:
                trigger = STOP_UPPER
            elif not math.isnan(stop_lower) and s_mar <= stop_lower:
                trigger = STOP_LOWER
            if trigger != 0:
                stopped = True
                stop_reason = trigger
                t_stop = i * h
                s_mar_t = s_mar
                if early_stop:
                    break

    if not stopped:
        t_stop = n_grid * h
        s_mar_t = s_mar

    # final projective draw in the pi-eigenbasis from the main stream
    u_f = next_double(main)
    draws += 1
    n_final = d - 1
    acc = 0.0
    target = u_f * s_try
    for n in range(d):
        acc += a[n].real * a[n].real + a[n].imag * a[n].imag
        if target < acc:
            n_final = n
            break

    out[OUT_N0] = n0
    out[OUT_S_ENV] = s_env
    out[OUT_FW] = fw
    out[OUT_N_FINAL] = n_final
    out[OUT_INF_MAR] = inf_mar
    out[OUT_INF_TOT] = inf_tot if track_virtual else np.nan
    out[OUT_T] = t_stop
    out[OUT_S_MAR_T] = s_mar_t
    out[OUT_STOP_REASON] = stop_reason
    out[OUT_N_EVENTS] = n_events
    out[OUT_STATUS] = status
    out[OUT_DRAWS] = draws
    out[OUT_S_MAR_END] = s_mar


@nb.njit(nogil=True, cache=True)
def _euler_core(A, Ls, Ms, ds_env, PiH, pv, lnpv, psi_cols,
                draw_initial, n0_in, psi_in, s_env0,
                n_grid, sample_every, dt, track_virtual,
                stop_upper, stop_lower, early_stop,
                main, aux,
                grid_w, grid_senv, grid_states, ev_k, ev_t,
                out, counts):
    d = pv.size
    K = ds_env.size
    pv_min = pv[d - 1]
    pv_max = pv[0]
    draws = 0

    if draw_initial:
        u0 = next_double(main)
        draws += 1
        n0 = _draw_initial(pv, u0)
        psi = psi_cols[:, n0].copy()
    else:
        n0 = n0_in
        psi = psi_in.copy()

    a = np.empty(d, np.complex128)
    tmp = np.empty(d, np.complex128)
    ew = np.empty(K, np.float64)

    s_env = s_env0
    n_events = 0
    status = STATUS_OK
    inf_mar = np.inf
    inf_tot = np.inf
    stop_reason = STOP_CAP
    t_final = n_grid * sample_every * dt
    t_stop = t_final
    s_mar_t = 0.0
    stopped = False
    store_grid = grid_w.shape[0] > 0
    store_states = grid_states.shape[0] > 0
    store_events = ev_k.shape[0] > 0

    fw = 0.0
    s_mar = 0.0
    wsum = 1.0
    step = 0
    for i in range(n_grid + 1):
        if i > 0:
            for _ in range(sample_every):
                q_tot = 0.0
                for k in range(K):
                    e = 0.0
                    for n in range(d):
                        z = 0.0 + 0.0j
                        for m in range(d):
                            z += Ms[k, n, m] * psi[m]
                        e += (psi[n].conjugate() * z).real
                    ew[k] = max(e, 0.0)
                    q_tot += ew[k]
                p_tot = dt * q_tot
                if p_tot > 0.5:
                    status = STATUS_STEP_TOO_COARSE
                    break
                u = next_double(main)
                draws += 1
                step += 1
                if u < p_tot:
                    k = _pick_index((u / p_tot) * q_tot, ew)
                    nrm2 = 0.0
                    for n in range(d):
                        z = 0.0 + 0.0j
                        for m in range(d):
                            z += Ls[k, n, m] * psi[m]
                        tmp[n] = z
                        nrm2 += z.real * z.real + z.imag * z.imag
                    inv = 1.0 / math.sqrt(nrm2)
                    for n in range(d):
                        psi[n] = tmp[n] * inv
                    s_env += ds_env[k]
                    counts[k] += 1
                    if store_events:
                        if n_events >= ev_k.shape[0]:
                            status = STATUS_EVENT_OVERFLOW
                            break
                        ev_k[n_events] = k
                        ev_t[n_events] = step * dt
                    n_events += 1
                else:
                    nrm2 = 0.0
                    for n in range(d):
                        z = 0.0 + 0.0j
                        for m in range(d):
                            z += A[n, m] * psi[m]
                        z = psi[n] + dt * (z + 0.5 * q_tot * psi[n])
                        tmp[n] = z
                        nrm2 += z.real * z.real + z.imag * z.imag
                    inv = 1.0 / math.sqrt(nrm2)
                    for n in range(d):
                        psi[n] = tmp[n] * inv
            if status != STATUS_OK:
                break

        # grid-point observables
        wsum = 0.0
        for n in range(d):
            z = 0.0 + 0.0j
            for m in range(d):
                z += PiH[n, m] * psi[m]
            a[n] = z
            wsum += z.real * z.real + z.imag * z.imag
        fw = 0.0
        for n in range(d):
            fw += pv[n] * (a[n].real * a[n].real + a[n].imag * a[n].imag)
        fw /= wsum
        if fw < pv_min:
            fw = pv_min
        elif fw > pv_max:
            fw = pv_max
        s_mar = lnpv[n0] - math.log(fw) + s_env
        if s_mar < inf_mar:
            inf_mar = s_mar
        if track_virtual:
            if i == 0:
                n_virt = n0
            else:
                u_v = next_double(aux)
                n_virt = d - 1
                acc = 0.0
                target = u_v * wsum
                for n in range(d):
                    acc += a[n].real * a[n].real + a[n].imag * a[n].imag
                    if target < acc:
                        n_virt = n
                        break
            s_tot_v = lnpv[n0] - lnpv[n_virt] + s_env
            if s_tot_v < inf_tot:
                inf_tot = s_tot_v
        if store_grid:
            inv = 1.0 / wsum
            for n in range(d):
                grid_w[i, n] = (a[n].real * a[n].real + a[n].imag * a[n].imag) * inv
            grid_senv[i] = s_env
        if store_states:
            for n in range(d):
                grid_states[i, n] = psi[n]
        if not stopped:
            trigger = 0
            if not math.isnan(stop_upper) and s_mar >= stop_upper:
                trigger = STOP_UPPER
            elif not math.isnan(stop_lower) and s_mar <= stop_lower:
                trigger = STOP_LOWER
            if trigger != 0:
                stopped = True
                stop_reason = trigger
                t_stop = i * sample_every * dt
                s_mar_t = s_mar
                if early_stop:
                    break

    if not stopped:
        t_stop = t_final
        s_mar_t = s_mar

    u_f = next_double(main)
    draws += 1
    n_final = d - 1
    acc = 0.0
    target = u_f * wsum
    for n in range(d):
        acc += a[n].real * a[n].real + a[n].imag * a[n].imag
        if target < acc:
            n_final = n
            break

    out[OUT_N0] = n0
    out[OUT_S_ENV] = s_env
    out[OUT_FW] = fw
    out[OUT_N_FINAL] = n_final
    out[OUT_INF_MAR] = inf_mar
    out[OUT_INF_TOT] = inf_tot if track_virtual else np.nan
    out[OUT_T] = t_stop
    out[OUT_S_MAR_T] = s_mar_t
    out[OUT_STOP_REASON] = stop_reason
    out[OUT_N_EVENTS] = n_events
    out[OUT_STATUS] = status
    out[OUT_DRAWS] = draws
    out[OUT_S_MAR_END] = s_mar


@nb.njit(nogil=True, cache=True)
def ensemble_exact(lam, W, G, MV, ds_env, pv, lnpv, cinit_cols,
                   seed, traj_start, n_traj, n_grid, h,
                   track_virtual, stop_upper, stop_lower, early_stop,
                   outs, counts):
    d = pv.size
    empty_w = np.empty((0, d), np.float64)
    empty_f = np.empty(0, np.float64)
    empty_c = np.empty((0, d), np.complex128)
    empty_i = np.empty(0, np.int64)
    cdummy = np.zeros(d, np.complex128)
    for i in range(n_traj):
        main = make_stream(seed, nb.uint64(0), traj_start + nb.uint64(i), nb.uint64(0))
        aux = make_stream(seed, nb.uint64(1), traj_start + nb.uint64(i), nb.uint64(0))
        _exact_core(lam, W, G, MV, ds_env, pv, lnpv, cinit_cols,
                    True, 0, cdummy, 0.0,
                    n_grid, h, track_virtual,
                    stop_upper, stop_lower, early_stop,
                    main, aux,
                    empty_w, empty_f, empty_c, empty_i, empty_f,
                    outs[i], counts[i])


@nb.njit(nogil=True, cache=True)
def ensemble_euler(A, Ls, Ms, ds_env, PiH, pv, lnpv, psi_cols,
                   seed, traj_start, n_traj, n_grid, sample_every, dt,
                   track_virtual, stop_upper, stop_lower, early_stop,
                   outs, counts):
    d = pv.size
    empty_w = np.empty((0, d), np.float64)
    empty_f = np.empty(0, np.float64)
    empty_c = np.empty((0, d), np.complex128)
    empty_i = np.empty(0, np.int64)
    cdummy = np.zeros(d, np.complex128)
    for i in range(n_traj):
        main = make_stream(seed, nb.uint64(0), traj_start + nb.uint64(i), nb.uint64(0))
        aux = make_stream(seed, nb.uint64(1), traj_start + nb.uint64(i), nb.uint64(0))
        _euler_core(A, Ls, Ms, ds_env, PiH, pv, lnpv, psi_cols,
                    True, 0, cdummy, 0.0,
                    n_grid, sample_every, dt, track_virtual,
                    stop_upper, stop_lower, early_stop,
                    main, aux,
                    empty_w, empty_f, empty_c, empty_i, empty_f,
                    outs[i], counts[i])


@nb.njit(nogil=True, cache=True)
def branches_exact(lam, W, G, MV, ds_env, pv, lnpv, c0, n0, s_env0,
                   seed, parent, n_branches, n_grid, h,
                   outs, counts):
    d = pv.size
    empty_w = np.empty((0, d), np.float64)
    empty_f = np.empty(0, np.float64)
    empty_c = np.empty((0, d), np.complex128)
    empty_i = np.empty(0, np.int64)
    cdummy = np.zeros((d, d), np.complex128)
    nan = np.nan
    for bidx in range(n_branches):
        main = make_stream(seed, nb.uint64(2), parent, nb.uint64(bidx))
        aux = make_stream(seed, nb.uint64(3), parent, nb.uint64(bidx))
        _exact_core(lam, W, G, MV, ds_env, pv, lnpv, cdummy,
                    False, n0, c0, s_env0,
                    n_grid, h, False,
                    nan, nan, False,
                    main, aux,
                    empty_w, empty_f, empty_c, empty_i, empty_f,
                    outs[bidx], counts[bidx])


@nb.njit(nogil=True, cache=True)
def branches_euler(A, Ls, Ms, ds_env, PiH, pv, lnpv, psi0, n0, s_env0,
                   seed, parent, n_branches, n_grid, sample_every, dt,
                   outs, counts):
    d = pv.size
    empty_w = np.empty((0, d), np.float64)
    empty_f = np.empty(0, np.float64)
    empty_c = np.empty((0, d), np.complex128)
    empty_i = np.empty(0, np.int64)
    cdummy = np.zeros((d, d), np.complex128)
    nan = np.nan
    for bidx in range(n_branches):
        main = make_stream(seed, nb.uint64(2), parent, nb.uint64(bidx))
        aux = make_stream(seed, nb.uint64(3), parent, nb.uint64(bidx))
        _euler_core(A, Ls, Ms, ds_env, PiH, pv, lnpv, cdummy,
                    False, n0, psi0, s_env0,
                    n_grid, sample_every, dt, False,
                    nan, nan, False,
                    main, aux,
                    empty_w, empty_f, empty_c, empty_i, empty_f,
                    outs[bidx], counts[bidx])


@nb.njit(nogil=True, cache=True)
def record_exact(lam, W, G, MV, ds_env, pv, lnpv, cinit_cols,
                 draw_initial, n0_in, c_in, s_env0,
                 seed, purpose, a_id, b_id, aux_purpose,
                 n_grid, h, track_virtual,
                 grid_w, grid_senv, grid_amp, ev_k, ev_t,
                 out, counts):
    main = make_stream(seed, purpose, a_id, b_id)
    aux = make_stream(seed, aux_purpose, a_id, b_id)
    nan = np.nan
    _exact_core(lam, W, G, MV, ds_env, pv, lnpv, cinit_cols,
                draw_initial, n0_in, c_in, s_env0,
                n_grid, h, track_virtual,
                nan, nan, False,
                main, aux,
                grid_w, grid_senv, grid_amp, ev_k, ev_t,
                out, counts)


@nb.njit(nogil=True, cache=True)
def record_euler(A, Ls, Ms, ds_env, PiH, pv, lnpv, psi_cols,
                 draw_initial, n0_in, psi_in, s_env0,
                 seed, purpose, a_id, b_id, aux_purpose,
                 n_grid, sample_every, dt, track_virtual,
                 grid_w, grid_senv, grid_states, ev_k, ev_t,
                 out, counts):
    main = make_stream(seed, purpose, a_id, b_id)
    aux = make_stream(seed, aux_purpose, a_id, b_id)
    nan = np.nan
    _euler_core(A, Ls, Ms, ds_env, PiH, pv, lnpv, psi_cols,
                draw_initial, n0_in, psi_in, s_env0,
                n_grid, sample_every, dt, track_virtual,
                nan, nan, False,
                main, aux,
                grid_w, grid_senv, grid_states, ev_k, ev_t,
                out, counts)
