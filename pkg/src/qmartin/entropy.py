"""Entropy-production functionals along recorded trajectories.

Three cumulative quantities are attached to a trajectory with boundary
outcomes n(0), n(t):

    dS_tot(t) = ln(pi_n(0) / pi_n(t)) + sum_j ds_env(k_j)
    dS_unc(t) = -ln(pi_n(t) / <pi>_psi(t))
    dS_mar(t) = ln(pi_n(0) / <pi>_psi(t)) + sum_j ds_env(k_j)

with <pi>_psi = sum_n pi_n |<pi_n|psi>|^2, the squared fidelity between
the stochastic wavefunction and the stationary state.  By construction
dS_tot = dS_unc + dS_mar, and dS_mar is the only one of the three that
is defined along the whole trajectory without disturbing it (no
measurement at time t enters it).

dS_tot is only defined where a measurement outcome exists.  The
"virtual" trace used for its running infimum draws an outcome n(t_i)
per grid point from the Born weights through an auxiliary stream that
never touches the trajectory itself; conditioning on such virtual
measurements is equivalent to conditioning on the unmeasured record,
which is what makes the construction consistent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SteadyState
from .rng import StreamKey
from .trajectory import PureState, TrajectoryRecord


@dataclass(frozen=True, eq=False)
class EntropySeries:
    """Cumulative entropy traces on a record's sampling grid."""

    grid: np.ndarray
    s_env: np.ndarray
    s_mar: np.ndarray
    s_unc_candidates: np.ndarray      # [i, n] = -ln(pi_n / <pi>_psi(t_i))
    running_inf_mar: np.ndarray
    s_tot_virtual: np.ndarray | None
    running_inf_tot: np.ndarray | None
    n0: int

    @property
    def inf_mar(self) -> float:
        return float(self.running_inf_mar[-1])

    @property
    def inf_tot(self) -> float:
        if self.running_inf_tot is None:
            raise ValueError("series was built without the virtual trace")
        return float(self.running_inf_tot[-1])


def _clamped_fw(weights: np.ndarray, steady: SteadyState) -> np.ndarray:
    fw = (weights @ steady.eigenvalues) / weights.sum(axis=-1)
    return np.clip(fw, steady.pi_min, steady.pi_max)


def fidelity_weight(state: PureState, steady: SteadyState) -> float:
    """<pi>_psi = sum_n pi_n |<pi_n|psi>|^2, clamped into [pi_min, pi_max]."""
    w = steady.overlaps(np.asarray(state, dtype=complex))
    return float(_clamped_fw(w[None, :], steady)[0])


def delta_s_unc(n: int, state: PureState, steady: SteadyState) -> float:
    """-ln(pi_n / <pi>_psi); zero whenever psi is the n-th eigenstate."""
    if not 0 <= n < steady.dim:
        raise IndexError(f"outcome index {n} out of range")
    return float(np.log(fidelity_weight(state, steady)) - np.log(steady.eigenvalues[n]))


def delta_s_tot(record: TrajectoryRecord, steady: SteadyState) -> float:
    """Boundary term plus environmental flux; needs the final outcome."""
    if record.n_final is None:
        raise ValueError("record has no final measurement; call measure_final first")
    lnpv = np.log(steady.eigenvalues)
    return float(lnpv[record.n0] - lnpv[record.n_final] + record.env_entropy_cum[-1])


def delta_s_mar_final(record: TrajectoryRecord, steady: SteadyState) -> float:
    """dS_mar at the record's end, from the premeasurement snapshot."""
    fw = _clamped_fw(record.born_weights[-1][None, :], steady)[0]
    lnpv = np.log(steady.eigenvalues)
    return float(lnpv[record.n0] - np.log(fw) + record.env_entropy_cum[-1])


def _virtual_outcomes(record: TrajectoryRecord, rng: np.random.Generator) -> np.ndarray:
    """Born draw per grid point > 0; the t=0 state is the n0 eigenstate."""
    w = record.born_weights
    n_pts = w.shape[0]
    out = np.empty(n_pts, dtype=np.int64)
    out[0] = record.n0
    cum = np.cumsum(w[1:], axis=1)
    us = rng.random(n_pts - 1) * cum[:, -1]
    for i in range(n_pts - 1):
        out[i + 1] = min(int(np.searchsorted(cum[i], us[i], side="right")),
                         w.shape[1] - 1)
    return out


def _aux_stream(key: StreamKey) -> np.random.Generator:
    # mirrors the kernels: TRAJ->VIRTUAL, BRANCH->BRANCH_VIRTUAL
    return StreamKey(key.seed, key.purpose + 1, key.a, key.b).generator()


def entropy_series(record: TrajectoryRecord, steady: SteadyState, *,
                   virtual: bool = True,
                   rng: np.random.Generator | None = None) -> EntropySeries:
    """All entropy traces of one record.

    With ``virtual=True`` a dS_tot trace is produced from independent
    Born draws at every grid point (auxiliary stream derived from the
    record's own stream unless an explicit generator is given).
    """
    lnpv = np.log(steady.eigenvalues)
    fw = _clamped_fw(record.born_weights, steady)
    s_mar = lnpv[record.n0] - np.log(fw) + record.env_entropy_cum
    s_unc = np.log(fw)[:, None] - lnpv[None, :]
    s_tot_v = None
    inf_tot = None
    if virtual:
        gen = rng if rng is not None else _aux_stream(record.stream)
        n_virt = _virtual_outcomes(record, gen)
        s_tot_v = lnpv[record.n0] - lnpv[n_virt] + record.env_entropy_cum
        inf_tot = np.minimum.accumulate(s_tot_v)
    return EntropySeries(
        grid=record.grid.copy(),
        s_env=record.env_entropy_cum.copy(),
        s_mar=s_mar,
        s_unc_candidates=s_unc,
        running_inf_mar=np.minimum.accumulate(s_mar),
        s_tot_virtual=s_tot_v,
        running_inf_tot=inf_tot,
        n0=record.n0,
    )


def write_series_csv(series: EntropySeries, path) -> None:
    """Per-trajectory CSV: time, s_env, s_mar, s_unc_virtual, s_tot_virtual,
    inf_mar, inf_tot."""
    has_virtual = series.s_tot_virtual is not None
    with open(path, "w", newline="") as fh:
        fh.write("time,s_env,s_mar,s_unc_virtual,s_tot_virtual,inf_mar,inf_tot\n")
        for i in range(series.grid.size):
            if has_virtual:
                s_tot = series.s_tot_virtual[i]
                s_unc_v = s_tot - series.s_mar[i]
                inf_tot = series.running_inf_tot[i]
                tail = f"{s_unc_v:.17g},{s_tot:.17g},{series.running_inf_mar[i]:.17g},{inf_tot:.17g}"
            else:
                tail = f"nan,nan,{series.running_inf_mar[i]:.17g},nan"
            fh.write(f"{series.grid[i]:.17g},{series.s_env[i]:.17g},"
                     f"{series.s_mar[i]:.17g},{tail}\n")
