"""Ensemble estimators: fluctuation theorems, martingale branch tests,
stopping times, and infima statistics.

Exponential averages <e^{-dS}> are heavy-tailed (a single trajectory
deep in the negative tail can dominate the sample mean), so every such
estimate carries a percentile-bootstrap confidence interval instead of
a plain standard error.  All estimators aggregate per-trajectory values
in trajectory-index order, which makes the results independent of the
processing schedule and bitwise reproducible for a given seed.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels as kern
from .errors import InsufficientHorizonError
from .model import QuantumModel, SteadyState
from .rng import PURPOSE_BOOTSTRAP, PURPOSE_VIRTUAL, StreamKey
from .trajectory import _bundle, _n_steps, checkpoint_at, simulate
from .entropy import EntropySeries

DEFAULT_XI_GRID = np.round(np.arange(0.0, 3.0 + 1e-9, 0.2), 10)
N_BOOT = 1000


def _threads(threads: int | None) -> int:
    env = os.environ.get("QMARTIN_THREADS")
    if env:
        return max(1, int(env))
    if threads is not None:
        return max(1, int(threads))
    return 1


# ---------------------------------------------------------------------------
# stopping rules

@dataclass(frozen=True)
class StoppingRule:
    """Fixed-time or first-passage stopping on the s_mar trace."""

    kind: str                      # fixed_time | first_passage_upper | first_passage_two_sided
    cap: float
    upper: float | None = None
    lower: float | None = None

    def __post_init__(self):
        if self.kind not in ("fixed_time", "first_passage_upper",
                             "first_passage_two_sided"):
            raise ValueError(f"unknown stopping kind {self.kind!r}")
        if self.cap <= 0:
            raise ValueError("cap must be positive")
        if self.kind == "first_passage_upper":
            if self.upper is None or self.upper <= 0:
                raise ValueError("first_passage_upper needs upper > 0")
        if self.kind == "first_passage_two_sided":
            if self.upper is None or self.lower is None:
                raise ValueError("two-sided rule needs both thresholds")
            if not self.lower < 0 < self.upper:
                raise ValueError("thresholds must satisfy lower < 0 < upper")

    def kernel_thresholds(self) -> tuple[float, float]:
        up = self.upper if self.kind != "fixed_time" else math.nan
        lo = self.lower if self.kind == "first_passage_two_sided" else math.nan
        return (math.nan if up is None else up, math.nan if lo is None else lo)


@dataclass(frozen=True)
class StoppingOutcome:
    time: float
    s_mar: float
    stopped_by: str     # "upper" | "lower" | "cap"
    index: int


_REASONS = {kern.STOP_CAP: "cap", kern.STOP_UPPER: "upper", kern.STOP_LOWER: "lower"}


def stopping_times(series: EntropySeries, rule: StoppingRule) -> StoppingOutcome:
    """First grid time at which the rule fires, else the cap.

    The decision at grid point i uses only s_mar[0..i]; since s_mar
    jumps discontinuously at events, the stopped value may overshoot
    the threshold, and that actual value is what the estimators use.
    """
    grid = series.grid
    if grid[-1] < rule.cap - 1e-9 * max(1.0, rule.cap):
        raise InsufficientHorizonError(
            f"series ends at {grid[-1]}, rule cap is {rule.cap}")
    i_cap = int(np.searchsorted(grid, rule.cap * (1 + 1e-12) + 1e-15, side="right")) - 1
    s = series.s_mar
    if rule.kind != "fixed_time":
        for i in range(i_cap + 1):
            if rule.upper is not None and s[i] >= rule.upper:
                return StoppingOutcome(float(grid[i]), float(s[i]), "upper", i)
            if rule.kind == "first_passage_two_sided" and s[i] <= rule.lower:
                return StoppingOutcome(float(grid[i]), float(s[i]), "lower", i)
    return StoppingOutcome(float(grid[i_cap]), float(s[i_cap]), "cap", i_cap)


# ---------------------------------------------------------------------------
# bootstrap machinery

@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float
    ci_lo: float
    ci_hi: float


def bootstrap_estimate(values: np.ndarray, gen: np.random.Generator,
                       n_boot: int = N_BOOT) -> Estimate:
    """Percentile bootstrap of the sample mean (95% CI, SE = resample std)."""
    v = np.asarray(values, dtype=float)
    n = v.size
    means = np.empty(n_boot)
    done = 0
    chunk = max(1, min(64, int(2e7 // max(n, 1)) or 1))
    while done < n_boot:
        m = min(chunk, n_boot - done)
        idx = gen.integers(0, n, size=(m, n))
        means[done:done + m] = v[idx].mean(axis=1)
        done += m
    lo, hi = np.percentile(means, [2.5, 97.5])
    se = float(means.std())
    if se == 0.0:
        # degenerate sample; keep CI widths positive at ULP scale
        se = float(np.spacing(max(abs(v.mean()), 1e-300)))
        lo, hi = v.mean() - se, v.mean() + se
    return Estimate(mean=float(v.mean()), se=se, ci_lo=float(lo), ci_hi=float(hi))


# ---------------------------------------------------------------------------
# raw ensemble dispatch

def _raw_ensemble(model, steady, *, t_final, dt, n_traj, seed, sample_every=1,
                  integrator="exact", track_virtual=False, stop_upper=math.nan,
                  stop_lower=math.nan, early_stop=False, threads=None,
                  traj_offset=0):
    """Per-trajectory kernel outputs (n_traj x NOUT) plus jump counts."""
    bun = _bundle(model, steady, integrator)
    n_steps, n_grid = _n_steps(t_final, dt, sample_every)
    outs = np.empty((n_traj, kern.NOUT))
    counts = np.zeros((n_traj, max(model.n_channels, 1)), dtype=np.int64)
    nthr = _threads(threads)
    spans = [(i * n_traj // nthr, (i + 1) * n_traj // nthr) for i in range(nthr)]
    spans = [s for s in spans if s[1] > s[0]]

    def run(span):
        i0, i1 = span
        if integrator == "euler":
            kern.ensemble_euler(bun["A"], bun["Ls"], bun["Ms"], bun["ds"], bun["PiH"],
                                bun["pv"], bun["lnpv"], bun["psi_cols"],
                                np.uint64(seed), np.uint64(traj_offset + i0), i1 - i0,
                                n_grid, sample_every, dt,
                                track_virtual, stop_upper, stop_lower, early_stop,
                                outs[i0:i1], counts[i0:i1])
        else:
            kern.ensemble_exact(bun["lam"], bun["W"], bun["G"], bun["MV"], bun["ds"],
                                bun["pv"], bun["lnpv"], bun["cinit_cols"],
                                np.uint64(seed), np.uint64(traj_offset + i0), i1 - i0,
                                n_grid, sample_every * dt,
                                track_virtual, stop_upper, stop_lower, early_stop,
                                outs[i0:i1], counts[i0:i1])

    if len(spans) == 1:
        run(spans[0])
    else:
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            list(pool.map(run, spans))
    bad = outs[:, kern.OUT_STATUS] != kern.STATUS_OK
    if np.any(bad):
        status = int(outs[bad, kern.OUT_STATUS][0])
        raise RuntimeError(f"{bad.sum()} trajectories failed with status {status}")
    return outs, counts


def _entropies_from_outs(outs, steady):
    lnpv = np.log(steady.eigenvalues)
    n0 = outs[:, kern.OUT_N0].astype(np.int64)
    nf = outs[:, kern.OUT_N_FINAL].astype(np.int64)
    s_env = outs[:, kern.OUT_S_ENV]
    fw = outs[:, kern.OUT_FW]
    s_tot = lnpv[n0] - lnpv[nf] + s_env
    s_mar = lnpv[n0] - np.log(fw) + s_env
    s_unc = np.log(fw) - lnpv[nf]
    return s_tot, s_mar, s_unc


# ---------------------------------------------------------------------------
# ensemble summary

@dataclass(frozen=True, eq=False)
class InfimaCdf:
    """Empirical P(inf <= -xi) with binomial standard errors."""

    xi_grid: np.ndarray
    cdf_mar: np.ndarray
    cdf_tot: np.ndarray
    se_mar: np.ndarray
    se_tot: np.ndarray
    n_traj: int

    def __post_init__(self):
        for c in (self.cdf_mar, self.cdf_tot):
            if np.any(c < 0) or np.any(c > 1) or np.any(np.diff(c) > 0):
                raise ValueError("cdf values must lie in [0,1] and be nonincreasing")

    def mar_bound_ok(self, n_se: float = 3.0) -> np.ndarray:
        return self.cdf_mar <= np.exp(-self.xi_grid) + n_se * self.se_mar


def _infima_cdf(inf_mar, inf_tot, xi_grid) -> InfimaCdf:
    n = inf_mar.size
    cdf_m = np.array([(inf_mar <= -xi).mean() for xi in xi_grid])
    cdf_t = np.array([(inf_tot <= -xi).mean() for xi in xi_grid])
    se = lambda p: np.sqrt(p * (1 - p) / n)
    return InfimaCdf(xi_grid=np.asarray(xi_grid, dtype=float),
                     cdf_mar=cdf_m, cdf_tot=cdf_t,
                     se_mar=se(cdf_m), se_tot=se(cdf_t), n_traj=n)


@dataclass(frozen=True, eq=False)
class EnsembleSummary:
    n_traj: int
    t_final: float
    dt: float
    sample_every: int
    integrator: str
    seed: int
    exp_neg_tot: Estimate
    exp_neg_mar: Estimate
    exp_neg_unc: Estimate
    mean_s_tot: Estimate
    mean_s_mar: Estimate
    mean_s_unc: Estimate
    exp_neg_mar_samples: np.ndarray
    running_mean_exp_neg_mar: np.ndarray
    infima: InfimaCdf
    mean_inf_mar: Estimate
    mean_inf_tot: Estimate
    mean_jumps: float


def run_ensemble(model: QuantumModel, steady: SteadyState, t_final: float,
                 dt: float, n_traj: int, seed: int, *, sample_every: int = 1,
                 integrator: str = "exact", xi_grid=None,
                 threads: int | None = None) -> EnsembleSummary:
    """Simulate n_traj measured trajectories and aggregate all estimators."""
    if xi_grid is None:
        xi_grid = DEFAULT_XI_GRID
    outs, counts = _raw_ensemble(
        model, steady, t_final=t_final, dt=dt, n_traj=n_traj, seed=seed,
        sample_every=sample_every, integrator=integrator, track_virtual=True,
        threads=threads)
    s_tot, s_mar, s_unc = _entropies_from_outs(outs, steady)
    inf_mar = outs[:, kern.OUT_INF_MAR]
    inf_tot = outs[:, kern.OUT_INF_TOT]
    exp_mar = np.exp(-s_mar)
    boot = StreamKey(seed, PURPOSE_BOOTSTRAP).generator()
    est = lambda v: bootstrap_estimate(v, boot)
    return EnsembleSummary(
        n_traj=n_traj, t_final=t_final, dt=dt, sample_every=sample_every,
        integrator=integrator, seed=seed,
        exp_neg_tot=est(np.exp(-s_tot)),
        exp_neg_mar=est(exp_mar),
        exp_neg_unc=est(np.exp(-s_unc)),
        mean_s_tot=est(s_tot),
        mean_s_mar=est(s_mar),
        mean_s_unc=est(s_unc),
        exp_neg_mar_samples=exp_mar,
        running_mean_exp_neg_mar=np.cumsum(exp_mar) / np.arange(1, n_traj + 1),
        infima=_infima_cdf(inf_mar, inf_tot, xi_grid),
        mean_inf_mar=est(inf_mar),
        mean_inf_tot=est(inf_tot),
        mean_jumps=float(counts.sum(axis=1).mean()),
    )


# ---------------------------------------------------------------------------
# martingale branch test

@dataclass(frozen=True, eq=False)
class BranchReport:
    """Per-parent conditional averages at time t given the history to tau."""

    tau: float
    t: float
    n_parents: int
    n_branches: int
    target_mar: np.ndarray        # e^{-s_mar(tau)} per parent
    target_tot: np.ndarray        # e^{-s_tot(tau) + s_unc(tau)} per parent
    naive_tot: np.ndarray         # e^{-s_tot(tau)} per parent (not the target)
    s_unc_tau: np.ndarray
    mean_mar: np.ndarray
    se_mar: np.ndarray
    mean_tot: np.ndarray
    se_tot: np.ndarray
    mean_unc: np.ndarray
    se_unc: np.ndarray

    @property
    def z_mar(self) -> np.ndarray:
        return (self.mean_mar - self.target_mar) / self.se_mar

    @property
    def z_tot(self) -> np.ndarray:
        return (self.mean_tot - self.target_tot) / self.se_tot

    @property
    def z_unc(self) -> np.ndarray:
        return (self.mean_unc - 1.0) / self.se_unc


def martingale_branch_test(model: QuantumModel, steady: SteadyState, tau: float,
                           t: float, n_parents: int, n_branches: int, seed: int, *,
                           dt: float = 0.01, sample_every: int = 10,
                           integrator: str = "exact",
                           n_boot: int = 250) -> BranchReport:
    """Branch each parent at tau and compare conditional averages at t.

    Checks, per parent: <e^{-dS_mar(t)}> = e^{-dS_mar(tau)} (martingale
    property), <e^{-dS_tot(t)}> = e^{-dS_tot(tau)+dS_unc(tau)} with a
    fresh Born outcome n(t) per branch (so e^{-dS_tot} is *not* a
    martingale whenever dS_unc(tau) != 0), and <e^{-dS_unc(t)}> = 1.
    dS_tot(tau) uses a virtual outcome n(tau) drawn per parent without
    disturbing the branches.
    """
    if not 0 <= tau < t:
        raise ValueError("need 0 <= tau < t")
    bun = _bundle(model, steady, integrator)
    lnpv = np.log(steady.eigenvalues)
    horizon = t - tau
    n_steps, n_grid = _n_steps(horizon, dt, sample_every)
    h = sample_every * dt

    shape = (n_parents,)
    tgt_mar = np.empty(shape)
    tgt_tot = np.empty(shape)
    naive_tot = np.empty(shape)
    s_unc_tau_arr = np.empty(shape)
    mean_mar = np.empty(shape)
    se_mar = np.empty(shape)
    mean_tot = np.empty(shape)
    se_tot = np.empty(shape)
    mean_unc = np.empty(shape)
    se_unc = np.empty(shape)

    boot = StreamKey(seed, PURPOSE_BOOTSTRAP, 1).generator()
    outs = np.empty((n_branches, kern.NOUT))
    cnts = np.zeros((n_branches, max(model.n_channels, 1)), dtype=np.int64)
    for p in range(n_parents):
        if tau > 0:
            parent = simulate(model, steady, tau, dt, StreamKey(seed, 0, p),
                              sample_every=sample_every, integrator=integrator)
            cp = checkpoint_at(parent, tau)
        else:
            parent = simulate(model, steady, h, dt, StreamKey(seed, 0, p),
                              sample_every=sample_every, integrator=integrator)
            cp = checkpoint_at(parent, 0.0)
        w_tau = steady.overlaps(cp.state)
        fw_tau = float(np.clip(w_tau @ steady.eigenvalues / w_tau.sum(),
                               steady.pi_min, steady.pi_max))
        s_mar_tau = lnpv[cp.n0] - np.log(fw_tau) + cp.env_entropy_cum
        # virtual outcome at tau from the parent's auxiliary stream
        gen_aux = StreamKey(seed, PURPOSE_VIRTUAL, p).generator()
        u = gen_aux.random()
        n_tau = min(int(np.searchsorted(np.cumsum(w_tau), u * w_tau.sum(),
                                        side="right")), steady.dim - 1)
        s_tot_tau = lnpv[cp.n0] - lnpv[n_tau] + cp.env_entropy_cum
        s_unc_tau = np.log(fw_tau) - lnpv[n_tau]
        tgt_mar[p] = math.exp(-s_mar_tau)
        tgt_tot[p] = math.exp(-s_tot_tau + s_unc_tau)
        naive_tot[p] = math.exp(-s_tot_tau)
        s_unc_tau_arr[p] = s_unc_tau

        if integrator == "euler":
            kern.branches_euler(bun["A"], bun["Ls"], bun["Ms"], bun["ds"], bun["PiH"],
                                bun["pv"], bun["lnpv"],
                                np.ascontiguousarray(cp.state, dtype=complex),
                                cp.n0, cp.env_entropy_cum,
                                np.uint64(seed), np.uint64(p), n_branches,
                                n_grid, sample_every, dt, outs, cnts)
        else:
            c0 = np.ascontiguousarray(bun["Vinv"] @ cp.state)
            kern.branches_exact(bun["lam"], bun["W"], bun["G"], bun["MV"], bun["ds"],
                                bun["pv"], bun["lnpv"], c0, cp.n0, cp.env_entropy_cum,
                                np.uint64(seed), np.uint64(p), n_branches,
                                n_grid, h, outs, cnts)
        s_tot_b, s_mar_b, s_unc_b = _entropies_from_outs(outs, steady)
        for arr_mean, arr_se, vals in ((mean_mar, se_mar, np.exp(-s_mar_b)),
                                       (mean_tot, se_tot, np.exp(-s_tot_b)),
                                       (mean_unc, se_unc, np.exp(-s_unc_b))):
            e = bootstrap_estimate(vals, boot, n_boot=n_boot)
            arr_mean[p] = e.mean
            arr_se[p] = e.se

    return BranchReport(tau=tau, t=t, n_parents=n_parents, n_branches=n_branches,
                        target_mar=tgt_mar, target_tot=tgt_tot, naive_tot=naive_tot,
                        s_unc_tau=s_unc_tau_arr,
                        mean_mar=mean_mar, se_mar=se_mar,
                        mean_tot=mean_tot, se_tot=se_tot,
                        mean_unc=mean_unc, se_unc=se_unc)


# ---------------------------------------------------------------------------
# stopping-time fluctuation theorem

@dataclass(frozen=True, eq=False)
class StoppingReport:
    rule: StoppingRule
    n_traj: int
    samples: np.ndarray                   # e^{-s_mar(T)} per trajectory
    running_mean: np.ndarray              # of e^{-s_mar(T)}
    exp_neg_mar_T: Estimate
    mean_s_mar_T: Estimate
    mean_s_tot_T: Estimate                # with a virtual outcome n(T)
    mean_s_unc_T: Estimate
    mean_T: float
    stop_fractions: dict
    t_samples: np.ndarray


def stopping_ft(model: QuantumModel, steady: SteadyState, rule: StoppingRule,
                t_f: float, dt: float, n_traj: int, seed: int, *,
                sample_every: int = 1, integrator: str = "exact",
                threads: int | None = None) -> StoppingReport:
    """<e^{-dS_mar(T)}> with T = min(first passage, t_f), plus the
    stopped second-law quantities."""
    if abs(rule.cap - t_f) > 1e-9 * max(1.0, t_f):
        raise ValueError("rule.cap must equal t_f")
    up, lo = rule.kernel_thresholds()
    early = rule.kind != "fixed_time"
    outs, _ = _raw_ensemble(
        model, steady, t_final=t_f, dt=dt, n_traj=n_traj, seed=seed,
        sample_every=sample_every, integrator=integrator, track_virtual=False,
        stop_upper=up, stop_lower=lo, early_stop=early, threads=threads)
    lnpv = np.log(steady.eigenvalues)
    s_mar_T = outs[:, kern.OUT_S_MAR_T]
    # at T the kernel state is the stopped state; its Born draw is n(T)
    n0 = outs[:, kern.OUT_N0].astype(np.int64)
    nT = outs[:, kern.OUT_N_FINAL].astype(np.int64)
    s_env_T = outs[:, kern.OUT_S_ENV]
    s_tot_T = lnpv[n0] - lnpv[nT] + s_env_T
    s_unc_T = s_tot_T - s_mar_T
    reasons = outs[:, kern.OUT_STOP_REASON].astype(int)
    v = np.exp(-s_mar_T)
    boot = StreamKey(seed, PURPOSE_BOOTSTRAP).generator()
    frac = {name: float((reasons == code).mean())
            for code, name in _REASONS.items()}
    return StoppingReport(
        rule=rule, n_traj=n_traj, samples=v,
        running_mean=np.cumsum(v) / np.arange(1, n_traj + 1),
        exp_neg_mar_T=bootstrap_estimate(v, boot),
        mean_s_mar_T=bootstrap_estimate(s_mar_T, boot),
        mean_s_tot_T=bootstrap_estimate(s_tot_T, boot),
        mean_s_unc_T=bootstrap_estimate(s_unc_T, boot),
        mean_T=float(outs[:, kern.OUT_T].mean()),
        stop_fractions=frac,
        t_samples=outs[:, kern.OUT_T].copy(),
    )


# ---------------------------------------------------------------------------
# infima statistics

@dataclass(frozen=True, eq=False)
class InfimaResult:
    t_final: float
    n_traj: int
    cdf: InfimaCdf
    mean_inf_mar: Estimate
    mean_inf_tot: Estimate
    log_ratio: float                     # ln(pi_max / pi_min)
    mar_bound_ok: np.ndarray             # cdf_mar <= e^{-xi} + 3 se, per xi
    mean_mar_bound_ok: bool              # <inf s_mar> >= -1 - 3 se
    mean_tot_bound_ok: bool              # <inf s_tot> >= -1 - ln ratio - 3 se


def infima_stats(model: QuantumModel, steady: SteadyState, t: float, dt: float,
                 n_traj: int, xi_grid, seed: int, *, sample_every: int = 1,
                 integrator: str = "exact",
                 threads: int | None = None) -> InfimaResult:
    """Empirical CDFs of the finite-time minima of s_mar and the virtual
    s_tot trace, with their universal bounds evaluated at 3 SE."""
    if xi_grid is None:
        xi_grid = DEFAULT_XI_GRID
    outs, _ = _raw_ensemble(
        model, steady, t_final=t, dt=dt, n_traj=n_traj, seed=seed,
        sample_every=sample_every, integrator=integrator, track_virtual=True,
        threads=threads)
    inf_mar = outs[:, kern.OUT_INF_MAR]
    inf_tot = outs[:, kern.OUT_INF_TOT]
    cdf = _infima_cdf(inf_mar, inf_tot, xi_grid)
    boot = StreamKey(seed, PURPOSE_BOOTSTRAP).generator()
    est_mar = bootstrap_estimate(inf_mar, boot)
    est_tot = bootstrap_estimate(inf_tot, boot)
    log_ratio = float(np.log(steady.pi_max / steady.pi_min))
    return InfimaResult(
        t_final=t, n_traj=n_traj, cdf=cdf,
        mean_inf_mar=est_mar, mean_inf_tot=est_tot, log_ratio=log_ratio,
        mar_bound_ok=cdf.mar_bound_ok(3.0),
        mean_mar_bound_ok=bool(est_mar.mean >= -1.0 - 3.0 * est_mar.se),
        mean_tot_bound_ok=bool(est_tot.mean >= -1.0 - log_ratio - 3.0 * est_tot.se),
    )


# ---------------------------------------------------------------------------
# CSV writers (see the CLI for the file-level contract)

def running_mean_checkpoints(n_traj: int, per_decade: int = 25) -> np.ndarray:
    """Log-spaced sample sizes at which running-mean CIs are reported."""
    if n_traj < 1:
        return np.array([], dtype=np.int64)
    ns = np.unique(np.round(
        10 ** np.arange(0, math.log10(n_traj) + 1e-12, 1.0 / per_decade)
    ).astype(np.int64))
    ns = ns[ns <= n_traj]
    if ns.size == 0 or ns[-1] != n_traj:
        ns = np.append(ns, n_traj)
    return ns


def write_running_mean_csv(path, values: np.ndarray, seed: int,
                           n_boot: int = N_BOOT) -> None:
    """running_mean.csv: n, mean, ci_lo, ci_hi at log-spaced n."""
    boot = StreamKey(seed, PURPOSE_BOOTSTRAP, 2).generator()
    cum = np.cumsum(values)
    with open(path, "w", newline="") as fh:
        fh.write("n,mean,ci_lo,ci_hi\n")
        for n in running_mean_checkpoints(values.size):
            est = bootstrap_estimate(values[:n], boot, n_boot=n_boot)
            fh.write(f"{n},{cum[n - 1] / n:.17g},{est.ci_lo:.17g},{est.ci_hi:.17g}\n")


def write_infima_csv(path, results) -> None:
    """infima_cdf.csv: xi, cdf_mar, cdf_tot, se_mar, se_tot, bound=exp(-xi).

    ``results`` maps an observation-time label (typically Gamma*t) to an
    InfimaCdf; multiple labels share the file through the leading
    gamma_t column.
    """
    with open(path, "w", newline="") as fh:
        fh.write("gamma_t,xi,cdf_mar,cdf_tot,se_mar,se_tot,bound\n")
        for label, c in results.items():
            for j, xi in enumerate(c.xi_grid):
                fh.write(f"{label:.17g},{xi:.17g},{c.cdf_mar[j]:.17g},"
                         f"{c.cdf_tot[j]:.17g},{c.se_mar[j]:.17g},"
                         f"{c.se_tot[j]:.17g},{math.exp(-xi):.17g}\n")
