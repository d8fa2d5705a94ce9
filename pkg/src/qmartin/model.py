"""Open-system model definition and its stationary state.

A model is a Hamiltonian H plus a set of jump channels (L_k, ds_k),
where L_k is the Lindblad operator applied to the wavefunction when a
type-k event is detected in the environment and ds_k is the entropy
dumped into the environment by that event (k_B = 1, hbar = 1).  Channels
may be declared in detailed-balance pairs (k, k'),

    L_k = L_k'^dagger * exp(ds_k / 2),      ds_k = -ds_k',

which is the condition that makes the time-reversed jump record
well-defined (see the oracle module).

Averaged over measurement records the dynamics is the Lindblad master
equation; its unique fixed point pi, spectrally decomposed as
pi = sum_n pi_n |pi_n><pi_n|, supplies both the initial-state ensemble
and the measurement basis of the two-point protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ModelValidationError,
    NonUniqueSteadyStateError,
    RankDeficientSteadyStateError,
    RateResolutionError,
)

HERMITICITY_ATOL = 1e-12
PAIRING_ATOL = 1e-10
NULL_GAP_MIN = 1e-8          # second-smallest |eigenvalue| must exceed this
RESIDUAL_MAX = 1e-10         # |L vec(pi)| per entry
PI_MIN_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class JumpChannel:
    """One monitored decay channel: operator L_k and entropy flux ds_k."""

    operator: np.ndarray
    env_entropy: float

    def __post_init__(self):
        op = np.asarray(self.operator, dtype=complex)
        object.__setattr__(self, "operator", op)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise ModelValidationError(f"channel operator must be square, got {op.shape}")
        if not np.all(np.isfinite(op.view(float))):
            raise ModelValidationError("channel operator has non-finite entries")
        if not math.isfinite(self.env_entropy):
            raise ModelValidationError("channel env_entropy must be finite")


@dataclass(frozen=True, eq=False)
class QuantumModel:
    """Hamiltonian, jump channels and optional detailed-balance pairing."""

    dim: int
    hamiltonian: np.ndarray
    channels: tuple[JumpChannel, ...]
    pairing: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        d = self.dim
        if d < 1:
            raise ModelValidationError("dim must be a positive integer")
        ham = np.asarray(self.hamiltonian, dtype=complex)
        object.__setattr__(self, "hamiltonian", ham)
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "pairing", tuple(tuple(p) for p in self.pairing))
        if ham.shape != (d, d):
            raise ModelValidationError(f"hamiltonian shape {ham.shape} != ({d}, {d})")
        if np.max(np.abs(ham - ham.conj().T)) > HERMITICITY_ATOL:
            raise ModelValidationError("hamiltonian is not Hermitian within 1e-12")
        for i, ch in enumerate(self.channels):
            if ch.operator.shape != (d, d):
                raise ModelValidationError(
                    f"channel {i} operator shape {ch.operator.shape} != ({d}, {d})")
        k_count = len(self.channels)
        for k, kp in self.pairing:
            if not (0 <= k < k_count and 0 <= kp < k_count):
                raise ModelValidationError(f"pairing ({k}, {kp}) out of range")
            ds = self.channels[k].env_entropy
            if abs(ds + self.channels[kp].env_entropy) > PAIRING_ATOL:
                raise ModelValidationError(
                    f"pair ({k}, {kp}): env entropies are not opposite")
            lhs = self.channels[k].operator
            rhs = self.channels[kp].operator.conj().T * math.exp(ds / 2.0)
            if np.max(np.abs(lhs - rhs)) > PAIRING_ATOL:
                raise ModelValidationError(
                    f"pair ({k}, {kp}): L_k != L_k'^dag * exp(ds/2) within 1e-10")

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def partner(self, k: int) -> int | None:
        """Index of the detailed-balance partner of channel k, if declared."""
        for a, b in self.pairing:
            if a == k:
                return b
            if b == k:
                return a
        return None


def build_liouvillian(model: QuantumModel) -> np.ndarray:
    """Matrix of rho -> -i[H, rho] + sum_k (L rho L^dag - {L^dag L, rho}/2).

    Acts on column-stacked rho (``rho.reshape(-1, order="F")``).
    """
    d = model.dim
    eye = np.eye(d, dtype=complex)
    ham = model.hamiltonian
    liou = -1j * (np.kron(eye, ham) - np.kron(ham.T, eye))
    for ch in model.channels:
        op = ch.operator
        mk = op.conj().T @ op
        liou += np.kron(op.conj(), op)
        liou -= 0.5 * (np.kron(eye, mk) + np.kron(mk.T, eye))
    return liou


def apply_liouvillian(model: QuantumModel, rho: np.ndarray) -> np.ndarray:
    """Direct (non-vectorized) evaluation of the generator, for checks."""
    ham = model.hamiltonian
    out = -1j * (ham @ rho - rho @ ham)
    for ch in model.channels:
        op = ch.operator
        mk = op.conj().T @ op
        out += op @ rho @ op.conj().T - 0.5 * (mk @ rho + rho @ mk)
    return out


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate so the largest-magnitude component is real and positive."""
    i = int(np.argmax(np.abs(vec)))
    a = vec[i]
    if abs(a) == 0.0:
        return vec
    return vec * (abs(a) / a)


def _spectral(density: np.ndarray):
    """Descending eigendecomposition with deterministic phases/ties."""
    vals, vecs = np.linalg.eigh(density)
    cols = [_fix_phase(vecs[:, i]) for i in range(vals.size)]
    keys = [(-vals[i], tuple(np.round(cols[i].view(float), 12))) for i in range(vals.size)]
    order = sorted(range(vals.size), key=lambda i: keys[i])
    vals = vals[order]
    vecs = np.column_stack([cols[i] for i in order])
    return vals, vecs


@dataclass(frozen=True, eq=False)
class SteadyState:
    """Stationary density matrix with its spectral decomposition.

    ``eigenvalues`` are descending; ``eigenvectors[:, n]`` is |pi_n>.
    Only |<pi_n|v>|^2 and the eigenvalues are contractual; individual
    phases are fixed by convention (largest component real-positive).
    """

    density: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    pi_min: float
    pi_max: float

    @classmethod
    def from_density(cls, model: QuantumModel, density: np.ndarray) -> "SteadyState":
        d = model.dim
        rho = np.asarray(density, dtype=complex)
        if rho.shape != (d, d):
            raise ModelValidationError(f"density shape {rho.shape} != ({d}, {d})")
        if abs(np.trace(rho) - 1.0) > 1e-12:
            raise ModelValidationError("density trace != 1 within 1e-12")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
            raise ModelValidationError("density not Hermitian within 1e-12")
        resid = np.max(np.abs(apply_liouvillian(model, rho)))
        if resid > RESIDUAL_MAX:
            raise ModelValidationError(
                f"Liouvillian residual {resid:.3e} exceeds {RESIDUAL_MAX:.0e}")
        rho = 0.5 * (rho + rho.conj().T)
        vals, vecs = _spectral(rho)
        if np.min(vals) < -1e-12:
            raise ModelValidationError("negative steady-state eigenvalue beyond tolerance")
        vals = np.clip(vals, 0.0, None)
        if np.min(vals) < PI_MIN_FLOOR:
            raise RankDeficientSteadyStateError(
                "steady state is rank deficient; -ln(pi_n/<pi>) undefined")
        return cls(density=rho, eigenvalues=vals, eigenvectors=vecs,
                   pi_min=float(np.min(vals)), pi_max=float(np.max(vals)))

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def overlaps(self, psi: np.ndarray) -> np.ndarray:
        """Born weights |<pi_n|psi>|^2 of a normalized pure state."""
        amps = self.eigenvectors.conj().T @ psi
        return (amps.conj() * amps).real


def steady_state(model: QuantumModel) -> SteadyState:
    """Solve L[pi] = 0 by dense eigendecomposition of the generator.

    Intended for small dimensions (the reference workload is d = 2);
    requires the zero eigenvalue of the Liouvillian to be unique.
    """
    liou = build_liouvillian(model)
    vals, vecs = np.linalg.eig(liou)
    order = np.argsort(np.abs(vals))
    if np.abs(vals[order[0]]) > NULL_GAP_MIN:
        raise NonUniqueSteadyStateError("no eigenvalue close to zero")
    if vals.size > 1 and np.abs(vals[order[1]]) <= NULL_GAP_MIN:
        raise NonUniqueSteadyStateError(
            "degenerate Liouvillian null space; steady state not unique")
    d = model.dim
    rho = vecs[:, order[0]].reshape((d, d), order="F")
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return SteadyState.from_density(model, rho)


@dataclass(frozen=True)
class QubitParams:
    """Parameters of the two-noise qubit workload."""

    omega: float
    beta: float
    eta: float
    gamma_gap: float

    def __post_init__(self):
        vals = (self.omega, self.beta, self.eta, self.gamma_gap)
        if not all(math.isfinite(v) for v in vals):
            raise ModelValidationError("qubit parameters must be finite")
        if self.omega <= 0:
            raise ModelValidationError("omega must be > 0")
        if self.beta < 0 or self.eta < 0:
            raise ModelValidationError("beta and eta must be >= 0")
        if self.gamma_gap <= 0:
            raise ModelValidationError("gamma_gap must be > 0")


# Pauli matrices in the sigma_z eigenbasis; |0> is the excited state.
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)


def qubit_rates(params: QubitParams) -> tuple[float, float, float, float]:
    """Resolve (gamma_down, gamma_up, gamma_minus, gamma_plus).

    The gaps gamma_down - gamma_up = gamma_minus - gamma_plus = gamma_gap
    and the ratios gamma_down/gamma_up = exp(beta*omega),
    gamma_minus/gamma_plus = exp(eta) close the system:

        gamma_down  = gap / (1 - exp(-beta*omega))
        gamma_minus = gap / (1 - exp(-eta))

    At beta = 0 or eta = 0 the gap equation has no solution; supply
    absolute rates through ``qubit_from_rates`` instead.
    """
    bw = params.beta * params.omega
    if bw == 0.0 or params.eta == 0.0:
        raise RateResolutionError(
            "beta*omega and eta must be nonzero to resolve rates from the gap; "
            "use qubit_from_rates() with explicit absolute rates")
    g_down = params.gamma_gap / -math.expm1(-bw)
    g_up = g_down * math.exp(-bw)
    g_minus = params.gamma_gap / -math.expm1(-params.eta)
    g_plus = g_minus * math.exp(-params.eta)
    return g_down, g_up, g_minus, g_plus


def qubit_from_rates(omega: float, gamma_down: float, gamma_up: float,
                     gamma_minus: float, gamma_plus: float,
                     ds_z: float | None = None, ds_x: float | None = None) -> QuantumModel:
    """Qubit model from absolute rates.

    Environmental entropies default to the rate ratios,
    ds_z = ln(gamma_down/gamma_up) and ds_x = ln(gamma_minus/gamma_plus),
    which is exactly the value for which the pairing condition holds.
    """
    rates = (gamma_down, gamma_up, gamma_minus, gamma_plus)
    if any(r <= 0 or not math.isfinite(r) for r in rates):
        raise RateResolutionError("all four rates must be positive and finite")
    ham = 0.5 * omega * SIGMA_Z
    if ds_z is None:
        ds_z = math.log(gamma_down / gamma_up)
    if ds_x is None:
        ds_x = math.log(gamma_minus / gamma_plus)
    lower_x = 0.5 * (SIGMA_Z - 1j * SIGMA_Y)   # |+><-|
    raise_x = 0.5 * (SIGMA_Z + 1j * SIGMA_Y)   # |-><+|
    channels = (
        JumpChannel(math.sqrt(gamma_down) * SIGMA_MINUS, +ds_z),
        JumpChannel(math.sqrt(gamma_up) * SIGMA_PLUS, -ds_z),
        JumpChannel(math.sqrt(gamma_minus) * lower_x, +ds_x),
        JumpChannel(math.sqrt(gamma_plus) * raise_x, -ds_x),
    )
    return QuantumModel(dim=2, hamiltonian=ham, channels=channels,
                        pairing=((0, 1), (2, 3)))


def qubit_preset(params: QubitParams) -> QuantumModel:
    """The two-noise qubit: thermal jumps along z, biased jumps along x.

    H = omega * sigma_z / 2 with channels

        L_down  = sqrt(g_down)  sigma^-            ds = +beta*omega
        L_up    = sqrt(g_up)    sigma^+            ds = -beta*omega
        L_minus = sqrt(g_minus) (sig_z - i sig_y)/2  ds = +eta
        L_plus  = sqrt(g_plus)  (sig_z + i sig_y)/2  ds = -eta

    The two jump directions are orthogonal, so trajectories develop
    superpositions of pi-eigenstates and the uncertainty entropy term
    is generically nonzero.
    """
    g_down, g_up, g_minus, g_plus = qubit_rates(params)
    return qubit_from_rates(params.omega, g_down, g_up, g_minus, g_plus,
                            ds_z=params.beta * params.omega, ds_x=params.eta)


def thermal_qubit(omega: float, beta: float, gamma_gap: float) -> QuantumModel:
    """Thermal-noise-only qubit (classical limit: [H, pi] = 0)."""
    bw = beta * omega
    if bw == 0.0:
        raise RateResolutionError("beta*omega must be nonzero; supply rates directly")
    g_down = gamma_gap / -math.expm1(-bw)
    g_up = g_down * math.exp(-bw)
    ham = 0.5 * omega * SIGMA_Z
    channels = (
        JumpChannel(math.sqrt(g_down) * SIGMA_MINUS, +bw),
        JumpChannel(math.sqrt(g_up) * SIGMA_PLUS, -bw),
    )
    return QuantumModel(dim=2, hamiltonian=ham, channels=channels, pairing=((0, 1),))


def _decode_matrix(entries, d: int, what: str) -> np.ndarray:
    arr = np.asarray(entries, dtype=float)
    if arr.shape != (d * d, 2):
        raise ModelValidationError(
            f"{what}: expected {d * d} [re, im] pairs (row-major), got shape {arr.shape}")
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(d, d)


def model_from_json(doc: dict) -> QuantumModel:
    """Build a model from its JSON document form.

    Either ``{"preset": "qubit", "omega": f, "beta": f, "eta": f,
    "gamma_gap": f}`` or an explicit
    ``{"dim": d, "hamiltonian": [[re, im], ...], "channels": [...],
    "pairs": [[k, k'], ...]}`` with matrices as row-major [re, im] pairs.
    """
    if "preset" in doc:
        if doc["preset"] != "qubit":
            raise ModelValidationError(f"unknown preset {doc['preset']!r}")
        params = QubitParams(omega=float(doc["omega"]), beta=float(doc["beta"]),
                             eta=float(doc["eta"]), gamma_gap=float(doc["gamma_gap"]))
        return qubit_preset(params)
    try:
        d = int(doc["dim"])
        ham = _decode_matrix(doc["hamiltonian"], d, "hamiltonian")
        channels = tuple(
            JumpChannel(_decode_matrix(ch["operator"], d, f"channel {i}"),
                        float(ch["env_entropy"]))
            for i, ch in enumerate(doc["channels"]))
    except KeyError as exc:
        raise ModelValidationError(f"missing model field {exc}") from exc
    pairs = tuple(tuple(int(x) for x in p) for p in doc.get("pairs", ()))
    return QuantumModel(dim=d, hamiltonian=ham, channels=channels, pairing=pairs)


def model_to_json(model: QuantumModel) -> dict:
    """Inverse of ``model_from_json`` for explicit models."""
    def encode(mat):
        flat = mat.reshape(-1)
        return [[float(z.real), float(z.imag)] for z in flat]

    return {
        "dim": model.dim,
        "hamiltonian": encode(model.hamiltonian),
        "channels": [{"operator": encode(ch.operator), "env_entropy": ch.env_entropy}
                     for ch in model.channels],
        "pairs": [list(p) for p in model.pairing],
    }
