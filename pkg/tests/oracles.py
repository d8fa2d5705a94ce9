"""Independent brute-force references used across the test modules.

Everything here is deliberately built by a different route than the
package code: the generator matrix is assembled column-by-column from
its action on basis matrices (not by Kronecker identities), and the
stationary state comes from an SVD null space rather than an
eigendecomposition.
"""

import numpy as np
import scipy.linalg


def generator_action(ham, ops, rho):
    """-i[H, rho] + sum_k (L rho L^+ - {L^+L, rho}/2), evaluated directly."""
    out = -1j * (ham @ rho - rho @ ham)
    for op in ops:
        mk = op.conj().T @ op
        out = out + op @ rho @ op.conj().T - 0.5 * (mk @ rho + rho @ mk)
    return out


def liouvillian_by_columns(ham, ops):
    """Generator matrix on column-stacked rho, one basis matrix at a time."""
    d = ham.shape[0]
    cols = []
    for j in range(d * d):
        e = np.zeros((d * d,), dtype=complex)
        e[j] = 1.0
        rho = e.reshape((d, d), order="F")
        cols.append(generator_action(ham, ops, rho).reshape(-1, order="F"))
    return np.column_stack(cols)


def steady_from_nullspace(ham, ops):
    """Stationary density matrix from the SVD null space of the generator."""
    liou = liouvillian_by_columns(ham, ops)
    ns = scipy.linalg.null_space(liou, rcond=1e-10)
    assert ns.shape[1] == 1, f"null space dimension {ns.shape[1]} != 1"
    d = ham.shape[0]
    rho = ns[:, 0].reshape((d, d), order="F")
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    if np.trace(rho).real < 0:
        rho = -rho
    return rho


def propagate_master_equation(ham, ops, rho0, t):
    """exp(L t) applied to rho0 through the dense matrix exponential."""
    liou = liouvillian_by_columns(ham, ops)
    v = rho0.reshape(-1, order="F")
    out = scipy.linalg.expm(liou * t) @ v
    d = ham.shape[0]
    return out.reshape((d, d), order="F")


def model_ops(model):
    return [ch.operator for ch in model.channels]
