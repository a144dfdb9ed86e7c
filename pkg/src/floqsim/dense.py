"""Dense materialization and dense exponentials for small-L validation.

Everything here scales as 4^L or worse and exists to cross-check the
matrix-free paths and to feed the small-size exact-diagonalization
pipeline; production evolution never touches it.
"""

from __future__ import annotations

import numpy as np

from ._kernels import popcount_parity
from .hamiltonian import PauliTermSum

_DENSE_L_MAX = 12


def pauli_sum_to_dense(op: PauliTermSum) -> np.ndarray:
    """Dense complex matrix of a Pauli-term sum."""
    if op.L > _DENSE_L_MAX:
        raise ValueError(f"dense materialization capped at L={_DENSE_L_MAX}")
    dim = op.dim
    idx = np.arange(dim, dtype=np.int64)
    M = np.zeros((dim, dim), dtype=np.complex128)
    diag, mxs, mzs, amps = op.compiled()
    M[idx, idx] += diag
    for mx, mz, amp in zip(mxs, mzs, amps):
        sign = popcount_parity(idx, mz)
        M[idx ^ mx, idx] += amp * sign
    return M


def map_to_dense(linmap, block: int = 256) -> np.ndarray:
    """Materialize any object with .dim and .matvec by column blocks."""
    if isinstance(linmap, PauliTermSum):
        return pauli_sum_to_dense(linmap)
    dim = linmap.dim
    if dim > (1 << _DENSE_L_MAX):
        raise ValueError(f"dense materialization capped at L={_DENSE_L_MAX}")
    M = np.empty((dim, dim), dtype=np.complex128)
    eye = np.eye(dim, dtype=np.complex128)
    for lo in range(0, dim, block):
        hi = min(lo + block, dim)
        M[:, lo:hi] = linmap.matvec(eye[:, lo:hi])
    return M


def to_dense(op) -> np.ndarray:
    return map_to_dense(op)


def expm_hermitian(H: np.ndarray, t: float) -> np.ndarray:
    """exp(-i t H) for Hermitian H via eigendecomposition."""
    evals, vecs = np.linalg.eigh(H)
    phases = np.exp(-1j * t * evals)
    return (vecs * phases) @ vecs.conj().T


def floquet_dense(D: np.ndarray, E: np.ndarray, T: float) -> np.ndarray:
    """Dense one-period unitary: second half (D-E) after first half (D+E)."""
    return expm_hermitian(D - E, T / 2.0) @ expm_hermitian(D + E, T / 2.0)
