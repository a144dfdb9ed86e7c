"""Numba kernels for matrix-free Pauli-sum and operator-word matvecs.

Basis convention: computational basis indexed by integer bitstrings,
bit i = site i, bit value 0 = spin up (sigma^z eigenvalue +1).

A Pauli string is encoded by two bitmasks: ``mx`` marks sites carrying
X or Y (bit flips), ``mz`` marks sites carrying Z or Y (sign factors).
The stored amplitude absorbs the coefficient and the i^(#Y) phase, so
the matrix element for column k is ``amp * (-1)**parity(k & mz)`` at
row ``k ^ mx``.
"""

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _parity(x):
    x ^= x >> 32
    x ^= x >> 16
    x ^= x >> 8
    x ^= x >> 4
    x ^= x >> 2
    x ^= x >> 1
    return x & 1


@njit(cache=True, fastmath=True)
def apply_pauli_sum(v, diag, mx, mz, amp, out):
    """out = H v for a compiled Pauli-term sum (1D state vector)."""
    n = v.shape[0]
    for k in range(n):
        out[k] = diag[k] * v[k]
    for t in range(mx.shape[0]):
        m = mx[t]
        z = mz[t]
        a = amp[t]
        if z == 0:
            ar = a.real
            for k in range(n):
                out[k] += ar * v[k ^ m]
        else:
            for k in range(n):
                j = k ^ m
                if _parity(j & z):
                    out[k] -= a * v[j]
                else:
                    out[k] += a * v[j]
    return out


@njit(cache=True, fastmath=True)
def apply_pauli_sum_mat(V, diag, mx, mz, amp, out):
    """Column-batched apply: V and out have shape (dim, ncols)."""
    n, nc = V.shape
    for k in range(n):
        d = diag[k]
        for c in range(nc):
            out[k, c] = d * V[k, c]
    for t in range(mx.shape[0]):
        m = mx[t]
        z = mz[t]
        a = amp[t]
        for k in range(n):
            j = k ^ m
            if z != 0 and _parity(j & z):
                for c in range(nc):
                    out[k, c] -= a * V[j, c]
            else:
                for c in range(nc):
                    out[k, c] += a * V[j, c]
    return out


@njit(cache=True, fastmath=True)
def apply_word_plan(v, letters, parents, ocoeff,
                    diag_d, mx_d, mz_d, amp_d,
                    diag_e, mx_e, mz_e, amp_e,
                    buf, out):
    """Evaluate a linear combination of operator words on v.

    The shared-suffix evaluation plan is a forest: node i applies D
    (letters[i] == 0) or E (letters[i] == 1) to its parent's vector
    (parents[i] == -1 means the input v).  Nodes are topologically
    ordered, parents first.  ocoeff[i] is the (possibly zero) weight
    of node i's vector in the output sum.
    """
    n = v.shape[0]
    for k in range(n):
        out[k] = 0.0 + 0.0j
    for i in range(letters.shape[0]):
        src = v if parents[i] < 0 else buf[parents[i]]
        if letters[i] == 0:
            apply_pauli_sum(src, diag_d, mx_d, mz_d, amp_d, buf[i])
        else:
            apply_pauli_sum(src, diag_e, mx_e, mz_e, amp_e, buf[i])
        c = ocoeff[i]
        if c != 0:
            for k in range(n):
                out[k] += c * buf[i][k]
    return out


@njit(cache=True, fastmath=True)
def apply_word_plan_mat(V, letters, parents, ocoeff,
                        diag_d, mx_d, mz_d, amp_d,
                        diag_e, mx_e, mz_e, amp_e,
                        buf, out):
    """Column-batched variant of apply_word_plan; V is (dim, ncols)."""
    n, nc = V.shape
    for k in range(n):
        for c in range(nc):
            out[k, c] = 0.0 + 0.0j
    for i in range(letters.shape[0]):
        src = V if parents[i] < 0 else buf[parents[i]]
        if letters[i] == 0:
            apply_pauli_sum_mat(src, diag_d, mx_d, mz_d, amp_d, buf[i])
        else:
            apply_pauli_sum_mat(src, diag_e, mx_e, mz_e, amp_e, buf[i])
        w = ocoeff[i]
        if w != 0:
            for k in range(n):
                for c in range(nc):
                    out[k, c] += w * buf[i][k, c]
    return out


def popcount_parity(idx, mask):
    """Vectorized (-1)**popcount(idx & mask) sign array, as float64."""
    x = np.bitwise_and(idx, mask)
    p = np.zeros_like(x)
    while np.any(x):
        p ^= x & 1
        x >>= 1
    return 1.0 - 2.0 * p.astype(np.float64)
