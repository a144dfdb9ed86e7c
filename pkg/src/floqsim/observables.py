"""Expectation values, energy densities, and entanglement entropies."""

from __future__ import annotations

import math

import numpy as np

from .hamiltonian import PauliTermSum, StateVector, build_local_operator

_SV_CUTOFF = 1e-14
_HERMITICITY_TOL = 1e-10


def expectation(O, v: StateVector) -> float:
    """Real part of <v|O|v>; rejects operators with a non-real value.

    O is any Hermitian map exposing .dim and .matvec (PauliTermSum or
    an assembled truncation).
    """
    x = v.amplitudes if isinstance(v, StateVector) else np.asarray(v)
    if x.shape[0] != O.dim:
        raise ValueError("dimension mismatch between operator and state")
    val = np.vdot(x, O.matvec(x))
    if abs(val.imag) > _HERMITICITY_TOL:
        raise ValueError(
            f"expectation value has imaginary part {val.imag:.3e}; "
            "operator is not Hermitian on this state")
    return float(val.real)


def energy_density(n: int, Dn, v: StateVector, L: int) -> float:
    """<Dn>/L for the order-n truncated generator."""
    return expectation(Dn, v) / L


def entanglement_entropy(v: StateVector, cut: int) -> float:
    """Von Neumann entropy (nats) across a bipartition after `cut` sites.

    Amplitudes reshape into a 2^(L-cut) x 2^cut matrix (sites below the
    cut are the low bits); squared singular values below 1e-14 are
    dropped before the x ln x evaluation.
    """
    if not 1 <= cut <= v.L - 1:
        raise ValueError(f"cut must be in [1, {v.L - 1}], got {cut}")
    M = v.amplitudes.reshape(1 << (v.L - cut), 1 << cut)
    p = np.linalg.svd(M, compute_uv=False) ** 2
    p = p[p > _SV_CUTOFF]
    return float(-np.sum(p * np.log(p)))


def half_chain_entropy(v: StateVector) -> float:
    return entanglement_entropy(v, v.L // 2)


def page_value(L: int) -> float:
    """Random-state average half-chain entropy, (L ln2 - 1)/2 nats."""
    if L % 2 != 0:
        raise ValueError("half-chain Page value needs even L")
    return (L * math.log(2.0) - 1.0) / 2.0


def make_observables(maps_by_order: dict, L: int, *, entropy: bool = True,
                     local_kinds: tuple = ()) -> list:
    """Named observable callables in canonical column order.

    maps_by_order: {n: generator map} producing energy_n{n} columns
    (expectation per site); entropy adds the half-chain S; local_kinds
    (subset of Z, X, ZZ, XX) add per-site expectation columns named
    like z_0, zz_3.
    """
    obs = []
    for n in sorted(maps_by_order):
        Dn = maps_by_order[n]
        obs.append((f"energy_n{n}",
                    lambda sv, Dn=Dn: expectation(Dn, sv) / L))
    if entropy:
        obs.append(("entropy", half_chain_entropy))
    for kind in local_kinds:
        span = 2 if len(kind) == 2 else 1
        for site in range(L - span + 1):
            op = build_local_operator(kind, site, L)
            obs.append((f"{kind.lower()}_{site}",
                        lambda sv, op=op: expectation(op, sv)))
    return obs
