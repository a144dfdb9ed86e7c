import numpy as np
import pytest

from floqsim import ModelParams, RangeKind, build_drive_part, build_static_part

I2 = np.eye(2, dtype=complex)
PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_dense(op):
    """Independent dense oracle: build the matrix by Kronecker products.

    Site i is bit i (the least significant), so site 0 is the rightmost
    factor of the Kronecker chain.
    """
    M = np.zeros((op.dim, op.dim), dtype=complex)
    for coeff, string in op.terms():
        K = np.array([[1.0]], dtype=complex)
        for site in range(op.L):
            K = np.kron(PAULI[string[site]] if site in string else I2, K)
        M += coeff * K
    return M


def expm_eigh(H, t):
    evals, vecs = np.linalg.eigh(H)
    return (vecs * np.exp(-1j * t * evals)) @ vecs.conj().T


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def params4():
    return ModelParams(L=4)


@pytest.fixture
def ops4(params4):
    return build_static_part(params4), build_drive_part(params4)


@pytest.fixture
def ops6():
    p = ModelParams(L=6, range=RangeKind.SHORT, omega=9.0)
    return p, build_static_part(p), build_drive_part(p)


def random_state(rng, L):
    v = rng.normal(size=1 << L) + 1j * rng.normal(size=1 << L)
    return v / np.linalg.norm(v)
