import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floqsim import (ModelParams, StateVector, assemble_deff, build_drive_part,
                     build_local_operator, build_static_part, initial_state)
from floqsim.observables import (energy_density, entanglement_entropy,
                                 expectation, page_value)

from conftest import random_state


def test_expectation_z_on_polarized():
    z0 = build_local_operator("Z", 0, 4)
    assert expectation(z0, initial_state(4, 0)) == pytest.approx(1.0)


def test_expectation_polarized_pair_sum():
    # fully polarized long-range chain: every zz pair contributes its
    # coupling; the x terms flip spins and contribute nothing
    p = ModelParams(L=4)
    D = build_static_part(p)
    E = build_drive_part(p)
    D0 = assemble_deff(D, E, p.period, 0)
    v = initial_state(4, 0)
    expected = sum(1.0 / (j - i) ** 1.25 for i in range(4) for j in range(i + 1, 4))
    assert expectation(D0, v) == pytest.approx(expected, abs=1e-13)
    assert energy_density(0, D0, v, 4) == pytest.approx(expected / 4, abs=1e-13)


def test_expectation_rejects_nonhermitian(rng):
    p = ModelParams(L=3)
    D, E = build_static_part(p), build_drive_part(p)

    class Commutator:
        dim = D.dim

        def matvec(self, x):
            return D.matvec(E.matvec(x)) - E.matvec(D.matvec(x))

    v = StateVector(random_state(rng, 3), 3)
    with pytest.raises(ValueError, match="imaginary"):
        expectation(Commutator(), v)


def test_expectation_dimension_mismatch(rng):
    z0 = build_local_operator("Z", 0, 3)
    with pytest.raises(ValueError):
        expectation(z0, StateVector(random_state(rng, 4), 4))


def test_energy_density_traceless_basis_average():
    p = ModelParams(L=6, range="short")
    D = build_static_part(p)
    total = sum(expectation(D, StateVector.basis_state(6, k)) for k in range(64))
    assert total == pytest.approx(0.0, abs=1e-11)


def test_energy_density_orders_converge_at_small_T():
    p = ModelParams(L=4)
    D, E = build_static_part(p), build_drive_part(p)
    v = initial_state(4, 3)
    e0 = energy_density(0, assemble_deff(D, E, 1e-3, 0), v, 4)
    e2 = energy_density(2, assemble_deff(D, E, 1e-3, 2), v, 4)
    assert abs(e2 - e0) < 1e-5


def test_entropy_product_state_zero():
    for walls in (0, 2):
        v = initial_state(6, walls)
        assert entanglement_entropy(v, 3) == pytest.approx(0.0, abs=1e-14)


def test_entropy_bell_pair():
    bell = StateVector(np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2), 2)
    assert entanglement_entropy(bell, 1) == pytest.approx(math.log(2), abs=1e-13)


def test_entropy_matches_partial_trace_oracle(rng):
    v = StateVector(random_state(rng, 8), 8)
    # reduced density matrix over the low 4 sites, direct partial trace
    psi = v.amplitudes.reshape(16, 16)  # [high, low]
    rho_low = psi.T @ psi.conj()
    lam = np.linalg.eigvalsh(rho_low)
    lam = lam[lam > 1e-14]
    oracle = float(-np.sum(lam * np.log(lam)))
    assert entanglement_entropy(v, 4) == pytest.approx(oracle, abs=1e-10)


def test_entropy_invalid_cut(rng):
    v = StateVector(random_state(rng, 4), 4)
    for cut in (0, 4, 5):
        with pytest.raises(ValueError):
            entanglement_entropy(v, cut)


def _reverse_sites(v: StateVector) -> StateVector:
    amp = v.amplitudes.reshape([2] * v.L)  # axis k = site L-1-k (C order)
    return StateVector(np.ascontiguousarray(amp.transpose()).reshape(-1), v.L)


@given(st.integers(0, 2 ** 32 - 1), st.integers(3, 8))
@settings(max_examples=25, deadline=None)
def test_entropy_bipartition_symmetry_and_bounds(seed, L):
    # Schmidt symmetry: a block and its complement carry equal entropy.
    # The complement of the first c sites is the last L-c sites, i.e.
    # the first L-c sites of the site-reversed state.
    v = StateVector(random_state(np.random.default_rng(seed), L), L)
    rev = _reverse_sites(v)
    for cut in range(1, L):
        s = entanglement_entropy(v, cut)
        assert abs(s - entanglement_entropy(rev, L - cut)) < 1e-10
        assert -1e-12 <= s <= min(cut, L - cut) * math.log(2) + 1e-12
    if L % 2 == 0:
        assert abs(entanglement_entropy(v, L // 2)
                   - entanglement_entropy(v, L - L // 2)) < 1e-10


def test_entropy_invariant_under_one_sided_rotation(rng):
    v = StateVector(random_state(rng, 6), 6)
    s0 = entanglement_entropy(v, 3)
    # single-site rotation on site 0 (left of any cut >= 1)
    theta = 0.7
    U = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]],
                 dtype=complex)
    amp = v.amplitudes.reshape(-1, 2)  # low bit = site 0 is the fastest index
    rotated = (amp @ U.T).reshape(-1)
    s1 = entanglement_entropy(StateVector(rotated, 6), 3)
    assert abs(s0 - s1) < 1e-10


def test_expectation_global_phase_invariance(rng):
    p = ModelParams(L=4)
    D = build_static_part(p)
    v = random_state(rng, 4)
    a = expectation(D, StateVector(v, 4))
    b = expectation(D, StateVector(np.exp(1j * 0.83) * v, 4))
    assert a == pytest.approx(b, abs=1e-12)


def test_page_values():
    assert page_value(20) == pytest.approx(6.43147, abs=1e-5)
    assert page_value(2) == pytest.approx((2 * math.log(2) - 1) / 2, abs=1e-15)
    assert page_value(16) == pytest.approx(5.04518, abs=1e-5)
    with pytest.raises(ValueError):
        page_value(7)
