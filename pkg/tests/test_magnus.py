from fractions import Fraction

import numpy as np
import pytest

from floqsim import (ModelParams, PauliTermSum, assemble_deff, bch_order_check,
                     build_drive_part, build_static_part, expm_apply,
                     floquet_unitary_apply, initial_state, magnus_words)
from floqsim.dense import expm_hermitian, map_to_dense, pauli_sum_to_dense

from conftest import kron_dense, random_state


def words_dict(order):
    return {w.letters: w for w in magnus_words(order)}


def test_order0_is_single_D():
    ws = magnus_words(0)
    assert len(ws) == 1
    assert ws[0].letters == "D"
    assert ws[0].coefficient(0.7) == 1.0


def test_order2_coefficients():
    ws = words_dict(2)
    assert set(ws) == {"EED", "EDE", "DEE"}
    T = 0.6
    pref = -(1.0 / 6.0) * (T / 2.0) ** 2
    assert ws["EED"].coefficient(T) == pytest.approx(pref)
    assert ws["EDE"].coefficient(T) == pytest.approx(-2 * pref)
    assert ws["DEE"].coefficient(T) == pytest.approx(pref)


def test_order4_table():
    ws = words_dict(4)
    assert len(ws) == 15
    assert ws["DEDED"].rational == Fraction(8, 360)
    assert ws["EDDED"].rational == Fraction(-27, 360)
    assert all(len(w) == 5 for w in ws)
    # adjoint pairing: reversed word carries the same weight, which is
    # what makes the order-4 collection Hermitian with real prefactors
    for name, w in ws.items():
        assert ws[name[::-1]].rational == w.rational


def test_word_length_matches_order():
    for order in range(5):
        for w in magnus_words(order):
            assert len(w.letters) == order + 1
            assert w.order == order


def test_each_order_cyclic_trace_free():
    # tr(AB...) is invariant under cyclic shifts, so each order's
    # coefficients must cancel within every cyclic class
    for order in range(1, 5):
        classes = {}
        for w in magnus_words(order):
            shifts = {w.letters[k:] + w.letters[:k] for k in range(len(w.letters))}
            classes.setdefault(min(shifts), []).append(w.rational)
        for cls, fracs in classes.items():
            total = sum(fracs, Fraction(0))
            assert total == 0, (order, cls)


def test_magnus_words_order_bounds():
    with pytest.raises(ValueError):
        magnus_words(5)
    with pytest.raises(ValueError):
        magnus_words(-1)
    with pytest.raises(ValueError):
        assemble_deff(PauliTermSum(2), PauliTermSum(2), 0.1, 5)


def test_word_collections_hermitian_dense(ops4):
    D, E = ops4
    Dd, Ed = pauli_sum_to_dense(D), pauli_sum_to_dense(E)

    def word_dense(word):
        # word "EED" is the product E @ E @ D
        M = np.eye(Dd.shape[0], dtype=complex)
        for letter in reversed(word):
            M = (Dd if letter == "D" else Ed) @ M
        return M

    T = 0.45
    for order in range(5):
        H = sum(w.coefficient(T) * word_dense(w.letters) for w in magnus_words(order))
        assert np.linalg.norm(H - H.conj().T) <= 1e-12, order


def test_order1_equals_commutator(ops4):
    D, E = ops4
    Dd, Ed = pauli_sum_to_dense(D), pauli_sum_to_dense(E)
    T = 0.37
    H1 = sum(w.coefficient(T) * (Ed @ Dd if w.letters == "ED" else Dd @ Ed)
             for w in magnus_words(1))
    assert np.allclose(H1, (1j * T / 4.0) * (Ed @ Dd - Dd @ Ed), atol=1e-14)


def test_assemble_n0_acts_like_D(ops4, rng):
    D, E = ops4
    m = assemble_deff(D, E, 0.8, 0)
    v = random_state(rng, 4)
    assert np.allclose(m.matvec(v), D.matvec(v), atol=1e-14)


def test_assemble_with_zero_E_acts_like_D(rng):
    p = ModelParams(L=3)
    D = build_static_part(p)
    E0 = PauliTermSum(3)
    v = random_state(rng, 3)
    for n in (1, 2, 3, 4):
        m = assemble_deff(D, E0, 0.9, n)
        assert np.allclose(m.matvec(v), D.matvec(v), atol=1e-13)


def test_deff2_matches_commutator_oracle_L2():
    p = ModelParams(L=2)
    D, E = build_static_part(p), build_drive_part(p)
    T = 0.5
    Dd, Ed = kron_dense(D), kron_dense(E)
    oracle = (Dd + (1j * T / 4.0) * (Ed @ Dd - Dd @ Ed)
              - (T ** 2 / 24.0) * (Ed @ Ed @ Dd - 2 * Ed @ Dd @ Ed + Dd @ Ed @ Ed))
    assert np.linalg.norm(map_to_dense(assemble_deff(D, E, T, 2)) - oracle) < 1e-13


def test_deff4_matches_naive_word_oracle(ops6, rng):
    # independent of the shared-suffix plan: evaluate each word as an
    # explicit dense product
    p, D, E = ops6
    T = p.period
    Dd, Ed = pauli_sum_to_dense(D), pauli_sum_to_dense(E)
    oracle = np.zeros_like(Dd)
    for order in range(5):
        for w in magnus_words(order):
            M = np.eye(Dd.shape[0], dtype=complex)
            for letter in reversed(w.letters):
                M = (Dd if letter == "D" else Ed) @ M
            oracle += w.coefficient(T) * M
    Hn = map_to_dense(assemble_deff(D, E, T, 4))
    assert np.linalg.norm(Hn - oracle) <= 1e-11


def test_matvec_2d_consistent_with_1d(ops4, rng):
    D, E = ops4
    m = assemble_deff(D, E, 0.6, 3)
    X = np.stack([random_state(rng, 4) for _ in range(5)], axis=1)
    out2 = m.matvec(X)
    for c in range(5):
        assert np.allclose(out2[:, c], m.matvec(X[:, c].copy()), atol=1e-13)


def test_selfadjoint_on_random_pairs(ops4, rng):
    D, E = ops4
    for n in (1, 2, 3, 4):
        m = assemble_deff(D, E, 0.7, n)
        for _ in range(3):
            u = random_state(rng, 4)
            v = random_state(rng, 4)
            lhs = np.vdot(u, m.matvec(v))
            rhs = np.conj(np.vdot(v, m.matvec(u)))
            assert abs(lhs - rhs) <= 1e-11


def test_dimension_mismatch_rejected():
    D = build_static_part(ModelParams(L=3))
    E = build_drive_part(ModelParams(L=4))
    with pytest.raises(ValueError):
        assemble_deff(D, E, 0.1, 2)


@pytest.mark.parametrize("n,grid", [
    (0, np.logspace(-3, -1, 7)),
    (1, np.logspace(-3, -1, 7)),
    (2, np.logspace(-3, -1, 7)),
    (3, np.logspace(-2, -1, 6)),
    (4, np.logspace(-1.6, -1, 5)),
])
def test_bch_order_check_slopes(ops4, n, grid):
    D, E = ops4
    slope = bch_order_check(D, E, n, grid)
    assert abs(slope - (n + 2)) <= 0.3


def test_bch_order_check_degenerate_grid(ops4):
    D, E = ops4
    with pytest.raises(ValueError, match="degenerate|4 grid"):
        bch_order_check(D, E, 4, [1e-4, 2e-4, 3e-4, 4e-4, 5e-4])
    with pytest.raises(ValueError):
        bch_order_check(D, E, 0, [0.01, 0.02, 0.03])


def test_floquet_unitary_merges_when_undriven(rng):
    p = ModelParams(L=4)
    D = build_static_part(p)
    E0 = PauliTermSum(4)
    v = initial_state(4, 1)
    T = 0.7
    w = floquet_unitary_apply(D, E0, T, v)
    ref = expm_apply(D, v, T)
    assert np.linalg.norm(w.amplitudes - ref.amplitudes) < 1e-11


def test_floquet_unitary_T0_is_identity(ops4):
    D, E = ops4
    v = initial_state(4, 2)
    w = floquet_unitary_apply(D, E, 0.0, v)
    assert np.allclose(w.amplitudes, v.amplitudes)


def test_floquet_unitary_matches_dense(ops6, rng):
    p, D, E = ops6
    T = p.period
    Uf = (expm_hermitian(pauli_sum_to_dense(D) - pauli_sum_to_dense(E), T / 2)
          @ expm_hermitian(pauli_sum_to_dense(D) + pauli_sum_to_dense(E), T / 2))
    v = initial_state(6, 3)
    w = floquet_unitary_apply(D, E, T, v)
    assert np.linalg.norm(w.amplitudes - Uf @ v.amplitudes) < 1e-9
