import json
import math

import numpy as np
import pytest

from floqsim import (ModelParams, PauliTermSum, RangeKind, StateVector, apply,
                     build_drive_part, build_local_operator, build_static_part,
                     initial_state)
from floqsim.dense import pauli_sum_to_dense

from conftest import kron_dense, random_state


def term_map(op):
    return {tuple(sorted(s.items())): c for c, s in op.terms()}


def test_static_part_L2_defaults():
    D = build_static_part(ModelParams(L=2))
    assert term_map(D) == pytest.approx({
        ((0, "Z"), (1, "Z")): 1.0,
        ((0, "X"), (1, "X")): 0.19,
        ((0, "X"),): 0.21,
        ((1, "X"),): 0.21,
    })


def test_short_equals_long_at_L3():
    # every pair is within distance 2, so truncation changes nothing
    Dl = build_static_part(ModelParams(L=3, range=RangeKind.LONG))
    Ds = build_static_part(ModelParams(L=3, range=RangeKind.SHORT))
    assert term_map(Dl) == term_map(Ds)


def test_long_range_distance3_coefficient():
    D = build_static_part(ModelParams(L=4, range=RangeKind.LONG))
    assert term_map(D)[((0, "Z"), (3, "Z"))] == pytest.approx(3.0 ** -1.25)
    Ds = build_static_part(ModelParams(L=4, range=RangeKind.SHORT))
    assert ((0, "Z"), (3, "Z")) not in term_map(Ds)


def test_short_and_long_agree_on_near_terms():
    Dl = build_static_part(ModelParams(L=7, range=RangeKind.LONG))
    Ds = build_static_part(ModelParams(L=7, range=RangeKind.SHORT))
    tl, ts = term_map(Dl), term_map(Ds)
    for key, c in ts.items():
        assert tl[key] == pytest.approx(c)


def test_static_rejects_L1():
    with pytest.raises(ValueError):
        build_static_part(ModelParams(L=1))


def test_drive_part_L1():
    E = build_drive_part(ModelParams(L=1))
    assert term_map(E) == pytest.approx({((0, "Y"),): 0.17, ((0, "Z"),): 0.13})


def test_drive_part_empty_when_undriven():
    E = build_drive_part(ModelParams(L=4, hy=0.0, hz=0.0))
    assert E.n_terms == 0


def test_drive_part_term_count_L20():
    E = build_drive_part(ModelParams(L=20))
    assert E.n_terms == 40
    assert all(len(s) == 1 for _, s in E.terms())


def test_local_operator_examples():
    assert term_map(build_local_operator("Z", 0, 4)) == {((0, "Z"),): 1.0}
    assert term_map(build_local_operator("XX", 2, 4)) == {((2, "X"), (3, "X")): 1.0}
    with pytest.raises(ValueError):
        build_local_operator("ZZ", 3, 4)
    with pytest.raises(ValueError):
        build_local_operator("Z", 4, 4)
    with pytest.raises(ValueError):
        build_local_operator("W", 0, 4)


@pytest.mark.parametrize("L,walls,pattern", [
    (4, 0, "uuuu"),
    (4, 1, "uudd"),
    (6, 2, "uudduu"),
    (4, 3, "udud"),  # boundaries at 1,2,3 alternate every site
])
def test_initial_state_patterns(L, walls, pattern):
    v = initial_state(L, walls)
    index = int(np.argmax(np.abs(v.amplitudes)))
    assert v.norm() == pytest.approx(1.0)
    assert np.count_nonzero(v.amplitudes) == 1
    expected = sum(1 << i for i, ch in enumerate(pattern) if ch == "d")
    assert index == expected


def test_initial_state_wall_count_exhaustive():
    for L in range(2, 10):
        for walls in range(L):
            idx = int(np.argmax(np.abs(initial_state(L, walls).amplitudes)))
            spins = [(idx >> i) & 1 for i in range(L)]
            changes = sum(spins[i] != spins[i + 1] for i in range(L - 1))
            assert changes == walls, (L, walls)


def test_initial_state_range_errors():
    with pytest.raises(ValueError):
        initial_state(4, 4)
    with pytest.raises(ValueError):
        initial_state(4, -1)


def test_apply_single_site_examples():
    z0 = build_local_operator("Z", 0, 1)
    up = StateVector.basis_state(1, 0)
    assert np.allclose(apply(z0, up), up.amplitudes)
    x0 = build_local_operator("X", 0, 1)
    assert np.allclose(apply(x0, up), [0, 1])


def test_apply_static_L2_on_updown():
    D = build_static_part(ModelParams(L=2))
    v = StateVector.basis_state(2, 0b10)  # site 0 up, site 1 down
    out = apply(D, v)
    expected = np.zeros(4, dtype=complex)
    expected[0b10] = -1.0
    expected[0b01] = 0.19
    expected[0b11] = 0.21
    expected[0b00] = 0.21
    assert np.allclose(out, expected, atol=1e-15)


@pytest.mark.parametrize("kind", [RangeKind.LONG, RangeKind.SHORT])
def test_apply_matches_kron_oracle_L8(rng, kind):
    p = ModelParams(L=8, range=kind)
    for op in (build_static_part(p), build_drive_part(p)):
        M = kron_dense(op)
        v = random_state(rng, 8)
        assert np.linalg.norm(op.matvec(v) - M @ v) < 1e-13
        assert np.linalg.norm(pauli_sum_to_dense(op) - M) < 1e-13


def test_built_operators_hermitian_dense():
    for L in (2, 4, 6):
        for kind in (RangeKind.LONG, RangeKind.SHORT):
            p = ModelParams(L=L, range=kind)
            for op in (build_static_part(p), build_drive_part(p)):
                M = pauli_sum_to_dense(op)
                assert np.linalg.norm(M - M.conj().T) <= 1e-12


def test_zero_field_static_is_diagonal():
    D = build_static_part(ModelParams(L=5, Jx=0.0, hx=0.0))
    M = pauli_sum_to_dense(D)
    assert np.linalg.norm(M - np.diag(np.diag(M))) == 0.0


def test_pauli_sum_algebra(rng):
    p = ModelParams(L=3)
    D, E = build_static_part(p), build_drive_part(p)
    v = random_state(rng, 3)
    assert np.allclose((D + E).matvec(v), D.matvec(v) + E.matvec(v), atol=1e-14)
    assert np.allclose((D - E).matvec(v), D.matvec(v) - E.matvec(v), atol=1e-14)
    assert np.allclose((2.5 * D).matvec(v), 2.5 * D.matvec(v), atol=1e-14)
    assert (D - D).n_terms == 0


def test_pauli_sum_canonicalization():
    op = PauliTermSum(2, [(0.5, {0: "Z"}), (0.25, {0: "Z"}), (1.0, {1: "X"}),
                          (-1.0, {1: "X"})])
    assert term_map(op) == pytest.approx({((0, "Z"),): 0.75})


def test_pauli_sum_rejects_complex_coefficients():
    with pytest.raises(ValueError):
        PauliTermSum(2, [(1j, {0: "Z"})])
    PauliTermSum(2, [(complex(1.0, 0.0), {0: "Z"})])  # real-valued complex is fine


def test_pauli_sum_dimension_mismatch():
    op = PauliTermSum(3, [(1.0, {0: "Z"})])
    with pytest.raises(ValueError):
        op.matvec(np.zeros(4, dtype=complex))


def test_modelparams_validation():
    with pytest.raises(ValueError):
        ModelParams(L=0)
    with pytest.raises(ValueError):
        ModelParams(L=4, alpha=0.0)
    with pytest.raises(ValueError):
        ModelParams(L=4, omega=-1.0)
    with pytest.raises(ValueError):
        ModelParams(L=4, boundary="periodic")
    assert ModelParams(L=4, omega=4.0).period == pytest.approx(2 * math.pi / 4.0)


def test_modelparams_json_roundtrip():
    p = ModelParams(L=6, range=RangeKind.SHORT, omega=5.5)
    q = ModelParams.from_json(p.to_json())
    assert q == p
    d = json.loads(p.to_json())
    assert set(d) == {"L", "J", "Jx", "hx", "hy", "hz", "alpha", "range",
                      "omega", "boundary"}


def test_modelparams_rejects_unknown_keys():
    d = json.loads(ModelParams(L=4).to_json())
    d["tilt"] = 0.3
    with pytest.raises(ValueError, match="unknown"):
        ModelParams.from_dict(d)
