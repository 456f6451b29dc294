import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectraltn.graded import (
    Gate,
    GradedTensor,
    WireSpace,
    contract,
    creation,
    f2_gate,
    fock_from_single_particle,
    graded_transpose,
    graded_transpose_operator,
    is_parity_preserving,
    operator_parity,
    parity_polar,
    partial_trace_tail,
    random_parity_unitary,
    swap_gate,
    twiddle_gate,
)


def _anticomm(a, b):
    return a @ b + b @ a


@pytest.mark.parametrize("s", [1, 2, 3])
def test_creation_operators_anticommute(s):
    sp = WireSpace(s)
    cds = [creation(sp, b) for b in range(s)]
    eye = np.eye(sp.dim)
    for a in range(s):
        for b in range(s):
            assert np.allclose(_anticomm(cds[a], cds[b]), 0)
            assert np.allclose(_anticomm(cds[a], cds[b].T), eye if a == b else 0)


def test_label_is_ordered_creation_string():
    sp = WireSpace(2)
    c0, c1 = creation(sp, 0), creation(sp, 1)
    vac = np.zeros(4)
    vac[0] = 1
    # |3> = c0^dag c1^dag |0>
    assert np.allclose(c0 @ c1 @ vac, np.eye(4)[3])
    assert np.allclose(c1 @ c0 @ vac, -np.eye(4)[3])


def test_f2_gate_matrix_and_single_particle():
    g = f2_gate()
    m = g.matrix
    assert np.allclose(m.conj().T @ m, np.eye(4))
    assert np.isclose(m[3, 3], -1)  # both occupied picks up the exchange sign
    assert is_parity_preserving(m, 2, 2)


def test_twiddle_phase():
    g = twiddle_gate(1, 8)
    assert np.allclose(np.diag(g.matrix), [1, np.exp(2j * np.pi / 8)])


def test_non_unitary_gate_rejected():
    with pytest.raises(ValueError):
        Gate.from_matrix(2 * np.eye(2), WireSpace(1), 1)


def test_swap_gate_sign():
    m = swap_gate().matrix
    assert np.isclose(m[3, 3], -1) and np.isclose(m[1, 2], 1) and np.isclose(m[2, 1], 1)


@settings(max_examples=25, deadline=None)
@given(st.permutations([0, 1, 2, 3]), st.integers(0, 2**31 - 1))
def test_graded_transpose_inverse(perm, seed):
    rng = np.random.default_rng(seed)
    t = rng.normal(size=(2, 4, 2, 4)) + 1j * rng.normal(size=(2, 4, 2, 4))
    back = np.argsort(perm)
    assert np.allclose(graded_transpose(graded_transpose(t, perm), back), t)


def test_graded_transpose_matches_fock_reordering():
    # two modes a, b: |1_a 1_b> = a^dag b^dag |0> = -b^dag a^dag |0>
    t = np.zeros((2, 2))
    t[1, 1] = 1.0
    assert np.allclose(graded_transpose(t, [1, 0])[1, 1], -1.0)


def test_operator_transpose_preserves_products():
    rng = np.random.default_rng(3)
    a = random_parity_unitary(WireSpace(1), 2, rng).reshape(2, 2, 2, 2)
    b = random_parity_unitary(WireSpace(1), 2, rng).reshape(2, 2, 2, 2)
    ab = (a.reshape(4, 4) @ b.reshape(4, 4)).reshape(2, 2, 2, 2)
    pa, pb = graded_transpose_operator(a, [1, 0]), graded_transpose_operator(b, [1, 0])
    assert np.allclose((pa.reshape(4, 4) @ pb.reshape(4, 4)), graded_transpose_operator(ab, [1, 0]).reshape(4, 4))


def test_contract_plain_matrix_product():
    sp = WireSpace(1)
    rng = np.random.default_rng(0)
    a = rng.normal(size=(2, 2))
    b = rng.normal(size=(2, 2))
    # even-only matrices contract exactly like matrices
    a[0, 1] = a[1, 0] = b[0, 1] = b[1, 0] = 0
    out = contract(GradedTensor((sp, sp), a), GradedTensor((sp, sp), b), [(1, 0)])
    assert np.allclose(out.data, a @ b)


def test_contract_dimension_mismatch():
    a = GradedTensor((WireSpace(1),), np.ones(2))
    b = GradedTensor((WireSpace(2),), np.ones(4))
    with pytest.raises(ValueError):
        contract(a, b, [(0, 0)])


def test_partial_trace_keeps_odd_expectations(rng):
    # two modes, random state, <c_0^dag> type quantities via reduced operator
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    rho = np.outer(psi, psi.conj()).reshape(2, 2, 2, 2)
    r0 = partial_trace_tail(rho, 1)
    cd = creation(WireSpace(1))
    full = np.kron(cd, np.eye(2))  # mode 0 is leftmost: no string needed
    assert np.isclose(np.trace(r0 @ cd), psi.conj() @ full @ psi)


def test_operator_parity():
    cd = creation(WireSpace(1))
    assert operator_parity(cd) == 1
    assert operator_parity(cd @ cd.T) == 0
    assert operator_parity(cd + np.eye(2)) is None


def test_fock_from_single_particle_is_homomorphism(rng):
    def ru(m):
        q, _ = np.linalg.qr(rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m)))
        return q

    u, v = ru(3), ru(3)
    assert np.allclose(fock_from_single_particle(u @ v), fock_from_single_particle(u) @ fock_from_single_particle(v))


def test_parity_polar_unitary_and_block_diagonal(rng):
    m = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    u = parity_polar(m, 4, 2)
    assert np.allclose(u.conj().T @ u, np.eye(16))
    assert is_parity_preserving(u, 4, 2)


def test_random_parity_unitary(rng):
    u = random_parity_unitary(WireSpace(2), 2, rng)
    assert np.allclose(u.conj().T @ u, np.eye(16))
    assert is_parity_preserving(u, 4, 2)
