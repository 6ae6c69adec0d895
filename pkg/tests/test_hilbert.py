import numpy as np
import pytest
from hypothesis import given, strategies as st

from twophoton import hilbert as hb
from twophoton.errors import InvalidArgumentError


def test_dimensions():
    assert hb.make_space(1).dim == 4
    assert hb.make_space(20).dim == 42
    with pytest.raises(InvalidArgumentError):
        hb.make_space(0)


def test_basis_ordering_canary():
    # photon-major: |n, q> at 2n + q with q = 0 for g
    space = hb.make_space(3)
    assert hb.basis_index(2, hb.QUBIT_E) == 5
    v = space.ket(1, hb.QUBIT_G)
    assert np.flatnonzero(v).tolist() == [2]
    assert space.photon_numbers().tolist() == [0, 0, 1, 1, 2, 2, 3, 3]


def test_annihilation_small():
    space = hb.make_space(1)
    a = hb.annihilation(space)
    for q in (hb.QUBIT_G, hb.QUBIT_E):
        np.testing.assert_allclose(a @ space.ket(1, q), space.ket(0, q))
        np.testing.assert_allclose(a @ space.ket(0, q), 0)


def test_ladder_commutator_truncation_edge():
    space = hb.make_space(6)
    a = hb.annihilation(space)
    comm = (a @ a.dag() - a.dag() @ a).matrix
    expected = np.ones(space.dim)
    expected[space.photon_numbers() == space.n_max] = -space.n_max
    # sqrt(n)**2 rounds, so equality holds to machine precision
    np.testing.assert_allclose(comm, np.diag(expected), rtol=0, atol=4 * np.finfo(float).eps * space.n_max)


def test_number_operator_and_adjoint():
    space = hb.make_space(9)
    a = hb.annihilation(space)
    np.testing.assert_allclose(np.diag((a.dag() @ a).matrix).real, space.photon_numbers())
    np.testing.assert_array_equal(a.dag().matrix, hb.creation(space).matrix)


def test_pauli_algebra():
    space = hb.make_space(2)
    x, z = hb.pauli(space, "x"), hb.pauli(space, "z")
    p, m = hb.pauli(space, "plus"), hb.pauli(space, "minus")
    one = np.eye(space.dim)
    np.testing.assert_array_equal((x @ x).matrix, one)
    np.testing.assert_array_equal((p @ m + m @ p).matrix, one)
    np.testing.assert_array_equal((p + m).matrix, x.matrix)
    sy = -1j * (p - m)
    np.testing.assert_array_equal(z.commutator(x).matrix, (2j * sy).matrix)
    np.testing.assert_array_equal(hb.pauli(space, "y").matrix, sy.matrix)
    np.testing.assert_array_equal(np.unique(np.diag(z.matrix)), [-1, 1])
    with pytest.raises(InvalidArgumentError):
        hb.pauli(space, "w")


def test_parity():
    space = hb.make_space(4)
    par = hb.photon_parity(space)
    np.testing.assert_array_equal(par @ space.ket(0, hb.QUBIT_G), space.ket(0, hb.QUBIT_G))
    np.testing.assert_array_equal(par @ space.ket(1, hb.QUBIT_E), -space.ket(1, hb.QUBIT_E))
    np.testing.assert_array_equal((par @ par).matrix, np.eye(space.dim))


def test_parity_commutes_with_model_pieces():
    space = hb.make_space(12)
    par = hb.photon_parity(space)
    x = hb.quadrature(space)
    for op in (hb.number(space), hb.pauli(space, "z"), hb.pauli(space, "x")):
        assert np.max(np.abs(par.commutator(op).matrix)) == 0
    keep = space.photon_numbers() <= space.n_max - 4
    for op in (x @ x, x @ x @ x @ x):
        c = par.commutator(op).matrix
        assert np.max(np.abs(c[np.ix_(keep, keep)])) == 0


def test_space_mismatch_refused():
    a = hb.annihilation(hb.make_space(2))
    b = hb.annihilation(hb.make_space(3))
    with pytest.raises(InvalidArgumentError):
        a + b
    with pytest.raises(InvalidArgumentError):
        a @ b


def test_operators_are_immutable():
    a = hb.annihilation(hb.make_space(2))
    with pytest.raises(ValueError):
        a.matrix[0, 0] = 1.0


@given(st.integers(min_value=1, max_value=30))
def test_generated_operators_finite(n_max):
    space = hb.make_space(n_max)
    assert space.dim == 2 * (n_max + 1)
    for op in (hb.annihilation(space), hb.quadrature(space), hb.photon_parity(space), hb.pauli(space, "x")):
        assert np.all(np.isfinite(op.matrix))
        assert op.matrix.shape == (space.dim, space.dim)
