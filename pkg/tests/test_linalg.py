from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import matrices

from sheafkit import linalg
from sheafkit.errors import FieldMismatch, ShapeMismatch, SingularMatrix
from sheafkit.linalg import COMPLEX, RATIONAL, REAL, Matrix


def test_field_promotion():
    assert linalg.promote(RATIONAL, REAL) == REAL
    assert linalg.promote(REAL, COMPLEX, RATIONAL) == COMPLEX
    assert Matrix([[1, Fraction(1, 2)]]).field == RATIONAL
    assert Matrix([[1, 0.5]]).field == REAL
    assert Matrix([[1j]]).field == COMPLEX


def test_rational_rejects_fractional_float():
    with pytest.raises(FieldMismatch):
        Matrix([[0.5]], RATIONAL)


def test_product_and_shapes():
    a = Matrix([[1, 2], [3, 4]])
    b = Matrix([[0, 1], [1, 0]])
    assert (a @ b).data == ((2, 1), (4, 3))
    with pytest.raises(ShapeMismatch):
        a @ Matrix([[1, 2, 3]])
    assert Matrix.zeros(0, 3).shape == (0, 3)
    assert (Matrix.zeros(2, 0) @ Matrix.zeros(0, 3)).is_zero()


def test_selection_and_blocks():
    sel = Matrix.selection([2, 0], 3)
    assert sel.apply((7, 8, 9)) == (9, 7)
    blk = linalg.block_matrix(3, 3, [(0, 0, Matrix.identity(2)), (2, 2, Matrix([[5]]))], RATIONAL)
    assert blk.data == ((1, 0, 0), (0, 1, 0), (0, 0, 5))


def test_exact_kernel():
    m = Matrix([[1, 2, 3], [2, 4, 6]])
    basis, r = linalg.kernel_basis(m)
    assert r == 1 and len(basis) == 2
    for v in basis:
        assert m.apply(v) == (0, 0)


def test_inverse_and_singular():
    a = Matrix([[2, 1], [1, 1]])
    assert (a @ linalg.inverse(a)) == Matrix.identity(2)
    with pytest.raises(SingularMatrix):
        linalg.inverse(Matrix([[1, 2], [2, 4]]))


def test_solve_inconsistent_is_none():
    assert linalg.solve(Matrix([[1, 1], [1, 1]]), (1, 2)) is None
    assert linalg.solve(Matrix([[1, 1], [1, -1]]), (2, 0)) == (1, 1)


def test_float_rank_uses_tolerance():
    eps = 1e-13
    assert linalg.rank(Matrix([[1.0, 1.0], [1.0, 1.0 + eps]])) == 1
    assert linalg.rank(Matrix([[1.0, 1.0], [1.0, 1.0 + 1e-3]])) == 2


def test_complex_kernel():
    m = Matrix([[1, 1j], [1j, -1]])
    basis, r = linalg.kernel_basis(m)
    assert r == 1
    assert np.allclose(m.to_numpy() @ np.array(basis[0]), 0)


def test_orthonormalize_drops_dependent():
    q = linalg.orthonormalize([(1.0, 0.0), (2.0, 0.0), (1.0, 1.0)])
    assert len(q) == 2
    assert np.allclose(np.array(q) @ np.array(q).T, np.eye(2))


def test_json_round_trip_complex():
    m = Matrix([[1 + 2j, 0]])
    assert Matrix.from_json(m.to_json()) == m


@given(st.integers(1, 4), st.integers(1, 4), st.data())
def test_rank_matches_numpy(r, c, data):
    m = data.draw(matrices(r, c))
    assert linalg.rank(m) == np.linalg.matrix_rank(m.to_numpy().astype(float))


@given(st.integers(1, 4), st.integers(1, 4), st.data())
def test_rank_nullity(r, c, data):
    m = data.draw(matrices(r, c))
    basis, rk = linalg.kernel_basis(m)
    assert rk + len(basis) == c
    assert all(not any(m.apply(v)) for v in basis)


@given(st.integers(1, 3), st.data())
def test_solve_matrix_recovers(n, data):
    a = data.draw(matrices(n, n))
    x = data.draw(matrices(n, 2))
    b = a @ x
    sol = linalg.solve_matrix(a, b)
    assert a @ sol == b


def _textbook_rref(rows):
    a = [list(r) for r in rows]
    piv, r = [], 0
    for c in range(len(a[0]) if a else 0):
        p = next((i for i in range(r, len(a)) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        a[r] = [v / a[r][c] for v in a[r]]
        for i in range(len(a)):
            if i != r and a[i][c] != 0:
                a[i] = [x - a[i][c] * y for x, y in zip(a[i], a[r])]
        piv.append(c)
        r += 1
    return a, piv


@given(st.integers(1, 5), st.integers(1, 6), st.data())
def test_sparse_exact_rref_is_the_reduced_form(r, c, data):
    m = data.draw(matrices(r, c))
    got, piv = linalg.rref(m)
    want, wpiv = _textbook_rref(m.data)
    assert piv == wpiv
    assert got == want
