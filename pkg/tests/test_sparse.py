import numpy as np
import pytest

from graphflow.errors import ShapeMismatch
from graphflow.sparse import SparseMatrix


def test_from_coo_sums_duplicates_and_sorts():
    m = SparseMatrix.from_coo(2, 3, [1, 0, 1, 1], [2, 1, 0, 2], [1.0, 2.0, 3.0, 4.0])
    assert m.row_offsets.tolist() == [0, 1, 3]
    assert m.col_indices.tolist() == [1, 0, 2]
    assert m.values.tolist() == [2.0, 3.0, 5.0]


def test_canonical_invariants_random():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(1, 30))
        k = int(rng.integers(0, 80))
        rows = rng.integers(0, n, size=k)
        cols = rng.integers(0, n, size=k)
        vals = rng.standard_normal(k)
        m = SparseMatrix.from_coo(n, n, rows, cols, vals)
        assert m.row_offsets[0] == 0 and m.row_offsets[-1] == m.nnz
        for i in range(n):
            ci = m.col_indices[m.row_offsets[i]:m.row_offsets[i + 1]]
            assert np.all(np.diff(ci) > 0)
        dense = np.zeros((n, n))
        np.add.at(dense, (rows, cols), vals)
        assert np.allclose(m.to_dense(), dense)


def test_matvec_matches_dense():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((7, 5))
    a[rng.random((7, 5)) < 0.5] = 0.0
    m = SparseMatrix.from_dense(a)
    x = rng.standard_normal(5)
    assert np.allclose(m @ x, a @ x)
    xmat = rng.standard_normal((5, 3))
    assert np.allclose(m @ xmat, a @ xmat)


def test_matmul_and_add():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((4, 6))
    b = rng.standard_normal((6, 3))
    ma, mb = SparseMatrix.from_dense(a), SparseMatrix.from_dense(b)
    assert np.allclose(ma.matmul_sparse(mb).to_dense(), a @ b)
    c = rng.standard_normal((4, 6))
    mc = SparseMatrix.from_dense(c)
    assert np.allclose(ma.add(mc, alpha=2.0, beta=-1.0).to_dense(), 2 * a - c)


def test_structural_equality():
    m1 = SparseMatrix.from_coo(2, 2, [0, 1], [1, 0], [1.0, 1.0])
    m2 = SparseMatrix.from_coo(2, 2, [1, 0], [0, 1], [1.0, 1.0])
    assert m1 == m2
    m3 = SparseMatrix.from_coo(2, 2, [0, 1], [1, 0], [1.0, 2.0])
    assert m1 != m3


def test_shape_errors():
    with pytest.raises(ShapeMismatch):
        SparseMatrix.from_coo(2, 2, [0], [3], [1.0])
    m = SparseMatrix.identity(3)
    with pytest.raises(ShapeMismatch):
        m @ np.ones(4)


def test_is_symmetric():
    sym = SparseMatrix.from_coo(3, 3, [0, 1, 1, 2], [1, 0, 2, 1], [1.0, 1.0, 2.0, 2.0])
    assert sym.is_symmetric()
    asym = SparseMatrix.from_coo(3, 3, [0, 1], [1, 2], [1.0, 1.0])
    assert not asym.is_symmetric()


def test_values_immutable():
    m = SparseMatrix.identity(2)
    with pytest.raises(ValueError):
        m.values[0] = 5.0
