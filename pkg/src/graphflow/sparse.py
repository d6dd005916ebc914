"""Compressed sparse row matrices in canonical form.

Canonical form means: within each row column indices are strictly
increasing, duplicates have been summed, and explicit zeros created by
duplicate summation are kept (structural equality is then well defined).
Instances are immutable; derived products return new instances.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ShapeMismatch


@dataclass(frozen=True)
class SparseMatrix:
    """A real matrix in canonical CSR form.

    Fields mirror the usual CSR layout: ``row_offsets`` has length
    ``n_rows + 1``, starts at 0 and ends at ``len(col_indices)``;
    ``values[row_offsets[i]:row_offsets[i+1]]`` are the entries of row i.
    """

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _csr_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        ro, ci, va = self.row_offsets, self.col_indices, self.values
        if len(ro) != self.n_rows + 1 or ro[0] != 0 or ro[-1] != len(ci):
            raise ShapeMismatch("row_offsets inconsistent with col_indices")
        if len(ci) != len(va):
            raise ShapeMismatch("col_indices and values differ in length")
        if len(ci) and (ci.min() < 0 or ci.max() >= self.n_cols):
            raise ShapeMismatch("column index out of range")
        if len(va) and not np.all(np.isfinite(va)):
            raise ValueError("non-finite value in sparse matrix")
        for arr in (ro, ci, va):
            arr.setflags(write=False)

    # -- constructors -------------------------------------------------

    @staticmethod
    def from_coo(n_rows, n_cols, rows, cols, vals) -> "SparseMatrix":
        """Build canonical CSR from COO triplets; duplicates are summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not (len(rows) == len(cols) == len(vals)):
            raise ShapeMismatch("COO arrays differ in length")
        if len(rows):
            order = np.lexsort((cols, rows))
            rows, cols, vals = rows[order], cols[order], vals[order]
            keep = np.ones(len(rows), dtype=bool)
            keep[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            group = np.cumsum(keep) - 1
            summed = np.zeros(int(group[-1]) + 1)
            np.add.at(summed, group, vals)
            rows, cols, vals = rows[keep], cols[keep], summed
        offsets = np.zeros(n_rows + 1, dtype=np.int64)
        np.add.at(offsets, rows + 1, 1)
        offsets = np.cumsum(offsets)
        return SparseMatrix(n_rows, n_cols, offsets, cols, vals)

    @staticmethod
    def from_dense(a) -> "SparseMatrix":
        a = np.asarray(a, dtype=np.float64)
        rows, cols = np.nonzero(a)
        return SparseMatrix.from_coo(a.shape[0], a.shape[1], rows, cols, a[rows, cols])

    @staticmethod
    def identity(n) -> "SparseMatrix":
        idx = np.arange(n, dtype=np.int64)
        return SparseMatrix.from_coo(n, n, idx, idx, np.ones(n))

    @staticmethod
    def from_scipy(m) -> "SparseMatrix":
        c = sp.csr_matrix(m)
        c.sum_duplicates()
        c.sort_indices()
        return SparseMatrix(
            c.shape[0],
            c.shape[1],
            c.indptr.astype(np.int64),
            c.indices.astype(np.int64),
            c.data.astype(np.float64),
        )

    # -- views --------------------------------------------------------

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    def row_index_of_entries(self) -> np.ndarray:
        """Row index of every stored entry (COO expansion of the rows)."""
        counts = np.diff(self.row_offsets)
        return np.repeat(np.arange(self.n_rows, dtype=np.int64), counts)

    def to_scipy(self) -> sp.csr_matrix:
        if "csr" not in self._csr_cache:
            self._csr_cache["csr"] = sp.csr_matrix(
                (self.values, self.col_indices, self.row_offsets),
                shape=(self.n_rows, self.n_cols),
            )
        return self._csr_cache["csr"]

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    # -- algebra ------------------------------------------------------

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Matrix times vector or dense matrix (column-wise)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.n_cols:
            raise ShapeMismatch(f"matvec: {self.shape} @ {x.shape}")
        return self.to_scipy() @ x

    def __matmul__(self, x):
        return self.matvec(x)

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix.from_scipy(self.to_scipy().T)

    def matmul_sparse(self, other: "SparseMatrix") -> "SparseMatrix":
        if self.n_cols != other.n_rows:
            raise ShapeMismatch(f"matmul: {self.shape} @ {other.shape}")
        return SparseMatrix.from_scipy(self.to_scipy() @ other.to_scipy())

    def add(self, other: "SparseMatrix", alpha=1.0, beta=1.0) -> "SparseMatrix":
        """alpha * self + beta * other."""
        if self.shape != other.shape:
            raise ShapeMismatch(f"add: {self.shape} + {other.shape}")
        return SparseMatrix.from_scipy(
            alpha * self.to_scipy() + beta * other.to_scipy()
        )

    def scale(self, alpha) -> "SparseMatrix":
        return SparseMatrix(
            self.n_rows,
            self.n_cols,
            self.row_offsets.copy(),
            self.col_indices.copy(),
            alpha * self.values,
        )

    def is_symmetric(self, tol=0.0) -> bool:
        if self.n_rows != self.n_cols:
            return False
        t = self.transpose()
        if not np.array_equal(t.row_offsets, self.row_offsets):
            return False
        if not np.array_equal(t.col_indices, self.col_indices):
            return False
        if tol == 0.0:
            return bool(np.array_equal(t.values, self.values))
        return bool(np.allclose(t.values, self.values, rtol=0.0, atol=tol))

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and np.array_equal(self.values, other.values)
        )
