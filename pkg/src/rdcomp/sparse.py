"""Compressed sparse row matrices and the direct solver for per-step systems."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.linalg


class SingularMatrixError(Exception):
    """The matrix is numerically singular (pivot below 1e-14 * max|A|)."""


PIVOT_RTOL = 1e-14


@dataclass
class TripletBuffer:
    """Accumulator of (row, col, value) contributions; duplicates allowed."""

    rows: list = field(default_factory=list)
    cols: list = field(default_factory=list)
    values: list = field(default_factory=list)

    def add(self, row, col, value):
        self.rows.append(row)
        self.cols.append(col)
        self.values.append(value)

    def extend(self, rows, cols, values):
        self.rows.extend(np.asarray(rows).ravel())
        self.cols.extend(np.asarray(cols).ravel())
        self.values.extend(np.asarray(values).ravel())

    def __len__(self):
        return len(self.rows)


@dataclass
class CsrMatrix:
    """Square CSR matrix: row offsets, sorted unique column indices, values."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @property
    def nnz(self):
        return len(self.data)

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        return self._scipy() @ x

    def to_dense(self):
        out = np.zeros((self.n, self.n))
        for i in range(self.n):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            out[i, self.indices[lo:hi]] = self.data[lo:hi]
        return out

    def copy(self):
        return CsrMatrix(self.n, self.indptr.copy(), self.indices.copy(), self.data.copy())

    def scaled(self, factor):
        return CsrMatrix(self.n, self.indptr, self.indices, self.data * factor)

    def add_same_pattern(self, other, factor=1.0):
        """Sum with a matrix that shares this sparsity pattern exactly."""
        if self.n != other.n or not np.array_equal(self.indices, other.indices) \
                or not np.array_equal(self.indptr, other.indptr):
            raise ValueError("sparsity patterns differ")
        return CsrMatrix(self.n, self.indptr, self.indices, self.data + factor * other.data)

    def _scipy(self):
        return scipy.sparse.csr_matrix(
            (self.data, self.indices, self.indptr), shape=(self.n, self.n)
        )


def csr_from_triplets(n, triplets) -> CsrMatrix:
    """Compress triplets into CSR, summing duplicates.

    Duplicate entries are summed in (row, col, value) sorted order, so the
    result is bitwise independent of the triplet ordering.
    """
    if isinstance(triplets, TripletBuffer):
        rows = np.asarray(triplets.rows, dtype=np.int64)
        cols = np.asarray(triplets.cols, dtype=np.int64)
        vals = np.asarray(triplets.values, dtype=float)
    else:
        rows, cols, vals = (np.asarray(a) for a in triplets)
        rows = rows.astype(np.int64, copy=False).ravel()
        cols = cols.astype(np.int64, copy=False).ravel()
        vals = vals.astype(float, copy=False).ravel()
    if len(rows) and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n):
        raise ValueError(f"triplet index out of range for dimension {n}")

    order = np.lexsort((vals, cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if len(rows):
        first = np.ones(len(rows), dtype=bool)
        first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(first)
        data = np.add.reduceat(vals, starts)
        out_rows = rows[starts]
        out_cols = cols[starts]
    else:
        data = np.empty(0)
        out_rows = np.empty(0, dtype=np.int64)
        out_cols = np.empty(0, dtype=np.int64)

    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, out_rows + 1, 1)
    np.cumsum(indptr, out=indptr)
    return CsrMatrix(n, indptr, out_cols, data)


def lu_solve(a: CsrMatrix, b) -> np.ndarray:
    """Solve A x = b by sparse LU with partial pivoting.

    Contract: relative residual ||Ax-b||/||b|| <= 1e-10 on well-conditioned
    finite element systems; raises SingularMatrixError otherwise.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (a.n,):
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({a.n},)")
    factor = lu_factor(a)
    return factor(b)


def lu_factor(a: CsrMatrix):
    """Factorize once; returns a callable solving A x = b for many b."""
    amax = np.abs(a.data).max() if a.nnz else 0.0
    try:
        lu = scipy.sparse.linalg.splu(a._scipy().tocsc())
    except RuntimeError as err:
        raise SingularMatrixError(str(err)) from err
    u_diag = np.abs(lu.U.diagonal())
    if a.n and (len(u_diag) < a.n or u_diag.min() < PIVOT_RTOL * amax):
        raise SingularMatrixError(
            f"pivot {u_diag.min() if len(u_diag) else 0.0:.3e} below "
            f"{PIVOT_RTOL:g} * max|A| = {PIVOT_RTOL * amax:.3e}"
        )

    def solve(b):
        return lu.solve(np.asarray(b, dtype=float))

    return solve
