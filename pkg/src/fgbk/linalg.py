"""Dense and CSR matrix storage with the row-oriented kernels the solvers use.

Both backends expose the same small surface (``matvec``, ``transpose_gather``,
``row_norms``, ``extract_rows``, ``to_dense``) so the iteration code never
branches on storage. All arithmetic is float64.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, IndexSetError, ParameterError


def abs_power(v, p):
    """|v|**p elementwise; integer exponents 1, 2, 3 use plain multiplication."""
    a = np.abs(np.asarray(v, dtype=np.float64))
    if p == 1:
        return a
    if p == 2:
        return a * a
    if p == 3:
        return a * a * a
    return np.power(a, p)


@dataclass(frozen=True)
class RowNormCache:
    """Per-row norms backing every greedy selection rule.

    ``pnorms_p[i]`` is ``||A_i||_p ** p``, ``sqnorms2[i]`` is ``||A_i||_2 ** 2``.
    """

    p: float
    pnorms_p: np.ndarray
    sqnorms2: np.ndarray
    frob_sq: float

    @property
    def m(self):
        return self.pnorms_p.shape[0]

    @cached_property
    def sampling_cdf(self):
        """Cumulative squared row norms, for sampling rows proportionally to them."""
        return np.cumsum(self.sqnorms2)

    def pnorms_sq(self):
        """Squared p-norms ``||A_i||_p ** 2`` of every row."""
        if self.p == 2:
            return self.pnorms_p.copy()
        return np.power(self.pnorms_p, 2.0 / self.p)


def _check_p(p):
    if not np.isfinite(p) or p < 1:
        raise ParameterError(f"norm exponent p must be >= 1, got {p}")


def _check_indices(indices, m):
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size == 0:
        return idx
    if idx.min() < 0 or idx.max() >= m:
        raise IndexSetError(f"row index out of range [0, {m})")
    if np.any(np.diff(idx) <= 0):
        raise IndexSetError("row indices must be sorted and unique")
    return idx


def _gather_args(m, indices, coeffs):
    idx = np.asarray(indices, dtype=np.int64).ravel()
    c = np.asarray(coeffs, dtype=np.float64).ravel()
    if idx.shape != c.shape:
        raise DimensionError(f"{idx.size} indices but {c.size} coefficients")
    if idx.size and (idx.min() < 0 or idx.max() >= m):
        raise IndexSetError(f"row index out of range [0, {m})")
    if not np.all(np.isfinite(c)):
        raise ParameterError("transpose_gather coefficients must be finite")
    return idx, c


class DenseMatrix:
    """Row-major dense matrix."""

    def __init__(self, entries):
        a = np.ascontiguousarray(entries, dtype=np.float64)
        if a.ndim != 2:
            raise DimensionError(f"expected a 2-D array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ParameterError("matrix entries must be finite")
        a.setflags(write=False)
        self.entries = a

    @property
    def m(self):
        return self.entries.shape[0]

    @property
    def n(self):
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    @property
    def nnz(self):
        return int(np.count_nonzero(self.entries))

    def matvec(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise DimensionError(f"x has shape {x.shape}, expected ({self.n},)")
        return self.entries @ x

    def rmatvec(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.m,):
            raise DimensionError(f"y has shape {y.shape}, expected ({self.m},)")
        return self.entries.T @ y

    def transpose_gather(self, indices, coeffs):
        idx, c = _gather_args(self.m, indices, coeffs)
        if idx.size == 0:
            return np.zeros(self.n)
        return c @ self.entries[idx]

    def row(self, i):
        """(column indices, values) of the stored entries of row ``i``."""
        r = self.entries[i]
        cols = np.flatnonzero(r)
        return cols, r[cols]

    def row_norms(self, p):
        _check_p(p)
        sq = np.einsum("ij,ij->i", self.entries, self.entries)
        pn = sq.copy() if p == 2 else abs_power(self.entries, p).sum(axis=1)
        return RowNormCache(p=float(p), pnorms_p=pn, sqnorms2=sq, frob_sq=float(sq.sum()))

    def extract_rows(self, indices):
        idx = _check_indices(indices, self.m)
        return DenseMatrix(self.entries[idx])

    def to_dense(self):
        return self.entries.copy()

    def scaled(self, c):
        return DenseMatrix(c * self.entries)

    def __repr__(self):
        return f"DenseMatrix(m={self.m}, n={self.n})"


class SparseMatrixCsr:
    """Compressed sparse row matrix with canonical storage.

    Column indices are strictly increasing within each row and no stored
    value is exactly zero. Use :meth:`from_coo` to build one from triplets
    (duplicates summed, zeros pruned).
    """

    def __init__(self, m, n, row_ptr, col_idx, values):
        self.m = int(m)
        self.n = int(n)
        self.row_ptr = np.ascontiguousarray(row_ptr, dtype=np.int64)
        self.col_idx = np.ascontiguousarray(col_idx, dtype=np.int64)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self._validate()
        for a in (self.row_ptr, self.col_idx, self.values):
            a.setflags(write=False)
        self._row_of = np.repeat(np.arange(self.m, dtype=np.int64), np.diff(self.row_ptr))
        self._csr = sp.csr_matrix((self.values, self.col_idx, self.row_ptr), shape=(self.m, self.n))

    def _validate(self):
        m, n = self.m, self.n
        rp, ci, v = self.row_ptr, self.col_idx, self.values
        if m < 0 or n < 0:
            raise DimensionError("negative matrix dimension")
        if rp.shape != (m + 1,):
            raise DimensionError(f"row_ptr must have length m+1={m + 1}")
        if rp[0] != 0 or np.any(np.diff(rp) < 0) or rp[-1] != ci.size:
            raise DimensionError("row_ptr must start at 0, be non-decreasing and end at nnz")
        if ci.shape != v.shape:
            raise DimensionError("col_idx and values differ in length")
        if ci.size:
            if ci.min() < 0 or ci.max() >= n:
                raise IndexSetError(f"column index out of range [0, {n})")
            # strictly increasing within each row: a drop is allowed only at row starts
            d = np.diff(ci)
            row_start = np.zeros(ci.size, dtype=bool)
            row_start[rp[1:-1][rp[1:-1] < ci.size]] = True
            if np.any((d <= 0) & ~row_start[1:]):
                raise IndexSetError("column indices must be strictly increasing within each row")
        if not np.all(np.isfinite(v)):
            raise ParameterError("matrix entries must be finite")
        if np.any(v == 0.0):
            raise ParameterError("explicit zeros must be pruned; build with from_coo()")

    @classmethod
    def from_coo(cls, rows, cols, vals, shape):
        m, n = shape
        coo = sp.coo_matrix(
            (np.asarray(vals, dtype=np.float64), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
            shape=(m, n),
        )
        csr = coo.tocsr()
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        return cls(m, n, csr.indptr, csr.indices, csr.data)

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=np.float64)
        r, c = np.nonzero(a)
        return cls.from_coo(r, c, a[r, c], a.shape)

    @classmethod
    def from_scipy(cls, s):
        coo = sp.coo_matrix(s)
        return cls.from_coo(coo.row, coo.col, coo.data, coo.shape)

    @property
    def shape(self):
        return (self.m, self.n)

    @property
    def nnz(self):
        return int(self.values.size)

    def matvec(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise DimensionError(f"x has shape {x.shape}, expected ({self.n},)")
        return self._csr @ x

    def rmatvec(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.m,):
            raise DimensionError(f"y has shape {y.shape}, expected ({self.m},)")
        return self._csr.T @ y

    def transpose_gather(self, indices, coeffs):
        idx, c = _gather_args(self.m, indices, coeffs)
        if idx.size == 0:
            return np.zeros(self.n)
        starts = self.row_ptr[idx]
        lengths = self.row_ptr[idx + 1] - starts
        total = int(lengths.sum())
        if total == 0:
            return np.zeros(self.n)
        # positions of every stored entry in the touched rows, without a Python loop
        offsets = np.repeat(starts - (np.cumsum(lengths) - lengths), lengths)
        pos = offsets + np.arange(total)
        w = self.values[pos] * np.repeat(c, lengths)
        return np.bincount(self.col_idx[pos], weights=w, minlength=self.n)

    def row(self, i):
        a, b = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_idx[a:b], self.values[a:b]

    def row_norms(self, p):
        _check_p(p)
        v = self.values
        sq = np.bincount(self._row_of, weights=v * v, minlength=self.m)
        pn = sq.copy() if p == 2 else np.bincount(self._row_of, weights=abs_power(v, p), minlength=self.m)
        return RowNormCache(p=float(p), pnorms_p=pn, sqnorms2=sq, frob_sq=float(sq.sum()))

    def extract_rows(self, indices):
        idx = _check_indices(indices, self.m)
        sub = self._csr[idx]
        return SparseMatrixCsr(len(idx), self.n, sub.indptr, sub.indices, sub.data)

    def to_dense(self):
        return self._csr.toarray()

    def to_scipy(self):
        return self._csr.copy()

    def scaled(self, c):
        if c == 0:
            return SparseMatrixCsr(self.m, self.n, np.zeros(self.m + 1), [], [])
        return SparseMatrixCsr(self.m, self.n, self.row_ptr, self.col_idx, c * self.values)

    def __repr__(self):
        return f"SparseMatrixCsr(m={self.m}, n={self.n}, nnz={self.nnz})"


def as_matrix(a):
    """Wrap a numpy array or scipy sparse matrix in the package's matrix types."""
    if isinstance(a, (DenseMatrix, SparseMatrixCsr)):
        return a
    if sp.issparse(a):
        return SparseMatrixCsr.from_scipy(a)
    return DenseMatrix(a)


def spmv(A, x):
    """Return ``A @ x``."""
    return A.matvec(x)


def transpose_gather(A, indices, coeffs):
    """Return ``sum_j coeffs[j] * A[indices[j], :]``.

    Only the listed rows are read, so the cost scales with their stored
    entries rather than with the whole matrix.
    """
    return A.transpose_gather(indices, coeffs)


def row_norms(A, p):
    return A.row_norms(p)


def extract_rows(A, indices):
    return A.extract_rows(indices)
