import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fgbk.errors import DimensionError, IndexSetError, ParameterError
from fgbk.linalg import (
    DenseMatrix,
    SparseMatrixCsr,
    abs_power,
    as_matrix,
    extract_rows,
    row_norms,
    spmv,
    transpose_gather,
)

from conftest import random_sparse


def naive_matvec(a, x):
    m, n = a.shape
    return np.array([sum(a[i, j] * x[j] for j in range(n)) for i in range(m)])


@pytest.mark.parametrize("backend", [DenseMatrix, SparseMatrixCsr.from_dense])
class TestExamples:
    def test_spmv_identity(self, backend):
        assert np.array_equal(spmv(backend(np.eye(2)), np.array([3.0, -1.0])), [3.0, -1.0])

    def test_spmv_three_by_two(self, backend):
        A = backend([[1, 0], [0, 1], [1, 1]])
        assert np.array_equal(spmv(A, np.ones(2)), [1.0, 1.0, 2.0])

    def test_spmv_zero_vector(self, backend):
        A = backend(np.arange(12.0).reshape(4, 3) + 1)
        assert np.array_equal(spmv(A, np.zeros(3)), np.zeros(4))

    def test_spmv_dimension_error(self, backend):
        with pytest.raises(DimensionError):
            spmv(backend(np.eye(2)), np.ones(3))

    def test_transpose_gather_single_row(self, backend):
        A = backend([[1, 0], [0, 1], [1, 1]])
        assert np.array_equal(transpose_gather(A, [2], [2.0]), [2.0, 2.0])

    def test_transpose_gather_empty(self, backend):
        A = backend([[1, 0], [0, 1], [1, 1]])
        assert np.array_equal(transpose_gather(A, [], []), [0.0, 0.0])

    def test_transpose_gather_identity(self, backend):
        assert np.array_equal(transpose_gather(backend(np.eye(2)), [0, 1], [5.0, -1.0]), [5.0, -1.0])

    def test_transpose_gather_index_error(self, backend):
        with pytest.raises(IndexSetError):
            transpose_gather(backend(np.eye(2)), [2], [1.0])

    def test_row_norms_p2(self, backend):
        c = row_norms(backend([[1, 0], [0, 1], [1, 1]]), 2)
        assert np.array_equal(c.pnorms_p, [1, 1, 2])
        assert np.array_equal(c.sqnorms2, [1, 1, 2])
        assert c.frob_sq == 4.0

    def test_row_norms_p1(self, backend):
        c = row_norms(backend([[3.0, -4.0]]), 1)
        assert np.array_equal(c.pnorms_p, [7.0])
        assert np.array_equal(c.sqnorms2, [25.0])

    def test_row_norms_zero_row(self, backend):
        c = row_norms(backend([[0.0, 0.0], [1.0, 2.0]]), 3)
        assert c.pnorms_p[0] == 0.0 and c.pnorms_p[1] == 9.0

    def test_row_norms_rejects_small_p(self, backend):
        with pytest.raises(ParameterError):
            row_norms(backend(np.eye(2)), 0.5)

    def test_extract_rows(self, backend):
        A = backend([[1, 0], [0, 1], [1, 1]])
        assert np.array_equal(extract_rows(A, [2]).to_dense(), [[1.0, 1.0]])
        assert np.array_equal(extract_rows(A, [0, 1, 2]).to_dense(), A.to_dense())
        assert np.array_equal(extract_rows(backend(np.eye(2)), [1]).to_dense(), [[0.0, 1.0]])

    @pytest.mark.parametrize("bad", [[1, 0], [0, 0], [3], [-1]])
    def test_extract_rows_rejects(self, backend, bad):
        with pytest.raises(IndexSetError):
            extract_rows(backend([[1, 0], [0, 1], [1, 1]]), bad)


def test_csr_prunes_zeros_and_sums_duplicates():
    S = SparseMatrixCsr.from_coo([0, 0, 1, 1], [0, 0, 1, 0], [2.0, -2.0, 3.0, 0.0], (2, 2))
    assert S.nnz == 1
    assert np.array_equal(S.to_dense(), [[0, 0], [0, 3]])
    c = S.row_norms(2)
    assert c.pnorms_p[0] == 0.0


def test_csr_canonical_invariants():
    rng = np.random.default_rng(0)
    a = random_sparse(rng, 30, 20, 0.2)
    S = SparseMatrixCsr.from_dense(a)
    assert S.row_ptr[0] == 0 and S.row_ptr[-1] == S.nnz
    assert np.all(np.diff(S.row_ptr) >= 0)
    for i in range(S.m):
        cols, vals = S.row(i)
        assert np.all(np.diff(cols) > 0)
        assert np.all(vals != 0)


@pytest.mark.parametrize(
    "args",
    [
        (2, 2, [0, 1, 1], [0, 0], [1.0, 0.0]),  # explicit zero
        (2, 2, [0, 2, 2], [1, 0], [1.0, 1.0]),  # unsorted columns in a row
        (2, 2, [0, 1, 2], [0, 2], [1.0, 1.0]),  # column out of range
        (2, 2, [1, 1, 2], [0, 1], [1.0, 1.0]),  # row_ptr must start at 0
        (2, 2, [0, 1], [0], [1.0]),  # row_ptr length
    ],
)
def test_csr_constructor_rejects_noncanonical(args):
    with pytest.raises((DimensionError, IndexSetError, ParameterError)):
        SparseMatrixCsr(*args)


def test_dense_rejects_nonfinite():
    with pytest.raises(ParameterError):
        DenseMatrix([[1.0, np.nan]])


def test_as_matrix_wraps_scipy_and_numpy():
    import scipy.sparse as sp

    assert isinstance(as_matrix(np.eye(2)), DenseMatrix)
    assert isinstance(as_matrix(sp.eye(3, format="csc")), SparseMatrixCsr)


def test_abs_power_matches_pow():
    v = np.array([-2.0, 0.0, 0.5, 3.0])
    for p in (1, 2, 3, 1.5, 4.25):
        assert np.allclose(abs_power(v, p), np.abs(v) ** p, rtol=1e-15, atol=0)


def test_spmv_naive_oracle():
    a = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    x = np.array([0.5, -2.0])
    for A in (DenseMatrix(a), SparseMatrixCsr.from_dense(a)):
        assert np.allclose(spmv(A, x), naive_matvec(a, x), rtol=1e-15)


shapes = st.tuples(st.integers(1, 200), st.integers(1, 200))


@settings(max_examples=40)
@given(shape=shapes, density=st.floats(0.0, 1.0), seed=st.integers(0, 2**32 - 1))
def test_csr_spmv_matches_dense(shape, density, seed):
    rng = np.random.default_rng(seed)
    a = random_sparse(rng, *shape, density)
    x = rng.standard_normal(shape[1])
    got = SparseMatrixCsr.from_dense(a).matvec(x)
    want = a @ x
    assert np.linalg.norm(got - want) <= 1e-12 * max(1.0, np.linalg.norm(want))


@settings(max_examples=40)
@given(shape=shapes, density=st.floats(0.0, 1.0), seed=st.integers(0, 2**32 - 1))
def test_transpose_gather_matches_dense(shape, density, seed):
    rng = np.random.default_rng(seed)
    m, n = shape
    a = random_sparse(rng, m, n, density)
    idx = np.flatnonzero(rng.random(m) < 0.4)
    coeffs = rng.standard_normal(idx.size)
    xi = np.zeros(m)
    xi[idx] = coeffs
    want = a.T @ xi
    for A in (DenseMatrix(a), SparseMatrixCsr.from_dense(a)):
        got = A.transpose_gather(idx, coeffs)
        assert np.linalg.norm(got - want) <= 1e-12 * max(1.0, np.linalg.norm(want))


@given(shape=st.tuples(st.integers(1, 40), st.integers(1, 40)), seed=st.integers(0, 2**32 - 1))
def test_p2_norms_equal_squared_norms(shape, seed):
    a = np.random.default_rng(seed).standard_normal(shape)
    for A in (DenseMatrix(a), SparseMatrixCsr.from_dense(a)):
        c = A.row_norms(2)
        assert np.array_equal(c.pnorms_p, c.sqnorms2)
        assert abs(c.frob_sq - c.sqnorms2.sum()) <= 1e-12 * c.frob_sq


@given(
    shape=st.tuples(st.integers(1, 40), st.integers(1, 40)),
    p=st.sampled_from([1.0, 1.5, 2.0, 3.0, 7.5]),
    seed=st.integers(0, 2**32 - 1),
)
def test_row_norms_match_definition(shape, p, seed):
    rng = np.random.default_rng(seed)
    a = random_sparse(rng, *shape, 0.5)
    want = np.array([sum(abs(v) ** p for v in row) for row in a])
    for A in (DenseMatrix(a), SparseMatrixCsr.from_dense(a)):
        c = A.row_norms(p)
        assert np.allclose(c.pnorms_p, want, rtol=1e-12, atol=0)
        assert np.all((c.pnorms_p == 0) == ~a.any(axis=1))


@given(shape=st.tuples(st.integers(1, 60), st.integers(1, 60)), seed=st.integers(0, 2**32 - 1))
def test_frobenius_bounds_matvec(shape, seed):
    rng = np.random.default_rng(seed)
    A = DenseMatrix(rng.standard_normal(shape))
    x = rng.standard_normal(shape[1])
    y = A.matvec(x)
    assert y @ y <= A.row_norms(2).frob_sq * (x @ x) * (1 + 1e-12)
