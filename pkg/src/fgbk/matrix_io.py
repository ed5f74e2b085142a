"""MatrixMarket ingestion, seeded test problems and CSV report writers.

Random streams
--------------
Every random draw comes from numpy's ``PCG64`` bit generator seeded through
``SeedSequence(seed, spawn_key=(purpose,))``; normal deviates use numpy's
ziggurat ``standard_normal``. Both algorithms are published and numpy
guarantees their stream stability across platforms, so ``(m, n, seed)``
reproduces bit-identical matrices. Separate ``purpose`` keys keep the
matrix, the planted solution and randomized row sampling independent even
when they share a user-facing seed.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .errors import (
    CapabilityError,
    DegenerateProblemError,
    ParameterError,
    ParseError,
    UnsupportedFormatError,
)
from .linalg import DenseMatrix, SparseMatrixCsr

STREAM_MATRIX = 0
STREAM_PLANT = 1
STREAM_SAMPLING = 2

RESULT_COLUMNS = ("method", "matrix", "m", "n", "p", "eta", "iters", "cpu_seconds", "final_rse", "converged")
HISTORY_COLUMNS = ("k", "rse", "residual_norm", "block_size")

# Gram matrices larger than this are not factorized for the least-norm target.
LEAST_NORM_GRAM_CAP = 8000


def rng_stream(seed, purpose):
    """Independent, reproducible generator for ``(seed, purpose)``."""
    if seed < 0:
        raise ParameterError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(purpose),))))


# ---------------------------------------------------------------- MatrixMarket

_FIELDS = {"real", "integer", "pattern"}
_SYMMETRIES = {"general", "symmetric"}


def _parse_banner(line, path):
    tok = line.split()
    if len(tok) != 5 or tok[0].lower() != "%%matrixmarket":
        raise ParseError("missing or malformed %%MatrixMarket banner", line=1, path=path)
    obj, fmt, fld, sym = (t.lower() for t in tok[1:])
    if obj != "matrix":
        raise UnsupportedFormatError(f"object '{obj}' is not supported", line=1, path=path)
    if fmt not in ("coordinate", "array"):
        raise ParseError(f"unknown format '{fmt}'", line=1, path=path)
    if fld == "complex":
        raise UnsupportedFormatError("complex matrices are not supported", line=1, path=path)
    if fld not in _FIELDS:
        raise UnsupportedFormatError(f"field '{fld}' is not supported", line=1, path=path)
    if sym not in _SYMMETRIES:
        raise UnsupportedFormatError(f"symmetry '{sym}' is not supported", line=1, path=path)
    if fmt == "array" and fld == "pattern":
        raise ParseError("array format cannot have pattern field", line=1, path=path)
    return fmt, fld, sym


def _parse_numbers(lines, ncols, path):
    """Parse ``(lineno, text)`` pairs into a float array of shape (len, ncols)."""
    if not lines:
        return np.empty((0, ncols))
    try:
        flat = np.array(" ".join(t for _, t in lines).split(), dtype=np.float64)
        if flat.size == len(lines) * ncols:
            return flat.reshape(len(lines), ncols)
    except ValueError:
        pass
    # slow path: locate the offending line
    out = np.empty((len(lines), ncols))
    for j, (lineno, text) in enumerate(lines):
        tok = text.split()
        if len(tok) != ncols:
            raise ParseError(f"expected {ncols} fields, found {len(tok)}", line=lineno, path=path)
        try:
            out[j] = [float(t) for t in tok]
        except ValueError:
            raise ParseError(f"non-numeric entry '{text.strip()}'", line=lineno, path=path) from None
    return out


def read_matrix_market(path):
    """Read a MatrixMarket file into a :class:`SparseMatrixCsr`.

    Supports ``coordinate`` and ``array`` formats with ``real``, ``integer``
    or ``pattern`` (read as ones) fields, ``general`` or ``symmetric``
    storage. Symmetric files are expanded to explicit rows, duplicate
    coordinates are summed, and entries that end up zero are dropped.
    """
    path = Path(path)
    with open(path, "r") as fh:
        raw = fh.read().splitlines()
    if not raw:
        raise ParseError("empty file", line=1, path=path)
    fmt, fld, sym = _parse_banner(raw[0], path)

    body = [(i + 1, t) for i, t in enumerate(raw) if i > 0 and t.strip() and not t.lstrip().startswith("%")]
    if not body:
        raise ParseError("missing size line", line=len(raw), path=path)
    size_lineno, size_text = body[0]
    size_tok = size_text.split()
    want = 3 if fmt == "coordinate" else 2
    try:
        dims = [int(t) for t in size_tok]
    except ValueError:
        raise ParseError(f"malformed size line '{size_text.strip()}'", line=size_lineno, path=path) from None
    if len(dims) != want or min(dims) < 0:
        raise ParseError(f"size line must hold {want} non-negative integers", line=size_lineno, path=path)
    m, n = dims[0], dims[1]
    if sym == "symmetric" and m != n:
        raise ParseError("symmetric matrix must be square", line=size_lineno, path=path)
    entries = body[1:]

    if fmt == "coordinate":
        nnz = dims[2]
        if len(entries) != nnz:
            lineno = entries[nnz][0] if len(entries) > nnz else len(raw)
            raise ParseError(f"header declares {nnz} entries, found {len(entries)}", line=lineno, path=path)
        ncols = 2 if fld == "pattern" else 3
        data = _parse_numbers(entries, ncols, path)
        rows = data[:, 0]
        cols = data[:, 1]
        vals = np.ones(len(entries)) if fld == "pattern" else data[:, 2]
        bad = (rows < 1) | (rows > m) | (cols < 1) | (cols > n) | (rows != np.floor(rows)) | (cols != np.floor(cols))
        if np.any(bad):
            k = int(np.argmax(bad))
            raise ParseError("coordinate index out of range", line=entries[k][0], path=path)
        rows = rows.astype(np.int64) - 1
        cols = cols.astype(np.int64) - 1
        if sym == "symmetric":
            if np.any(cols > rows):
                k = int(np.argmax(cols > rows))
                raise ParseError("symmetric storage must list the lower triangle only", line=entries[k][0], path=path)
            off = rows != cols
            rows, cols, vals = (
                np.concatenate([rows, cols[off]]),
                np.concatenate([cols, rows[off]]),
                np.concatenate([vals, vals[off]]),
            )
    else:
        expected = m * n if sym == "general" else n * (n + 1) // 2
        if len(entries) != expected:
            lineno = entries[expected][0] if len(entries) > expected else len(raw)
            raise ParseError(f"array body must hold {expected} values, found {len(entries)}", line=lineno, path=path)
        vals = _parse_numbers(entries, 1, path)[:, 0]
        if sym == "general":
            # column-major order
            cols, rows = np.divmod(np.arange(m * n, dtype=np.int64), m)
        else:
            rr, cc = [], []
            for j in range(n):
                rr.extend(range(j, n))
                cc.extend([j] * (n - j))
            rows = np.asarray(rr, dtype=np.int64)
            cols = np.asarray(cc, dtype=np.int64)
            off = rows != cols
            rows, cols, vals = (
                np.concatenate([rows, cols[off]]),
                np.concatenate([cols, rows[off]]),
                np.concatenate([vals, vals[off]]),
            )
    if not np.all(np.isfinite(vals)):
        raise ParseError("non-finite matrix entry", path=path)
    return SparseMatrixCsr.from_coo(rows, cols, vals, (m, n))


def write_matrix_market(A, path, comment=None):
    """Write ``A`` as ``coordinate real general`` with round-trip exact values."""
    path = Path(path)
    S = A if isinstance(A, SparseMatrixCsr) else SparseMatrixCsr.from_dense(A.to_dense())
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            for line in str(comment).splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{S.m} {S.n} {S.nnz}\n")
        for i in range(S.m):
            cols, vals = S.row(i)
            for j, v in zip(cols, vals):
                fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")


# ------------------------------------------------------------- test problems

def gen_gaussian(m, n, seed):
    """``m x n`` matrix of i.i.d. standard normal entries, reproducible in ``seed``."""
    if m < 1 or n < 1:
        raise ParameterError(f"matrix dimensions must be positive, got {m}x{n}")
    g = rng_stream(seed, STREAM_MATRIX)
    return DenseMatrix(g.standard_normal((m, n)))


def least_norm_solution(A, b):
    """Minimum 2-norm solution ``A^+ b`` by a dense factorization.

    Small matrices go through an SVD least-squares solve. Otherwise the
    Gram matrix on the shorter side is factorized (Cholesky, falling back
    to SVD when it is not positive definite). Raises CapabilityError when
    that Gram matrix exceeds LEAST_NORM_GRAM_CAP.
    """
    m, n = A.shape
    b = np.asarray(b, dtype=np.float64)
    if m * n <= 1_000_000:
        return np.linalg.lstsq(A.to_dense(), b, rcond=None)[0]
    k = min(m, n)
    if k > LEAST_NORM_GRAM_CAP:
        raise CapabilityError(f"least-norm target needs a {k}x{k} Gram matrix (cap {LEAST_NORM_GRAM_CAP})")
    if isinstance(A, SparseMatrixCsr):
        S = A.to_scipy()
        G = (S @ S.T if m <= n else S.T @ S).toarray()
    else:
        E = A.entries
        G = E @ E.T if m <= n else E.T @ E
    rhs = b if m <= n else A.rmatvec(b)
    try:
        y = sla.cho_solve(sla.cho_factor(G, lower=True, check_finite=False), rhs, check_finite=False)
        if not np.all(np.isfinite(y)):
            raise np.linalg.LinAlgError("non-finite Cholesky solve")
    except (np.linalg.LinAlgError, sla.LinAlgError):
        y = sla.lstsq(G, rhs, check_finite=False)[0]
    return A.rmatvec(y) if m <= n else y


@dataclass
class ProblemInstance:
    """A consistent system ``A x = b`` built from a planted solution.

    ``x_star`` is the least-norm solution ``A^+ b`` (the limit of every
    method started from zero); ``x_plant`` is the drawn vector that produced
    ``b``. They coincide when ``A`` has full column rank. ``x_star`` is
    None when the instance is too large for a dense least-norm solve.
    """

    A: object
    b: np.ndarray
    x_star: np.ndarray | None
    x_plant: np.ndarray
    label: str = ""
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.A.shape

    def check_consistency(self):
        res = np.linalg.norm(self.b - self.A.matvec(self.x_plant))
        return res <= 1e-10 * (1.0 + np.linalg.norm(self.b))


def make_consistent_problem(A, seed, label="", x_plant=None, least_norm=True):
    """Plant a standard normal solution and form ``b = A x_plant``.

    With ``least_norm`` the target ``x_star`` is the projection of the plant
    onto the row space of ``A`` (computed as ``A^+ b``); if the dense solve
    is beyond :data:`LEAST_NORM_GRAM_CAP` the target is left as None and
    callers must stop on the relative residual.
    """
    if A.nnz == 0:
        raise DegenerateProblemError("coefficient matrix is identically zero")
    m, n = A.shape
    if x_plant is None:
        x_plant = rng_stream(seed, STREAM_PLANT).standard_normal(n)
    else:
        x_plant = np.asarray(x_plant, dtype=np.float64)
        if x_plant.shape != (n,):
            raise ParameterError(f"x_plant must have length {n}")
    b = A.matvec(x_plant)
    x_star = None
    if least_norm:
        try:
            x_star = least_norm_solution(A, b)
        except CapabilityError:
            x_star = None
    prob = ProblemInstance(A=A, b=b, x_star=x_star, x_plant=x_plant, label=label, seed=int(seed))
    if not prob.check_consistency():
        raise DegenerateProblemError("planted system is not consistent to 1e-10")
    return prob


# ------------------------------------------------------------------ CSV output

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def format_record(row, columns):
    """CSV field strings for ``row`` (a mapping or an object with ``to_record``)."""
    if hasattr(row, "to_record"):
        row = row.to_record()
    missing = [c for c in columns if c not in row]
    if missing:
        raise ParameterError(f"record lacks columns {missing}")
    return [_fmt(row[c]) for c in columns]


def write_csv(rows, path, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow(format_record(row, columns))


def write_report_csv(rows, path):
    """Write result records with the columns of :data:`RESULT_COLUMNS`."""
    write_csv(rows, path, RESULT_COLUMNS)


def write_history_csv(history, path):
    write_csv(history, path, HISTORY_COLUMNS)


def read_report_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
