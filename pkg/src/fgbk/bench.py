"""Experiment batches, eta sweeps and matrix summaries.

Experiment spec files are flat ``key = value`` text; ``#`` starts a comment
and ``problem``/``method`` may repeat::

    tol = 1e-6
    max_iters = 10000
    repetitions = 1
    workers = 1
    history_dir = histories        # optional, one CSV per run
    problem = gaussian 500x1000 seed=1 label=g1
    problem = file matrices/bibd_16_8.mtx seed=0
    method = gbk
    method = fdbk
    method = fgbk p=1 eta=0.1
    method = fgbk p=2 eta=sweep grid=0.05:0.05:1.0

Relative paths resolve against the experiment file's directory. Repetition ``r``
of a problem with seed ``s`` uses seed ``s + r`` for both the Gaussian
matrix and the planted solution.
"""
from __future__ import annotations

import logging
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import KaczmarzError, ParameterError, ParseError, SweepFailure
from .linalg import SparseMatrixCsr
from .matrix_io import gen_gaussian, make_consistent_problem, read_matrix_market, write_history_csv
from .solvers import METHODS, SolverConfig, solve
from .theory import DENSE_CAP, numerical_rank, singular_values

log = logging.getLogger(__name__)

DEFAULT_GRID = tuple(round(0.05 * i, 2) for i in range(1, 21))


@dataclass
class ResultRow:
    method: str
    matrix: str
    m: int
    n: int
    p: float | None
    eta: float | None
    iters: int
    cpu_seconds: float
    final_rse: float | None
    converged: bool
    note: str = ""

    def to_record(self):
        return {
            "method": self.method,
            "matrix": self.matrix,
            "m": self.m,
            "n": self.n,
            "p": self.p,
            "eta": self.eta,
            "iters": self.iters,
            "cpu_seconds": self.cpu_seconds,
            "final_rse": self.final_rse,
            "converged": self.converged,
        }


@dataclass
class ProblemSpec:
    kind: str  # "gaussian" | "file"
    label: str
    seed: int = 0
    m: int = 0
    n: int = 0
    path: Path | None = None


@dataclass
class MethodSpec:
    method: str
    p: float | None = None
    eta: float | None = None
    sweep: bool = False
    grid: tuple = DEFAULT_GRID


@dataclass
class ExperimentSpec:
    problems: list
    methods: list
    tol: float = 1e-6
    max_iters: int = 10000
    repetitions: int = 1
    workers: int = 1
    history_dir: Path | None = None
    out: Path | None = None

    def validate(self):
        if not self.problems:
            raise ParameterError("experiment spec lists no problems")
        if not self.methods:
            raise ParameterError("experiment spec lists no methods")
        if self.repetitions < 1:
            raise ParameterError("repetitions must be >= 1")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")


@dataclass
class MatrixInfo:
    m: int
    n: int
    nnz: int
    density: float
    rank: int | None = None
    cond: float | None = None


# ----------------------------------------------------------------- parsing

def parse_grid(text):
    """``lo:step:hi`` -> ascending tuple of grid values (inclusive of hi)."""
    try:
        lo, step, hi = (float(t) for t in text.split(":"))
    except ValueError:
        raise ParameterError(f"grid must be lo:step:hi, got '{text}'") from None
    if step <= 0 or lo <= 0 or hi > 1 or lo > hi:
        raise ParameterError(f"grid {text} must satisfy 0 < lo <= hi <= 1 and step > 0")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return tuple(round(lo + i * step, 10) for i in range(count))


def parse_shape(text):
    try:
        m, n = text.lower().split("x")
        return int(m), int(n)
    except ValueError:
        raise ParameterError(f"shape must look like MxN, got '{text}'") from None


def _options(tokens, lineno, path):
    opts = {}
    for tok in tokens:
        if "=" not in tok:
            raise ParseError(f"expected key=value, got '{tok}'", line=lineno, path=path)
        k, v = tok.split("=", 1)
        opts[k.strip()] = v.strip()
    return opts


def _parse_problem(value, lineno, path, base):
    tok = value.split()
    if len(tok) < 2:
        raise ParseError("problem needs a kind and an argument", line=lineno, path=path)
    kind, arg, opts = tok[0], tok[1], _options(tok[2:], lineno, path)
    seed = int(opts.pop("seed", 0))
    label = opts.pop("label", None)
    if opts:
        raise ParseError(f"unknown problem options {sorted(opts)}", line=lineno, path=path)
    if kind == "gaussian":
        m, n = parse_shape(arg)
        return ProblemSpec("gaussian", label or f"gaussian_{m}x{n}_s{seed}", seed=seed, m=m, n=n)
    if kind == "file":
        p = Path(arg)
        if not p.is_absolute():
            p = base / p
        return ProblemSpec("file", label or p.stem, seed=seed, path=p)
    raise ParseError(f"unknown problem kind '{kind}'", line=lineno, path=path)


def _parse_method(value, lineno, path):
    tok = value.split()
    if not tok or tok[0] not in METHODS:
        raise ParseError(f"method must be one of {METHODS}", line=lineno, path=path)
    name, opts = tok[0], _options(tok[1:], lineno, path)
    spec = MethodSpec(name)
    try:
        if name == "fgbk":
            spec.p = float(opts.pop("p", 1.0))
            eta = opts.pop("eta", "0.1")
            if eta == "sweep":
                spec.sweep = True
            else:
                spec.eta = float(eta)
            if "grid" in opts:
                spec.grid = parse_grid(opts.pop("grid"))
    except (ValueError, ParameterError) as exc:
        raise ParseError(str(exc), line=lineno, path=path) from None
    if opts:
        raise ParseError(f"unknown options {sorted(opts)} for method {name}", line=lineno, path=path)
    return spec


def parse_experiment_spec(text, path=None):
    """Parse the key-value experiment format described in the module docstring."""
    base = Path(path).parent if path is not None else Path.cwd()
    spec = ExperimentSpec(problems=[], methods=[])
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got '{line}'", line=lineno, path=path)
        key, value = (t.strip() for t in line.split("=", 1))
        try:
            if key == "problem":
                spec.problems.append(_parse_problem(value, lineno, path, base))
            elif key == "method":
                spec.methods.append(_parse_method(value, lineno, path))
            elif key == "tol":
                spec.tol = float(value)
            elif key == "max_iters":
                spec.max_iters = int(value)
            elif key == "repetitions":
                spec.repetitions = int(value)
            elif key == "workers":
                spec.workers = int(value)
            elif key == "history_dir":
                spec.history_dir = base / value
            elif key == "out":
                spec.out = base / value
            else:
                raise ParseError(f"unknown key '{key}'", line=lineno, path=path)
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"bad value for '{key}': {value}", line=lineno, path=path) from None
    return spec


def load_experiment_spec(path):
    path = Path(path)
    return parse_experiment_spec(path.read_text(), path)


# ------------------------------------------------------------------ running

@lru_cache(maxsize=2)
def _read_cached(path):
    return read_matrix_market(path)


def build_problem(ps, rep=0):
    seed = ps.seed + rep
    if ps.kind == "gaussian":
        A = gen_gaussian(ps.m, ps.n, seed)
    else:
        A = _read_cached(str(ps.path))
    return make_consistent_problem(A, seed, label=ps.label)


def _config(problem, method, p=None, eta=None, tol=1e-6, max_iters=10000, record_history=False, seed=0):
    kw = dict(
        method=method,
        tol=tol,
        max_iters=max_iters,
        record_history=record_history,
        seed=seed,
        stop_mode="rse_known_solution" if problem.x_star is not None else "relative_residual",
    )
    if method == "fgbk":
        kw.update(p=p, eta=eta)
    return SolverConfig(**kw)


def _row(problem, method, p, eta, report):
    return ResultRow(
        method=method,
        matrix=problem.label,
        m=problem.A.m,
        n=problem.A.n,
        p=p,
        eta=eta,
        iters=report.iters,
        cpu_seconds=report.cpu_seconds,
        final_rse=report.final_rse,
        converged=report.converged,
    )


def run_one(problem, method, p=None, eta=None, tol=1e-6, max_iters=10000, history_path=None, seed=0):
    """Solve once and return a ResultRow; failures become ``converged=False`` rows."""
    if method != "fgbk":
        p = eta = None
    try:
        cfg = _config(problem, method, p, eta, tol, max_iters, history_path is not None, seed)
        report = solve(problem, cfg)
    except KaczmarzError as exc:
        log.warning("%s on %s failed: %s", method, problem.label, exc)
        return ResultRow(method, problem.label, problem.A.m, problem.A.n, p, eta, 0, 0.0, None, False, note=str(exc))
    if history_path is not None:
        write_history_csv(report.history, history_path)
    return _row(problem, method, p, eta, report)


def sweep_eta(problem, p, grid=DEFAULT_GRID, method="fgbk", tol=1e-6, max_iters=10000):
    """Run FGBK once per grid value and pick the eta with the fewest iterations.

    Returns ``(eta_exp, rows)``. Only converged runs compete; ties go to the
    smaller eta. Raises :class:`SweepFailure` when no grid value converges.
    """
    if method != "fgbk":
        raise ParameterError("eta sweeps apply to fgbk only")
    grid = tuple(float(g) for g in grid)
    if not grid:
        raise ParameterError("empty eta grid")
    if any(not (0 < g <= 1) for g in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ParameterError("eta grid must be strictly ascending within (0, 1]")
    rows = [run_one(problem, "fgbk", p, eta, tol, max_iters) for eta in grid]
    best = None
    for row in rows:
        if row.converged and (best is None or row.iters < best.iters):
            best = row
    if best is None:
        raise SweepFailure(f"no eta in the grid converged on {problem.label} (p={p})")
    return best.eta, rows


def _history_path(spec, problem_label, ms, rep):
    if spec.history_dir is None:
        return None
    spec.history_dir.mkdir(parents=True, exist_ok=True)
    tag = ms.method if ms.method != "fgbk" else f"fgbk_p{ms.p:g}"
    return spec.history_dir / f"{problem_label}_{tag}_r{rep}.csv"


def _run_problem(spec, ps):
    rows = []
    per_method = {}
    for rep in range(spec.repetitions):
        try:
            problem = build_problem(ps, rep)
        except (KaczmarzError, OSError) as exc:
            log.warning("problem %s could not be built: %s", ps.label, exc)
            for ms in spec.methods:
                rows.append(ResultRow(ms.method, ps.label, ps.m, ps.n, ms.p, ms.eta, 0, 0.0, None, False, note=str(exc)))
            continue
        for j, ms in enumerate(spec.methods):
            eta = ms.eta
            if ms.sweep:
                try:
                    eta, _ = sweep_eta(problem, ms.p, ms.grid, tol=spec.tol, max_iters=spec.max_iters)
                except SweepFailure as exc:
                    rows.append(ResultRow(ms.method, problem.label, problem.A.m, problem.A.n, ms.p, None, 0, 0.0, None, False, note=str(exc)))
                    continue
            row = run_one(problem, ms.method, ms.p, eta, spec.tol, spec.max_iters, _history_path(spec, problem.label, ms, rep), seed=ps.seed + rep)
            rows.append(row)
            per_method.setdefault(j, []).append(row)
    if spec.repetitions > 1:
        for j, ms in enumerate(spec.methods):
            runs = per_method.get(j, [])
            if not runs:
                continue
            first = runs[0]
            rows.append(
                ResultRow(
                    method=f"{ms.method}/median",
                    matrix=ps.label,
                    m=first.m,
                    n=first.n,
                    p=first.p,
                    eta=first.eta if not ms.sweep else None,
                    iters=int(round(statistics.median(r.iters for r in runs))),
                    cpu_seconds=statistics.median(r.cpu_seconds for r in runs),
                    final_rse=None,
                    converged=all(r.converged for r in runs),
                )
            )
    return rows


def run_experiment(spec):
    """Run every problem x method x repetition in ``spec``.

    Rows come back in spec order whatever the worker count. With more than
    one repetition each method also gets a ``<method>/median`` row.
    """
    spec.validate()
    if spec.workers == 1:
        chunks = [_run_problem(spec, ps) for ps in spec.problems]
    else:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            chunks = list(pool.map(lambda ps: _run_problem(spec, ps), spec.problems))
    return [row for chunk in chunks for row in chunk]


# ------------------------------------------------------------------ info

def matrix_info(A):
    """Size, density and (for matrices with a short side <= 1000) rank and cond.

    Matrices within the dense cap use a full SVD. Otherwise the spectrum
    comes from the Gram matrix on the short side, whose eigenvalues are the
    squared singular values; this resolves condition numbers up to about
    1e7, which covers the collection matrices it is meant for.
    """
    m, n = A.shape
    nnz = A.nnz
    info = MatrixInfo(m=m, n=n, nnz=nnz, density=nnz / (m * n) if m * n else 0.0)
    if max(m, n) <= DENSE_CAP:
        s = singular_values(A)
        r = numerical_rank(s, (m, n))
    elif min(m, n) <= DENSE_CAP:
        s = _gram_singular_values(A)
        # Gram eigenvalues carry absolute error ~ eps * sigma_max^2
        tol = np.sqrt(min(m, n) * np.finfo(np.float64).eps) * s[0] if s.size else 0.0
        r = int(np.count_nonzero(s > tol))
    else:
        return info
    info.rank = r
    info.cond = float(s[0] / s[r - 1]) if r else None
    return info


def _gram_singular_values(A):
    m, n = A.shape
    if isinstance(A, SparseMatrixCsr):
        S = A.to_scipy()
        G = (S @ S.T if m <= n else S.T @ S).toarray()
    else:
        E = A.entries
        G = E @ E.T if m <= n else E.T @ E
    ev = np.linalg.eigvalsh(G)[::-1]
    return np.sqrt(np.clip(ev, 0.0, None))
