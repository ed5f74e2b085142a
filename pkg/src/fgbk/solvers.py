"""Iteration engines and the shared solve driver.

Block methods (FGBK, FDBK) take the averaged step

    x <- x + (xi^T r / ||A^T xi||^2) A^T xi,    xi = sum_{i in block} r_i e_i,

which never forms a pseudoinverse. GBK projects onto the selected block with
a minimum-norm least-squares solve. The classical cyclic and randomized
Kaczmarz methods are single-row baselines.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, InconsistentSystemError, ParameterError, SolverFailure
from .matrix_io import STREAM_SAMPLING, rng_stream
from .selection import (
    ControlSet,
    build_xi,
    check_eta_p,
    fdbk_control_set,
    fgbk_control_set,
    gbk_control_set,
)

METHODS = ("fgbk", "fdbk", "gbk", "kaczmarz", "rk")
BLOCK_METHODS = ("fgbk", "fdbk", "gbk")
STOP_MODES = ("rse_known_solution", "relative_residual")

DRIFT_TOL = 1e-8


@dataclass
class SolverConfig:
    method: str = "fgbk"
    p: float = 1.0
    eta: float = 0.1
    tol: float = 1e-6
    max_iters: int = 10000
    refresh_every: int = 50
    seed: int = 0
    stop_mode: str = "rse_known_solution"
    record_history: bool = False
    dense_block_cap: int = 200
    ls_tol: float = 1e-12

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown method '{self.method}', expected one of {METHODS}")
        if self.stop_mode not in STOP_MODES:
            raise ParameterError(f"unknown stop_mode '{self.stop_mode}'")
        if self.method == "fgbk":
            check_eta_p(self.eta, self.p)
        if not self.tol > 0:
            raise ParameterError("tol must be positive")
        if self.max_iters < 0:
            raise ParameterError("max_iters must be non-negative")
        if self.refresh_every < 1:
            raise ParameterError("refresh_every must be >= 1")

    @property
    def norm_p(self):
        """Exponent of the row-norm cache this method needs."""
        return self.p if self.method == "fgbk" else 2.0


@dataclass
class IterationState:
    """Mutable solver state. ``r`` tracks ``b - A x``; single-row methods let it
    go stale between refreshes (``r_stale``) and read residual entries directly."""

    x: np.ndarray
    r: np.ndarray
    b: np.ndarray
    k: int = 0
    last_control: ControlSet | None = None
    cyclic_cursor: int = 0
    block_size: int = 0
    zero_residual: bool = False
    r_stale: bool = False

    @classmethod
    def initial(cls, A, b, x0=None):
        b = np.asarray(b, dtype=np.float64)
        if x0 is None:
            return cls(x=np.zeros(A.n), r=b.copy(), b=b)
        x0 = np.array(x0, dtype=np.float64)
        return cls(x=x0, r=b - A.matvec(x0), b=b)

    def refresh(self, A):
        """Recompute the residual exactly; return the drift it removed."""
        exact = self.b - A.matvec(self.x)
        drift = 0.0 if self.r_stale else float(np.linalg.norm(self.r - exact))
        self.r = exact
        self.r_stale = False
        return drift


@dataclass
class SolveReport:
    method: str
    iters: int
    converged: bool
    final_rse: float | None
    final_relres: float
    cpu_seconds: float
    x: np.ndarray
    history: list | None = None
    stop_reason: str = ""
    max_drift: float = 0.0


# ------------------------------------------------------------------ block steps

def _averaged_block_update(state, A, cs):
    """Apply the averaged block step for control set ``cs`` in place."""
    xi = build_xi(state.r, cs)
    s = xi.sqnorm()  # xi^T r equals sum of squared residuals on the block
    if s == 0.0:
        state.zero_residual = True
        return state
    u = A.transpose_gather(xi.support, xi.coeffs)
    uu = float(u @ u)
    if uu == 0.0:
        raise InconsistentSystemError(f"A^T xi vanished with ||xi||^2 = {s:.3e} at k={state.k}")
    t = s / uu
    state.x += t * u
    state.r -= t * A.matvec(u)
    state.k += 1
    state.last_control = cs
    state.block_size = len(cs)
    return state


def fgbk_step(state, A, cache, eta, p):
    """One fast greedy block Kaczmarz iteration."""
    cs = fgbk_control_set(state.r, cache, eta, p)
    if cs is None:
        state.zero_residual = True
        return state
    return _averaged_block_update(state, A, cs)


def fdbk_step(state, A, cache):
    """One fast deterministic block Kaczmarz iteration."""
    cs = fdbk_control_set(state.r, cache)
    if cs is None:
        state.zero_residual = True
        return state
    return _averaged_block_update(state, A, cs)


def least_squares_apply(A_block, rhs, dense_block_cap=200, ls_tol=1e-12):
    """Minimum-norm minimizer of ``||A_block d - rhs||_2``.

    Blocks with at most ``dense_block_cap`` rows use a dense SVD solve.
    Larger blocks run Craig's method (CG on ``A A^T y = rhs`` with
    ``d = A^T y``), which stays in the row space and so returns the
    minimum-norm solution of a consistent block; it stops at relative
    residual ``ls_tol`` or after ``4 * min(dims)`` iterations.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    m, n = A_block.shape
    if m < 1:
        raise ParameterError("least_squares_apply needs at least one row")
    if rhs.shape != (m,):
        raise ParameterError(f"rhs has length {rhs.size}, expected {m}")
    if not np.any(rhs):
        return np.zeros(n)
    if m <= dense_block_cap:
        return np.linalg.lstsq(A_block.to_dense(), rhs, rcond=None)[0]

    d = np.zeros(n)
    res = rhs.copy()
    p = res.copy()
    rr = float(res @ res)
    target = ls_tol * np.sqrt(rr)
    cap = 4 * min(m, n)
    for it in range(cap):
        if np.sqrt(rr) <= target:
            return d
        w = A_block.rmatvec(p)
        ww = float(w @ w)
        if ww == 0.0:
            break
        alpha = rr / ww
        d += alpha * w
        res -= alpha * A_block.matvec(w)
        rr_new = float(res @ res)
        p = res + (rr_new / rr) * p
        rr = rr_new
    if np.sqrt(rr) <= target:
        return d
    raise SolverFailure(
        f"block least-squares stalled: relative residual {np.sqrt(rr) / np.sqrt(float(rhs @ rhs)):.2e} "
        f"after {cap} iterations on a {m}x{n} block (tol {ls_tol:.0e})",
        report={"block_shape": (m, n), "iterations": cap, "relres": np.sqrt(rr) / np.linalg.norm(rhs)},
    )


def gbk_step(state, A, cache, dense_block_cap=200, ls_tol=1e-12):
    """One greedy block Kaczmarz iteration (pseudoinverse projection)."""
    cs = gbk_control_set(state.r, cache)
    if cs is None:
        state.zero_residual = True
        return state
    J = cs.indices
    d = least_squares_apply(A.extract_rows(J), state.r[J], dense_block_cap, ls_tol)
    state.x += d
    state.r -= A.matvec(d)
    state.k += 1
    state.last_control = cs
    state.block_size = len(cs)
    return state


# -------------------------------------------------------------- single-row steps

def _project_row(state, A, i, sq):
    cols, vals = A.row(i)
    res = state.b[i] - float(vals @ state.x[cols])
    if res != 0.0:
        state.x[cols] += (res / sq) * vals
        state.r_stale = True
    state.k += 1
    state.block_size = 1


def kaczmarz_step(state, A, cache):
    """One cyclic Kaczmarz projection; zero rows are skipped without counting."""
    m = A.m
    i = state.cyclic_cursor
    for _ in range(m):
        if cache.sqnorms2[i] > 0:
            break
        i = (i + 1) % m
    else:
        raise ParameterError("matrix has no nonzero row")
    _project_row(state, A, i, cache.sqnorms2[i])
    state.cyclic_cursor = (i + 1) % m
    return state


def sample_row(cache, rng):
    """Draw a row index with probability ``||A_i||^2 / ||A||_F^2``."""
    cdf = cache.sampling_cdf
    u = rng.random() * cdf[-1]
    return min(int(np.searchsorted(cdf, u, side="right")), cdf.size - 1)


def rk_step(state, A, cache, rng):
    """One randomized Kaczmarz projection."""
    if not cache.frob_sq > 0:
        raise ParameterError("randomized Kaczmarz needs a nonzero matrix")
    i = sample_row(cache, rng)
    _project_row(state, A, i, cache.sqnorms2[i])
    return state


# ----------------------------------------------------------------------- driver

def solve(problem, config, x0=None):
    """Run one method on ``problem`` from ``x0 = 0`` until the stopping rule fires.

    Parameters
    ----------
    problem : ProblemInstance
        Needs ``x_star`` when ``config.stop_mode`` is ``"rse_known_solution"``.
    config : SolverConfig

    Returns
    -------
    SolveReport
        ``final_rse`` is ``||x_k - x_*||^2 / ||x_0 - x_*||^2`` (None without
        ``x_star``); ``cpu_seconds`` is monotonic wall time of the loop plus
        the row-norm precomputation.
    """
    A, b = problem.A, np.asarray(problem.b, dtype=np.float64)
    if b.shape != (A.m,):
        raise ParameterError(f"b has length {b.size}, expected {A.m}")
    x_star = problem.x_star
    if config.stop_mode == "rse_known_solution" and x_star is None:
        raise ParameterError("stop_mode 'rse_known_solution' needs problem.x_star")
    method = config.method
    single_row = method in ("kaczmarz", "rk")

    t0 = time.perf_counter()
    cache = A.row_norms(config.norm_p)
    state = IterationState.initial(A, b, x0)
    rng = rng_stream(config.seed, STREAM_SAMPLING) if method == "rk" else None

    bnorm = float(np.linalg.norm(b))
    e0sq = float(np.sum((state.x - x_star) ** 2)) if x_star is not None else None

    def rse():
        if x_star is None:
            return None
        e = float(np.sum((state.x - x_star) ** 2))
        if e0sq == 0.0:
            return 0.0 if e == 0.0 else np.inf
        return e / e0sq

    def relres():
        return float(np.linalg.norm(state.r)) / bnorm if bnorm > 0 else float(np.linalg.norm(state.r))

    def stop_met():
        if config.stop_mode == "rse_known_solution":
            return rse() < config.tol
        if state.r_stale:
            return False
        return relres() < config.tol

    history = [] if config.record_history else None

    def record():
        if single_row and state.r_stale:
            rnorm = float(np.linalg.norm(b - A.matvec(state.x)))
        else:
            rnorm = float(np.linalg.norm(state.r))
        val = rse()
        history.append({"k": state.k, "rse": np.nan if val is None else val, "residual_norm": rnorm, "block_size": state.block_size})

    if history is not None:
        record()

    converged = False
    reason = "max_iters"
    max_drift = 0.0
    drift_limit = DRIFT_TOL * (1.0 + bnorm)
    while True:
        if stop_met():
            converged, reason = True, "tol"
            break
        if state.k >= config.max_iters:
            break
        if method == "fgbk":
            fgbk_step(state, A, cache, config.eta, config.p)
        elif method == "fdbk":
            fdbk_step(state, A, cache)
        elif method == "gbk":
            gbk_step(state, A, cache, config.dense_block_cap, config.ls_tol)
        elif method == "kaczmarz":
            kaczmarz_step(state, A, cache)
        else:
            rk_step(state, A, cache, rng)
        if state.zero_residual:
            state.refresh(A)
            converged, reason = True, "zero_residual"
            break
        if not np.all(np.isfinite(state.x)):
            raise DivergenceError(f"{method}: non-finite iterate at k={state.k}")
        if state.k % config.refresh_every == 0:
            drift = state.refresh(A)
            max_drift = max(max_drift, drift)
            if drift > drift_limit:
                # drift beyond the contract means the incremental update is unreliable
                raise DivergenceError(f"{method}: residual drift {drift:.3e} exceeds {drift_limit:.3e} at k={state.k}")
        if history is not None:
            record()

    if state.r_stale:
        state.refresh(A)
    if not converged and stop_met():
        converged, reason = True, "tol"
    elapsed = time.perf_counter() - t0
    return SolveReport(
        method=method,
        iters=state.k,
        converged=converged,
        final_rse=rse(),
        final_relres=relres(),
        cpu_seconds=elapsed,
        x=state.x,
        history=history,
        stop_reason=reason,
        max_drift=max_drift,
    )


def solve_system(A, b, method="fgbk", x_star=None, **options):
    """Convenience wrapper: solve ``A x = b`` for a raw array or matrix ``A``.

    Without ``x_star`` the run stops on the relative residual.
    """
    from .linalg import as_matrix
    from .matrix_io import ProblemInstance

    A = as_matrix(A)
    b = np.asarray(b, dtype=np.float64)
    options.setdefault("stop_mode", "rse_known_solution" if x_star is not None else "relative_residual")
    config = SolverConfig(method=method, **options)
    prob = ProblemInstance(A=A, b=b, x_star=x_star, x_plant=np.zeros(A.n) if x_star is None else x_star)
    return solve(prob, config)
