"""Per-iteration check of the FGBK contraction bound.

For FGBK started in the row space of ``A`` the squared error obeys

    ||x_{k+1} - x_*||^2 <= (1 - beta_k sigma_min(A)^2) ||x_k - x_*||^2,

    beta_k = eta^(2/p) * sum_{i in tau_k} ||A_i||_p^2
             / ( sum_{i not in tau_{k-1}} ||A_i||_p^2 * sigma_max(A_{tau_k})^2 ).

:func:`check_contraction_bound` runs FGBK on a small dense instance and compares the
observed error ratio with this factor at every step.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, ParameterError, VerificationFailure
from .matrix_io import least_norm_solution
from .selection import check_eta_p
from .solvers import IterationState, SolverConfig, fgbk_step

DENSE_CAP = 1000
BOUND_SLACK = 1e-10
TRACE_COLUMNS = ("k", "tau_size", "beta_k", "bound_factor", "observed_factor")


def _dense(M):
    return M.to_dense() if hasattr(M, "to_dense") else np.asarray(M, dtype=np.float64)


def singular_values(M, cap=DENSE_CAP):
    a = _dense(M)
    if max(a.shape) > cap:
        raise CapabilityError(f"dense singular values capped at {cap}, matrix is {a.shape[0]}x{a.shape[1]}")
    if a.size == 0:
        return np.zeros(0)
    return np.linalg.svd(a, compute_uv=False)


def numerical_rank(s, shape):
    if s.size == 0 or s[0] == 0:
        return 0
    tol = max(shape) * np.finfo(np.float64).eps * s[0]
    return int(np.count_nonzero(s > tol))


def singular_extremes(M, cap=DENSE_CAP):
    """(smallest nonzero, largest) singular value of ``M``.

    "Nonzero" uses the rank tolerance ``max(m, n) * eps * sigma_max``.
    Matrices with a dimension above ``cap`` are refused.
    """
    a = _dense(M)
    s = singular_values(a, cap)
    if s.size == 0 or s[0] == 0:
        return 0.0, 0.0
    r = numerical_rank(s, a.shape)
    return float(s[r - 1]), float(s[0])


def block_sigma_max_sq(A, indices, cache=None):
    """Largest squared singular value of the row block ``A[indices]``."""
    if len(indices) == 1 and cache is not None:
        return float(cache.sqnorms2[indices[0]])
    block = _dense(A.extract_rows(indices))
    # the Gram matrix on the short side has the same nonzero spectrum
    G = block @ block.T if block.shape[0] <= block.shape[1] else block.T @ block
    return float(np.linalg.eigvalsh(G)[-1])


def beta_k(cache, tau_k, tau_prev, A, p, eta, sigma_max_sq=None):
    """Contraction coefficient of the FGBK bound at one iteration.

    ``tau_prev`` is the previous control set; pass None at ``k = 0``, where
    the complement sum runs over all rows (a larger denominator, hence a
    weaker but well-defined claim). Returns ``nan`` when the complement sum
    is zero, which the caller records as a degenerate bound.
    """
    check_eta_p(eta, p)
    if cache.p != p:
        raise ParameterError(f"row-norm cache was built for p={cache.p}, bound asked for p={p}")
    idx = np.asarray(tau_k.indices if hasattr(tau_k, "indices") else tau_k, dtype=np.int64)
    if idx.size == 0:
        raise ParameterError("beta_k needs a non-empty control set")
    pn_sq = cache.pnorms_sq()
    keep = np.ones(cache.m, dtype=bool)
    if tau_prev is not None:
        prev = np.asarray(tau_prev.indices if hasattr(tau_prev, "indices") else tau_prev, dtype=np.int64)
        keep[prev] = False
    denom = float(pn_sq[keep].sum())
    if denom == 0.0:
        return float("nan")
    if sigma_max_sq is None:
        sigma_max_sq = block_sigma_max_sq(A, idx, cache)
    num = float(pn_sq[idx].sum())
    return eta ** (2.0 / p) * num / (denom * sigma_max_sq)


@dataclass
class BoundRecord:
    k: int
    tau_size: int
    beta_k: float
    sigma_min_sq: float
    bound_factor: float
    observed_factor: float
    degenerate: bool = False
    flagged: bool = False

    @property
    def violated(self):
        return not self.degenerate and self.observed_factor > self.bound_factor + BOUND_SLACK

    def to_record(self):
        return {
            "k": self.k,
            "tau_size": self.tau_size,
            "beta_k": self.beta_k,
            "bound_factor": self.bound_factor,
            "observed_factor": self.observed_factor,
        }


@dataclass
class BoundTrace:
    records: list
    sigma_min: float
    sigma_max: float
    converged: bool = False
    iters: int = 0
    final_error: float = np.nan
    x_star_norm: float = np.nan
    max_rowspace_leak: float = 0.0
    x: np.ndarray | None = field(default=None, repr=False)

    @property
    def violations(self):
        return [rec for rec in self.records if rec.violated]

    @property
    def satisfied(self):
        return not self.violations

    def final_gate(self, rel=1e-5):
        """``||x - A^+ b|| <= rel * (1 + ||A^+ b||)``."""
        return self.final_error <= rel * (1.0 + self.x_star_norm)

    def worst_margin(self):
        """max over k of observed_factor - bound_factor (negative = slack)."""
        live = [r.observed_factor - r.bound_factor for r in self.records if not r.degenerate]
        return max(live) if live else float("nan")


def _rowspace_basis(a):
    u, s, vt = np.linalg.svd(a, full_matrices=True)
    r = numerical_rank(s, a.shape)
    return vt[r:]  # rows span the null space of A


def check_contraction_bound(problem, config, strict=True, track_rowspace=False):
    """Run FGBK from ``x_0 = 0`` and test the contraction bound at every step.

    Parameters
    ----------
    problem : ProblemInstance
        Dense-capable instance with ``max(m, n) <= 1000``. ``x_star`` is
        replaced by ``A^+ b`` if missing.
    config : SolverConfig
        ``p``, ``eta``, ``tol`` (RSE), ``max_iters`` and ``refresh_every`` are used.
    strict : bool
        Raise :class:`VerificationFailure` on the first violated record.
    track_rowspace : bool
        Also record how far iterates drift out of the row space of ``A``.

    Returns
    -------
    BoundTrace
    """
    A = problem.A
    if max(A.shape) > DENSE_CAP:
        raise CapabilityError(f"verification is capped at {DENSE_CAP}x{DENSE_CAP}, got {A.m}x{A.n}")
    p, eta = float(config.p), float(config.eta)
    check_eta_p(eta, p)
    b = np.asarray(problem.b, dtype=np.float64)
    x_star = problem.x_star if problem.x_star is not None else least_norm_solution(A, b)

    dense = _dense(A)
    smin, smax = singular_extremes(dense)
    smin_sq = smin * smin
    null_basis = _rowspace_basis(dense) if track_rowspace else None

    cache = A.row_norms(p)
    state = IterationState.initial(A, b)
    e0 = float(np.sum(x_star**2))
    ek = e0
    records = []
    sigma_cache = {}  # greedy blocks recur; their spectra are exact, so memoize
    leak = 0.0
    converged = ek == 0.0
    trace = BoundTrace(records=records, sigma_min=smin, sigma_max=smax, x_star_norm=float(np.sqrt(e0)))

    while not converged and state.k < config.max_iters:
        prev = state.last_control
        fgbk_step(state, A, cache, eta, p)
        if state.zero_residual:
            converged = True
            break
        cs = state.last_control
        key = cs.indices.tobytes()
        smax_sq = sigma_cache.get(key)
        if smax_sq is None:
            smax_sq = sigma_cache[key] = block_sigma_max_sq(A, cs.indices, cache)
        beta = beta_k(cache, cs, prev, A, p, eta, sigma_max_sq=smax_sq)
        ek1 = float(np.sum((state.x - x_star) ** 2))
        observed = ek1 / ek
        if np.isnan(beta):
            rec = BoundRecord(state.k - 1, len(cs), beta, smin_sq, np.nan, observed, degenerate=True)
        else:
            prod = beta * smin_sq
            rec = BoundRecord(state.k - 1, len(cs), beta, smin_sq, 1.0 - prod, observed, flagged=not (0.0 < prod <= 1.0))
        records.append(rec)
        if strict and rec.violated:
            trace.iters = state.k
            raise VerificationFailure(
                f"bound violated at k={rec.k}: observed {rec.observed_factor:.6e} > bound {rec.bound_factor:.6e}",
                record=rec,
                trace=trace,
            )
        if null_basis is not None and null_basis.shape[0]:
            nx = float(np.linalg.norm(state.x))
            if nx > 0:
                leak = max(leak, float(np.linalg.norm(null_basis @ state.x)) / nx)
        if state.k % config.refresh_every == 0:
            state.refresh(A)
        ek = ek1
        if ek == 0.0 or ek / e0 < config.tol:
            converged = True

    trace.converged = converged
    trace.iters = state.k
    trace.final_error = float(np.linalg.norm(state.x - x_star))
    trace.max_rowspace_leak = leak
    trace.x = state.x
    return trace


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for rec in trace.records:
            row = rec.to_record()
            w.writerow([row["k"], row["tau_size"], repr(float(row["beta_k"])), repr(float(row["bound_factor"])), repr(float(row["observed_factor"]))])


def verification_config(p, eta, tol=1e-10, max_iters=200_000):
    """FGBK config used for bound verification (tight RSE target)."""
    return SolverConfig(method="fgbk", p=p, eta=eta, tol=tol, max_iters=max_iters)
