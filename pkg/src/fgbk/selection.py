"""Greedy control index sets for the three block methods.

All rules score row ``i`` by the ratio ``|r_i|^q / ||A_i||_q^q`` and keep the
rows whose ratio clears a threshold. Membership is tested on the ratio
itself rather than on the cross-multiplied form ``|r_i|^q >= t ||A_i||_q^q``:
the two agree in exact arithmetic, but only the ratio form guarantees that
the row attaining the maximum is selected when the threshold equals the
maximum (``eta = 1``). Rows of zero norm are never scored or selected.

A rule returns None when no scored row carries a nonzero residual, which
the driver treats as convergence.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .linalg import abs_power


@dataclass(frozen=True)
class ControlSet:
    indices: np.ndarray
    threshold: float
    rule: str

    def __len__(self):
        return int(self.indices.size)

    def __contains__(self, i):
        k = np.searchsorted(self.indices, i)
        return bool(k < self.indices.size and self.indices[k] == i)


@dataclass(frozen=True)
class SparseResidualCombo:
    """The combination vector ``xi = sum_{i in support} r_i e_i``."""

    support: np.ndarray
    coeffs: np.ndarray

    def densify(self, m):
        out = np.zeros(m)
        out[self.support] = self.coeffs
        return out

    def sqnorm(self):
        return float(self.coeffs @ self.coeffs)


def check_eta_p(eta, p):
    if not (0.0 < eta <= 1.0):
        raise ParameterError(f"eta must lie in (0, 1], got {eta}")
    if not np.isfinite(p) or p < 1.0:
        raise ParameterError(f"p must be >= 1, got {p}")


def _ratios(r, norms, p):
    r = np.asarray(r, dtype=np.float64)
    if r.shape != norms.shape:
        raise ParameterError(f"residual has length {r.size}, expected {norms.size}")
    scored = norms > 0
    ratio = np.zeros_like(norms)
    ratio[scored] = abs_power(r[scored], p) / norms[scored]
    return ratio, scored


def greedy_ratios(r, cache, p=None):
    """``|r_i|^p / ||A_i||_p^p`` per row (0 on zero-norm rows)."""
    if p is None or p == cache.p:
        return _ratios(r, cache.pnorms_p, cache.p)[0]
    if p == 2:
        return _ratios(r, cache.sqnorms2, 2)[0]
    raise ParameterError(f"cache holds p={cache.p} norms, not p={p}")


def fgbk_control_set(r, cache, eta, p):
    """Working rows of the fast greedy block method.

    ``threshold = eta * max_i |r_i|^p / ||A_i||_p^p`` and the set is every
    row whose ratio reaches it. The argmax row always qualifies, so the
    returned set is never empty.
    """
    check_eta_p(eta, p)
    if p != cache.p:
        raise ParameterError(f"row-norm cache was built for p={cache.p}, selection asked for p={p}")
    ratio, scored = _ratios(r, cache.pnorms_p, p)
    top = ratio.max(initial=0.0)
    if top == 0.0:
        return None
    eps = eta * top
    idx = np.flatnonzero(scored & (ratio >= eps))
    return ControlSet(indices=idx, threshold=float(eps), rule="fgbk")


def fdbk_control_set(r, cache):
    """Working rows of the fast deterministic block method.

    ``gamma = (max_ratio / ||r||^2 + 1 / ||A||_F^2) / 2`` and row ``i`` is kept
    when ``|r_i|^2 / ||A_i||^2 >= gamma ||r||^2``. The cut is capped at the
    maximum ratio, which it cannot exceed in exact arithmetic.
    """
    ratio, scored = _ratios(r, cache.sqnorms2, 2)
    top = ratio.max(initial=0.0)
    if top == 0.0:
        return None
    r = np.asarray(r, dtype=np.float64)
    rsq = float(r @ r)
    gamma = 0.5 * (top / rsq + 1.0 / cache.frob_sq)
    cut = min(gamma * rsq, top)
    idx = np.flatnonzero(scored & (ratio >= cut))
    return ControlSet(indices=idx, threshold=float(gamma), rule="fdbk")


def gbk_control_set(r, cache):
    """Working rows of the greedy block method.

    ``delta = 1/2 + (||r||^2 / ||A||_F^2) / (2 max_ratio)`` and row ``i`` is
    kept when its ratio reaches ``delta * max_ratio``. ``delta`` is capped
    at 1 against rounding.
    """
    ratio, scored = _ratios(r, cache.sqnorms2, 2)
    top = ratio.max(initial=0.0)
    if top == 0.0:
        return None
    r = np.asarray(r, dtype=np.float64)
    rsq = float(r @ r)
    delta = min(0.5 + 0.5 * (rsq / cache.frob_sq) / top, 1.0)
    idx = np.flatnonzero(scored & (ratio >= delta * top))
    return ControlSet(indices=idx, threshold=float(delta), rule="gbk")


def build_xi(r, cs):
    idx = cs.indices
    return SparseResidualCombo(support=idx, coeffs=np.asarray(r, dtype=np.float64)[idx].copy())
