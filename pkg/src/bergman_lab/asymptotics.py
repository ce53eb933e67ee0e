"""Expansion-coefficient extraction from sampled F(p) by least squares.

Samples F(p_i) are fitted in the basis {1, 1/p, ..., 1/p^k}; coefficient
error bars come from leave-one-out refits, and the decay order of whatever
is left after removing fitted or predicted terms is estimated from a
log-log slope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RESIDUAL_FLOOR = 1e-12


@dataclass
class ExpansionFit:
    """Least-squares fit F(p) ~ sum_r coeffs[r] p^{-r}.

    `residual` is the max-abs misfit at the sample points; `loo_err[r]` the
    max deviation of coefficient r over leave-one-out refits.
    """

    coeffs: np.ndarray
    residual: float
    loo_err: np.ndarray
    p_list: np.ndarray

    def __call__(self, p):
        q = 1.0 / np.asarray(p, dtype=float)
        return sum(c * q**r for r, c in enumerate(self.coeffs))


def _design(p: np.ndarray, k: int) -> np.ndarray:
    q = 1.0 / p.astype(float)
    return np.vander(q, k + 1, increasing=True)


def _lstsq(X, y, k):
    coeffs, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < k + 1:
        raise ValueError("rank-deficient design: too few distinct p values")
    return coeffs


def fit(samples, k: int) -> ExpansionFit:
    """Fit the first k+1 inverse-power coefficients from (p, value) samples.

    Requires at least k+2 distinct strictly positive p values so that the
    leave-one-out refits stay determined.
    """
    pts = sorted(samples, key=lambda t: t[0])
    p = np.array([t[0] for t in pts], dtype=float)
    y = np.array([t[1] for t in pts], dtype=complex)
    if len(p) != len(np.unique(p)):
        raise ValueError("sample degrees must be distinct")
    if np.any(p <= 0):
        raise ValueError("sample degrees must be positive")
    if len(p) < k + 2:
        raise ValueError(f"need at least {k + 2} samples for a degree-{k} fit")
    X = _design(p, k)
    coeffs = _lstsq(X, y, k)
    residual = float(np.max(np.abs(X @ coeffs - y)))
    loo = np.zeros((len(p), k + 1), dtype=complex)
    for i in range(len(p)):
        mask = np.arange(len(p)) != i
        loo[i] = _lstsq(X[mask], y[mask], k)
    loo_err = np.max(np.abs(loo - coeffs[None, :]), axis=0)
    return ExpansionFit(coeffs, residual, loo_err, p.astype(int))


@dataclass
class OrderEstimate:
    """Log-log decay order of a residual sequence."""

    order: float
    floor_limited: bool


def order_estimate(samples) -> OrderEstimate:
    """Decay order of (p, residual) samples: residual ~ C p^{-order}.

    Residuals at or below the 1e-12 floor are excluded; if fewer than two
    samples survive the estimate is reported as floor-limited.
    """
    pts = sorted(samples, key=lambda t: t[0])
    if len(pts) < 3:
        raise ValueError("order estimate needs at least 3 samples")
    p = np.array([t[0] for t in pts], dtype=float)
    r = np.abs(np.array([t[1] for t in pts], dtype=complex))
    keep = r > RESIDUAL_FLOOR
    floor = bool(np.any(~keep))
    if np.count_nonzero(keep) < 2:
        return OrderEstimate(math.nan, True)
    slope = np.polyfit(np.log(p[keep]), np.log(r[keep]), 1)[0]
    return OrderEstimate(float(-slope), floor)
