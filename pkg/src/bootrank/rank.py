"""Rank estimators for the first-stage coefficient matrix.

Two rules are provided: counting singular values above a threshold, and
sequential Kleibergen-Paap rk tests of ``rank = 0, 1, ...``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DegenerateVarianceError, InvalidInputError, NumericalWarning
from .linalg import as_matrix, svd

__all__ = [
    "RankEstimate",
    "KPStep",
    "threshold_rank",
    "kp_statistic",
    "kp_pvalue",
    "sequential_rank",
    "PINV_RTOL",
]

# Relative cutoff for truncating singular values of the KP variance.
PINV_RTOL = 1e-10


@dataclass(frozen=True)
class KPStep:
    q: int
    statistic: float
    df: int
    p_value: float


@dataclass(frozen=True)
class RankEstimate:
    value: int
    method: str
    trail: tuple[KPStep, ...] = field(default_factory=tuple)


def threshold_rank(sigma, kappa_n: float, r: int) -> RankEstimate:
    """Largest ``j <= r`` with ``sigma[j-1] >= kappa_n``, or 0 if there is none.

    ``sigma`` must be sorted in descending order. The search stops at ``r``, so
    the estimate never exceeds the hypothesized rank.
    """
    if not kappa_n > 0:
        raise InvalidInputError(f"kappa_n must be positive, got {kappa_n!r}")
    sigma = np.asarray(sigma, dtype=np.float64)
    above = np.flatnonzero(sigma[:r] >= kappa_n)
    value = int(above[-1]) + 1 if above.size else 0
    return RankEstimate(value=value, method="threshold")


def kp_statistic(Pi_hat, Omega_hat, q: int, n: float) -> tuple[float, int]:
    """Kleibergen-Paap rk statistic for ``H0: rank(Pi) = q``.

    With ``P2``, ``Q2`` the trailing singular vectors of ``Pi_hat`` beyond the
    first ``q``, the statistic is the quadratic form

        n * vec(L)' (T' Omega T)^{-1} vec(L),   L = P2' Pi_hat Q2,  T = Q2 kron P2,

    where ``vec`` stacks columns and ``Omega_hat`` is the covariance of
    ``sqrt(n) vec(Pi_hat)``. Degrees of freedom are ``(m - q)(k - q)``.

    A near-singular ``T' Omega T`` is inverted with singular values below
    ``PINV_RTOL`` times the largest dropped; a :class:`NumericalWarning` is
    issued when that happens.

    Returns
    -------
    statistic : float
    df : int
    """
    Pi_hat = as_matrix(Pi_hat, "Pi_hat")
    Omega_hat = as_matrix(Omega_hat, "Omega_hat")
    m, k = Pi_hat.shape
    if Omega_hat.shape != (m * k, m * k):
        raise InvalidInputError(f"Omega_hat must be {m * k} x {m * k}, got {Omega_hat.shape}")
    if int(q) != q or not 0 <= q < k:
        raise InvalidInputError(f"q must be an integer in [0, {k}), got {q!r}")
    q = int(q)
    s = svd(Pi_hat)
    P2, Q2 = s.P[:, q:], s.Q[:, q:]
    lam = (P2.T @ Pi_hat @ Q2).T.reshape(-1)
    T = np.kron(Q2, P2)
    V = T.T @ Omega_hat @ T
    V = 0.5 * (V + V.T)
    df = (m - q) * (k - q)

    U, sv, _ = np.linalg.svd(V, hermitian=True)
    top = sv[0] if sv.size else 0.0
    if top <= 0:
        if np.allclose(lam, 0.0, atol=0.0):
            return 0.0, df
        raise DegenerateVarianceError(
            f"variance of the rank-{q} block is zero; the KP statistic is undefined"
        )
    keep = sv > PINV_RTOL * top
    if not np.all(keep):
        warnings.warn(
            f"KP variance at q={q} is near singular; {int((~keep).sum())} of {sv.size} "
            "directions truncated",
            NumericalWarning,
            stacklevel=2,
        )
    proj = U[:, keep].T @ lam
    stat = float(n * np.sum(proj ** 2 / sv[keep]))
    return max(stat, 0.0), df


def kp_pvalue(statistic: float, df: int) -> float:
    """Upper chi-square tail probability."""
    return float(stats.chi2.sf(statistic, df))


def sequential_rank(Pi_hat, Omega_hat, n: float, beta: float, k: int | None = None) -> RankEstimate:
    """Test ``rank = 0, 1, ..., k-1`` in turn at level ``beta``.

    The estimate is the first ``q`` whose p-value is at least ``beta``, or ``k``
    if every test rejects. ``trail`` lists each test that was run.
    """
    if not 0 < beta < 1:
        raise InvalidInputError(f"beta must lie in (0, 1), got {beta!r}")
    Pi_hat = as_matrix(Pi_hat, "Pi_hat")
    k = Pi_hat.shape[1] if k is None else k
    trail = []
    for q in range(k):
        stat, df = kp_statistic(Pi_hat, Omega_hat, q, n)
        p = kp_pvalue(stat, df)
        trail.append(KPStep(q=q, statistic=stat, df=df, p_value=p))
        if p >= beta:
            return RankEstimate(value=q, method="sequential", trail=tuple(trail))
    return RankEstimate(value=k, method="sequential", trail=tuple(trail))
