"""SVD primitives and the singular-value statistics built on them.

Matrices are plain two-dimensional ``float64`` numpy arrays. Every function here
is pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidRankError, InvalidStateError

__all__ = [
    "SvdResult",
    "as_matrix",
    "svd",
    "phi",
    "tail_blocks",
    "projected_phi",
]


@dataclass(frozen=True)
class SvdResult:
    """Full singular value decomposition ``A = P @ diag(sigma) @ Q.T``.

    ``P`` is ``m x m``, ``Q`` is ``k x k`` and ``sigma`` holds the ``k`` singular
    values in descending order.
    """

    P: np.ndarray
    sigma: np.ndarray
    Q: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.P.shape[0], self.Q.shape[0]

    def reconstruct(self) -> np.ndarray:
        m, k = self.shape
        return self.P[:, :k] @ (self.sigma[:, None] * self.Q.T)


def as_matrix(A, name: str = "A") -> np.ndarray:
    """Return ``A`` as a finite 2-d float array or raise ``InvalidInputError``."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be a matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return A


def svd(A) -> SvdResult:
    """Full SVD of an ``m x k`` matrix with ``m >= k``.

    Transpose tall-wide inputs before calling; no transposition is done here
    because downstream code relies on ``P`` being the ``m x m`` factor.
    """
    A = as_matrix(A)
    m, k = A.shape
    if m < k:
        raise InvalidInputError(f"svd expects m >= k, got {m} x {k}; transpose first")
    P, sigma, Qt = np.linalg.svd(A, full_matrices=True)
    return SvdResult(P=P, sigma=sigma, Q=Qt.T)


def _check_rank(r: int, k: int, name: str = "r") -> int:
    if int(r) != r or r < 0:
        raise InvalidRankError(f"{name} must be a nonnegative integer, got {r!r}")
    if r >= k:
        raise InvalidRankError(f"{name}={r} must be strictly less than k={k}")
    return int(r)


def phi(A, r: int) -> float:
    """Sum of the ``k - r`` smallest squared singular values of ``A``.

    Parameters
    ----------
    A : array_like of shape (m, k), m >= k
    r : int
        Hypothesized rank, ``0 <= r < k``.
    """
    A = as_matrix(A)
    r = _check_rank(r, A.shape[1])
    sigma = np.linalg.svd(A, compute_uv=False)
    return float(np.sum(sigma[r:] ** 2))


def tail_blocks(s: SvdResult, r_hat: int) -> tuple[np.ndarray, np.ndarray]:
    """Columns of ``P`` and ``Q`` beyond the first ``r_hat``.

    Returns ``(P2, Q2)`` of shapes ``m x (m - r_hat)`` and ``k x (k - r_hat)``.
    """
    m, k = s.shape
    if int(r_hat) != r_hat or r_hat < 0 or r_hat > k:
        raise InvalidRankError(f"r_hat must lie in [0, {k}], got {r_hat!r}")
    r_hat = int(r_hat)
    return s.P[:, r_hat:], s.Q[:, r_hat:]


def projected_phi(P2, M, Q2, r: int, r_hat: int):
    """Tail sum of squared singular values of ``P2.T @ M @ Q2``.

    The projected matrix is ``(m - r_hat) x (k - r_hat)``; the sum runs over its
    singular values with (1-based) indices ``r - r_hat + 1`` through ``k - r_hat``.

    ``M`` may carry leading batch dimensions, e.g. a stack of bootstrap draws of
    shape ``(B, m, k)``; the result then has the batch shape.
    """
    if r_hat > r:
        raise InvalidStateError(
            f"r_hat={r_hat} exceeds r={r}; the first step should have rejected"
        )
    M = np.asarray(M, dtype=np.float64)
    k_tail = Q2.shape[1]
    if M.shape[-2] != P2.shape[0] or M.shape[-1] != Q2.shape[0]:
        raise InvalidInputError(
            f"cannot project M of shape {M.shape[-2:]} with P2 {P2.shape}, Q2 {Q2.shape}"
        )
    start = r - r_hat
    if k_tail == 0 or start >= k_tail:
        return np.zeros(M.shape[:-2]) if M.ndim > 2 else 0.0
    proj = np.swapaxes(P2, 0, 1) @ M @ Q2
    sv = np.linalg.svd(proj, compute_uv=False)
    out = np.sum(sv[..., start:] ** 2, axis=-1)
    return out if M.ndim > 2 else float(out)
