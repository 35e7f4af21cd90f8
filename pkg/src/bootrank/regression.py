"""Partialled-out OLS for the first stage ``X = Z Pi + W Gamma + u``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .data import Dataset
from .errors import CollinearityError

__all__ = ["FirstStageFit", "annihilator", "partial_out", "fit_first_stage"]

# Smallest-to-largest singular value ratio below which a block is collinear.
COLLINEARITY_TOL = 1e-10


def _check_full_rank(A: np.ndarray, what: str) -> None:
    if A.shape[1] == 0:
        return
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[0] == 0 or sv[-1] <= COLLINEARITY_TOL * sv[0]:
        cond = np.inf if sv[-1] == 0 else sv[0] / sv[-1]
        raise CollinearityError(f"{what} is rank deficient (condition number {cond:.3g})")


def annihilator(W) -> np.ndarray:
    """Materialized ``I - W (W'W)^{-1} W'`` (``I`` when ``W`` has no columns).

    Only meant for small ``n``; production code uses :func:`partial_out`.
    """
    W = np.asarray(W, dtype=np.float64)
    n = W.shape[0]
    if W.ndim != 2 or W.shape[1] == 0:
        return np.eye(n)
    _check_full_rank(W, "control matrix W")
    Qw, _ = np.linalg.qr(W)
    return np.eye(n) - Qw @ Qw.T


def partial_out(W: np.ndarray, *arrays: np.ndarray) -> tuple[np.ndarray, ...]:
    """Residualize each array on the columns of ``W`` (computes ``M_W @ a``)."""
    if W.shape[1] == 0:
        return tuple(np.array(a, dtype=np.float64) for a in arrays)
    _check_full_rank(W, "control matrix W")
    Qw, _ = np.linalg.qr(W)
    return tuple(a - Qw @ (Qw.T @ a) for a in arrays)


@dataclass(frozen=True)
class FirstStageFit:
    """OLS fit of the first stage.

    ``Pi_hat`` is ``m x k`` and ``Gamma_hat`` is ``l x k``. ``Z_tilde`` and
    ``X_tilde`` are ``Z`` and ``X`` with the controls partialled out; they are
    what the bootstrap needs. ``gram_factor`` is the Cholesky factor of
    ``Z_tilde' Z_tilde`` in :func:`scipy.linalg.cho_factor` form.
    """

    Pi_hat: np.ndarray
    Gamma_hat: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    Z_tilde: np.ndarray
    X_tilde: np.ndarray
    gram_factor: tuple

    @property
    def n(self) -> int:
        return self.residuals.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """``(Z~'Z~)^{-1} Z~' rhs`` for ``rhs`` of shape ``(n, p)`` or ``(B, n, p)``."""
        cross = np.swapaxes(self.Z_tilde, 0, 1) @ rhs
        if cross.ndim == 2:
            return sla.cho_solve(self.gram_factor, cross)
        B, m, p = cross.shape
        flat = np.moveaxis(cross, 0, 1).reshape(m, B * p)
        return np.moveaxis(sla.cho_solve(self.gram_factor, flat).reshape(m, B, p), 1, 0)


def fit_first_stage(d: Dataset) -> FirstStageFit:
    """Estimate ``Pi`` by OLS after partialling ``W`` out of ``Z`` and ``X``.

    ``Gamma`` is recovered by regressing ``X - Z Pi_hat`` on ``W``.

    Raises
    ------
    CollinearityError
        If ``W`` is rank deficient or ``Z`` is collinear once ``W`` is removed.
    """
    X, Z, W = d.X, d.Z, d.W
    Z_tilde, X_tilde = partial_out(W, Z, X)
    _check_full_rank(Z_tilde, "instrument matrix Z after partialling out W")
    gram = Z_tilde.T @ Z_tilde
    try:
        factor = sla.cho_factor(gram, lower=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise CollinearityError("Z'M_W Z is not positive definite") from exc
    Pi_hat = sla.cho_solve(factor, Z_tilde.T @ X_tilde)

    resid_w = X - Z @ Pi_hat
    if W.shape[1]:
        Gamma_hat = np.linalg.lstsq(W, resid_w, rcond=None)[0]
    else:
        Gamma_hat = np.zeros((0, X.shape[1]))
    fitted = Z @ Pi_hat + W @ Gamma_hat
    residuals = X - fitted
    return FirstStageFit(
        Pi_hat=Pi_hat,
        Gamma_hat=Gamma_hat,
        residuals=residuals,
        fitted=fitted,
        Z_tilde=Z_tilde,
        X_tilde=X_tilde,
        gram_factor=factor,
    )
