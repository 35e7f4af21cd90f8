"""Residual bootstrap of the first-stage coefficient matrix.

A draw rebuilds ``X* = Z Pi_hat + W Gamma_hat + u*`` from perturbed residuals
``u*`` and refits. Because ``Z`` and ``W`` stay fixed, the refit reduces to

    Pi* - Pi_hat = (Z'M_W Z)^{-1} Z'M_W u*,

which is what :func:`draw` evaluates. The long route is kept in the tests.

Every draw uses its own generator spawned from ``SeedSequence(seed)``, so draw
``b`` is the same no matter how draws are scheduled.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import InvalidInputError
from .regression import FirstStageFit

__all__ = [
    "BootstrapScheme",
    "BootstrapDraws",
    "perturb_residuals",
    "draw",
    "run",
    "flatten",
    "draw_rngs",
]

log = logging.getLogger(__name__)

KINDS = ("wild", "cluster", "block")
_CHUNK = 64


@dataclass(frozen=True)
class BootstrapScheme:
    """How residuals are perturbed.

    ``wild``: each row times an independent N(0, 1) weight.
    ``cluster``: each row times its cluster's Rademacher weight.
    ``block``: non-circular moving-block resample of whole residual rows.
    """

    kind: str = "wild"
    block_length: int | None = None
    cluster_ids: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown bootstrap scheme {self.kind!r}; use one of {KINDS}")
        if self.kind == "block":
            if self.block_length is None or int(self.block_length) != self.block_length \
                    or self.block_length < 1:
                raise InvalidInputError("block scheme needs a positive integer block_length")
        elif self.block_length is not None:
            raise InvalidInputError("block_length is only valid for the block scheme")
        if self.kind == "cluster":
            if self.cluster_ids is None:
                raise InvalidInputError("cluster scheme needs cluster_ids")
            object.__setattr__(self, "cluster_ids", np.asarray([str(c) for c in self.cluster_ids]))
        elif self.cluster_ids is not None:
            raise InvalidInputError("cluster_ids are only valid for the cluster scheme")

    @classmethod
    def wild(cls) -> BootstrapScheme:
        return cls("wild")

    @classmethod
    def cluster(cls, ids) -> BootstrapScheme:
        return cls("cluster", cluster_ids=ids)

    @classmethod
    def block(cls, length: int) -> BootstrapScheme:
        return cls("block", block_length=length)

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "block":
            out["block_length"] = int(self.block_length)
        if self.kind == "cluster":
            out["n_clusters"] = int(len(np.unique(self.cluster_ids)))
        return out

    def check(self, d: Dataset) -> None:
        """Validate the scheme against a dataset."""
        if self.kind == "block":
            if self.block_length > d.n:
                raise InvalidInputError(
                    f"block_length={self.block_length} exceeds the sample size n={d.n}"
                )
            if not d.time_is_contiguous():
                raise InvalidInputError(
                    "block bootstrap needs a contiguous time index; the sample has gaps"
                )
        if self.kind == "cluster" and len(self.cluster_ids) != d.n:
            raise InvalidInputError("cluster_ids length does not match the sample size")


def _wild_weights(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.standard_normal(n)


def _rademacher(rng: np.random.Generator, n_groups: int) -> np.ndarray:
    return rng.choice(np.array([-1.0, 1.0]), size=n_groups)


def _block_indices(rng: np.random.Generator, n: int, length: int) -> np.ndarray:
    n_blocks = -(-n // length)
    starts = rng.integers(0, n - length + 1, size=n_blocks)
    return (starts[:, None] + np.arange(length)).ravel()[:n]


def perturb_residuals(residuals: np.ndarray, scheme: BootstrapScheme,
                      rng: np.random.Generator) -> np.ndarray:
    """Return bootstrap residuals ``u*`` with the same shape as ``residuals``.

    Whole rows are perturbed together, so any columns stacked side by side get
    the same weights or the same resampled rows.
    """
    n = residuals.shape[0]
    if scheme.kind == "wild":
        return residuals * _wild_weights(rng, n)[:, None]
    if scheme.kind == "cluster":
        if len(scheme.cluster_ids) != n:
            raise InvalidInputError("cluster_ids length does not match the residuals")
        groups, codes = np.unique(scheme.cluster_ids, return_inverse=True)
        eta = _rademacher(rng, len(groups))
        return residuals * eta[codes][:, None]
    if scheme.block_length > n:
        raise InvalidInputError(f"block_length={scheme.block_length} exceeds n={n}")
    return residuals[_block_indices(rng, n, scheme.block_length)]


def draw(fit: FirstStageFit, d: Dataset, scheme: BootstrapScheme,
         rng: np.random.Generator, n_scale: float | None = None) -> np.ndarray:
    """One centered, scaled draw ``sqrt(n) (Pi* - Pi_hat)`` of shape ``m x k``.

    ``n_scale`` defaults to the sample size ``d.n``.
    """
    n_scale = d.n if n_scale is None else n_scale
    u_star = perturb_residuals(fit.residuals, scheme, rng)
    return np.sqrt(n_scale) * fit.solve(u_star)


def flatten(M: np.ndarray) -> np.ndarray:
    """Column-major vectorization: stack the columns of each ``m x k`` matrix."""
    M = np.asarray(M)
    return np.swapaxes(M, -1, -2).reshape(*M.shape[:-2], -1)


def _covariance(vecs: np.ndarray) -> np.ndarray:
    if vecs.shape[0] < 2:
        return np.zeros((vecs.shape[1], vecs.shape[1]))
    omega = np.cov(vecs, rowvar=False, ddof=1)
    omega = np.atleast_2d(omega)
    return 0.5 * (omega + omega.T)


@dataclass(frozen=True)
class BootstrapDraws:
    """Output of :func:`run`.

    Attributes
    ----------
    M_star : (B, m, k) draws ``sqrt(n) (Pi*_b - Pi_hat)``.
    Omega_hat : (mk, mk) covariance of the flattened ``M_star``.
    M_null : (B, m, k) the same resampling applied to the null-restricted
        residuals ``M_W X`` (the residuals when ``Pi = 0``).
    Omega_null : (mk, mk) covariance of the flattened ``M_null``; the variance
        used by the Kleibergen-Paap LM step.
    """

    M_star: np.ndarray
    Omega_hat: np.ndarray
    M_null: np.ndarray
    Omega_null: np.ndarray
    seed: int
    scheme: BootstrapScheme
    n_scale: float

    @property
    def B(self) -> int:
        return self.M_star.shape[0]


def draw_rngs(seed: int, B: int) -> list[np.random.Generator]:
    """Independent generators for draws ``0 .. B-1``."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(B)]


def run(fit: FirstStageFit, d: Dataset, scheme: BootstrapScheme, B: int, seed: int,
        n_scale: float | None = None) -> BootstrapDraws:
    """Generate ``B`` bootstrap draws.

    The residuals ``u`` and the null-restricted residuals ``M_W X`` are stacked
    and perturbed together, so both sets of draws share their random weights.
    """
    if int(B) != B or B < 1:
        raise InvalidInputError(f"B must be a positive integer, got {B!r}")
    B = int(B)
    if B < 1000:
        log.warning("B=%d bootstrap draws; at least 1000 are recommended", B)
    scheme.check(d)
    n_scale = d.n if n_scale is None else n_scale
    k = fit.residuals.shape[1]
    stacked = np.hstack([fit.residuals, fit.X_tilde])
    rngs = draw_rngs(seed, B)

    out = np.empty((B, d.m, 2 * k))
    for lo in range(0, B, _CHUNK):
        hi = min(lo + _CHUNK, B)
        batch = np.stack([perturb_residuals(stacked, scheme, rngs[b]) for b in range(lo, hi)])
        out[lo:hi] = fit.solve(batch)
    out *= np.sqrt(n_scale)
    M_star, M_null = out[..., :k].copy(), out[..., k:].copy()
    return BootstrapDraws(
        M_star=M_star,
        Omega_hat=_covariance(flatten(M_star)),
        M_null=M_null,
        Omega_null=_covariance(flatten(M_null)),
        seed=seed,
        scheme=scheme,
        n_scale=float(n_scale),
    )
