"""Bootstrap rank test: statistic, critical values, p-values and decisions.

The statistic is ``n * phi(Pi_hat, r)``. Its null law is approximated by

    sum_{j = r - r_hat + 1}^{k - r_hat} sigma_j^2(P2' M*_b Q2),   b = 1..B,

with ``P2``, ``Q2`` the trailing singular vectors of ``Pi_hat`` beyond ``r_hat``.
The two-step variant estimates ``r_hat`` by sequential KP tests at level
``beta`` and rejects outright when ``r_hat > r``; otherwise it rejects when the
p-value is below ``alpha - beta``. The analytic variant thresholds the singular
values at ``kappa_n`` and rejects when the p-value is below ``alpha``.

One set of bootstrap draws serves both variants and every hypothesized rank.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bootstrap as boot
from .bootstrap import BootstrapDraws, BootstrapScheme
from .data import Dataset
from .errors import InvalidInputError, InvalidRankError, InvalidStateError
from .linalg import SvdResult, phi, projected_phi, svd, tail_blocks
from .rank import KPStep, sequential_rank, threshold_rank
from .regression import FirstStageFit, fit_first_stage

__all__ = [
    "DEFAULT_SEED",
    "TestConfig",
    "BranchResult",
    "RankRow",
    "TestReport",
    "statistic",
    "bootstrap_law",
    "critical_value",
    "p_value",
    "prepare",
    "run_two_step",
    "run_analytic",
    "run_allrank",
    "run_test",
]

DEFAULT_SEED = 20160517
SCALES = ("table", "sample")


@dataclass(frozen=True)
class TestConfig:
    """Test settings.

    ``r=None`` means ``k - 1``; ``kappa_n=None`` means ``n ** -0.25``.
    ``scale`` picks the ``n`` multiplying the statistic: ``"table"`` uses the
    number of rows in the source table, ``"sample"`` the estimation sample.
    p-values and decisions do not depend on it.
    """

    __test__ = False

    r: int | None = None
    alpha: float = 0.05
    beta: float = 0.005
    kappa_n: float | None = None
    B: int = 1000
    scheme: BootstrapScheme = field(default_factory=BootstrapScheme.wild)
    seed: int = DEFAULT_SEED
    run_analytic: bool = False
    allrank: bool = False
    scale: str = "table"

    def __post_init__(self):
        if not 0 < self.beta < self.alpha < 1:
            raise InvalidInputError(
                f"need 0 < beta < alpha < 1, got beta={self.beta}, alpha={self.alpha}"
            )
        if int(self.B) != self.B or self.B < 1:
            raise InvalidInputError(f"B must be a positive integer, got {self.B!r}")
        if self.kappa_n is not None and not self.kappa_n > 0:
            raise InvalidInputError(f"kappa_n must be positive, got {self.kappa_n!r}")
        if self.scale not in SCALES:
            raise InvalidInputError(f"scale must be one of {SCALES}, got {self.scale!r}")
        if self.r is not None and (int(self.r) != self.r or self.r < 0):
            raise InvalidRankError(f"rank must be a nonnegative integer, got {self.r!r}")

    def resolve_rank(self, k: int) -> int:
        r = k - 1 if self.r is None else int(self.r)
        if r >= k:
            raise InvalidRankError(f"the hypothesized rank r={r} must be strictly less than k={k}")
        return r


@dataclass
class BranchResult:
    """Outcome of one variant of the test at one hypothesized rank."""

    rank_estimate: int
    decision: str
    first_step_rejected: bool = False
    statistic: float | None = None
    p_value: float | None = None
    critical_value: float | None = None
    level: float | None = None


@dataclass
class RankRow:
    r: int
    statistic: float
    two_step: BranchResult
    analytic: BranchResult | None = None


@dataclass
class TestReport:
    """Everything a run produces; ``to_dict``/``from_dict`` round-trip exactly."""

    __test__ = False

    r: int
    statistic: float
    n: int
    n_scale: float
    kappa_n: float
    alpha: float
    beta: float
    B: int
    seed: int
    scheme: dict
    singular_values: list[float]
    kp_trail: list[KPStep]
    two_step: BranchResult
    analytic: BranchResult | None = None
    allrank_table: list[RankRow] | None = None
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> TestReport:
        data = dict(data)
        data["kp_trail"] = [KPStep(**s) for s in data["kp_trail"]]
        data["two_step"] = BranchResult(**data["two_step"])
        if data.get("analytic") is not None:
            data["analytic"] = BranchResult(**data["analytic"])
        if data.get("allrank_table") is not None:
            data["allrank_table"] = [
                RankRow(
                    r=row["r"],
                    statistic=row["statistic"],
                    two_step=BranchResult(**row["two_step"]),
                    analytic=None if row["analytic"] is None else BranchResult(**row["analytic"]),
                )
                for row in data["allrank_table"]
            ]
        return cls(**data)


def statistic(fit: FirstStageFit, n: float, r: int) -> float:
    """``n * phi(Pi_hat, r)``."""
    return float(n * phi(_oriented(fit.Pi_hat), r))


def bootstrap_law(draws: BootstrapDraws, svd_fit: SvdResult, r: int, r_hat: int) -> np.ndarray:
    """Bootstrap analogue of the statistic for every draw, in draw order."""
    if r_hat > r:
        raise InvalidStateError(f"r_hat={r_hat} > r={r}; no bootstrap law is needed")
    P2, Q2 = tail_blocks(svd_fit, r_hat)
    return np.asarray(projected_phi(P2, _oriented(draws.M_star), Q2, r, r_hat), dtype=np.float64)


def _order_index(B: int, level: float) -> int:
    # round away float noise in B * level (e.g. 1000 * 0.955)
    return math.floor(round(B * level, 9))


def critical_value(law, level: float) -> float:
    """The ``floor(B * level)``-th smallest value of ``law`` (the minimum if that is 0)."""
    law = np.sort(np.asarray(law, dtype=np.float64))
    j = _order_index(law.size, level)
    return float(law[max(j, 1) - 1])


def p_value(law, observed: float) -> float:
    """Share of bootstrap values at least as large as ``observed``."""
    law = np.asarray(law, dtype=np.float64)
    return float(np.count_nonzero(law >= observed) / law.size)


def _oriented(A: np.ndarray) -> np.ndarray:
    """Put the longer dimension first (``m >= k``); batches are handled too."""
    return A if A.shape[-2] >= A.shape[-1] else np.swapaxes(A, -1, -2)


@dataclass(frozen=True)
class Prepared:
    """Quantities shared by every branch and every hypothesized rank."""

    d: Dataset
    cfg: TestConfig
    fit: FirstStageFit
    draws: BootstrapDraws
    svd: SvdResult
    n_scale: float
    kappa_n: float
    sequential: object
    warnings: tuple[str, ...]

    @property
    def k(self) -> int:
        return self.svd.shape[1]


def prepare(d: Dataset, cfg: TestConfig) -> Prepared:
    """Fit the first stage, draw the bootstrap, and run the sequential KP tests."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fit = fit_first_stage(d)
        n_scale = float(d.n_table if cfg.scale == "table" else d.n)
        kappa_n = cfg.kappa_n if cfg.kappa_n is not None else n_scale ** -0.25
        draws = boot.run(fit, d, cfg.scheme, cfg.B, cfg.seed, n_scale=n_scale)
        Pi = _oriented(fit.Pi_hat)
        M_null = _oriented(draws.M_null)
        Omega_null = draws.Omega_null if Pi is fit.Pi_hat else boot._covariance(boot.flatten(M_null))
        seq = sequential_rank(Pi, Omega_null, n_scale, cfg.beta)
    notes = tuple(str(w.message) for w in caught)
    if d.m < d.k:
        notes += (f"more endogenous variables (k={d.k}) than instruments (m={d.m}); "
                  "testing the transposed coefficient matrix",)
    return Prepared(d=d, cfg=cfg, fit=fit, draws=draws, svd=svd(Pi), n_scale=n_scale,
                    kappa_n=float(kappa_n), sequential=seq, warnings=notes)


def _second_step(prep: Prepared, r: int, r_hat: int, level: float, p_cut: float,
                 notes: list[str]) -> BranchResult:
    stat = float(prep.n_scale * np.sum(prep.svd.sigma[r:] ** 2))
    if r_hat >= prep.k:
        notes.append(f"rank estimate equals k={prep.k}; the bootstrap law is identically zero")
    law = bootstrap_law(prep.draws, prep.svd, r, r_hat)
    crit = critical_value(law, level)
    p = p_value(law, stat)
    return BranchResult(
        rank_estimate=r_hat,
        decision="reject" if p < p_cut else "accept",
        statistic=stat,
        p_value=p,
        critical_value=crit,
        level=level,
    )


def _two_step_at(prep: Prepared, r: int, notes: list[str]) -> BranchResult:
    r_hat = prep.sequential.value
    cfg = prep.cfg
    if r_hat > r:
        return BranchResult(rank_estimate=r_hat, decision="reject", first_step_rejected=True)
    return _second_step(prep, r, r_hat, 1 - cfg.alpha + cfg.beta, cfg.alpha - cfg.beta, notes)


def _analytic_at(prep: Prepared, r: int, notes: list[str]) -> BranchResult:
    r_hat = threshold_rank(prep.svd.sigma, prep.kappa_n, r).value
    return _second_step(prep, r, r_hat, 1 - prep.cfg.alpha, prep.cfg.alpha, notes)


def run_two_step(d: Dataset, cfg: TestConfig, prep: Prepared | None = None) -> BranchResult:
    """Two-step variant at ``cfg.r``."""
    prep = prepare(d, cfg) if prep is None else prep
    return _two_step_at(prep, cfg.resolve_rank(prep.k), [])


def run_analytic(d: Dataset, cfg: TestConfig, prep: Prepared | None = None) -> BranchResult:
    """Analytic (thresholded rank) variant at ``cfg.r``."""
    prep = prepare(d, cfg) if prep is None else prep
    return _analytic_at(prep, cfg.resolve_rank(prep.k), [])


def run_allrank(d: Dataset, cfg: TestConfig, prep: Prepared | None = None) -> list[RankRow]:
    """One row per ``r = 0, ..., k-1`` from a single set of draws."""
    prep = prepare(d, cfg) if prep is None else prep
    notes: list[str] = []
    rows = []
    for r in range(prep.k):
        rows.append(RankRow(
            r=r,
            statistic=float(prep.n_scale * np.sum(prep.svd.sigma[r:] ** 2)),
            two_step=_two_step_at(prep, r, notes),
            analytic=_analytic_at(prep, r, notes) if cfg.run_analytic else None,
        ))
    return rows


def run_test(d: Dataset, cfg: TestConfig | None = None) -> TestReport:
    """Run the full test and collect a :class:`TestReport`."""
    cfg = TestConfig() if cfg is None else cfg
    prep = prepare(d, cfg)
    r = cfg.resolve_rank(prep.k)
    notes = list(prep.warnings)
    two = _two_step_at(prep, r, notes)
    ana = _analytic_at(prep, r, notes) if cfg.run_analytic else None
    table = run_allrank(d, cfg, prep) if cfg.allrank else None
    return TestReport(
        r=r,
        statistic=float(prep.n_scale * np.sum(prep.svd.sigma[r:] ** 2)),
        n=d.n,
        n_scale=prep.n_scale,
        kappa_n=prep.kappa_n,
        alpha=cfg.alpha,
        beta=cfg.beta,
        B=int(cfg.B),
        seed=int(cfg.seed),
        scheme=cfg.scheme.describe(),
        singular_values=[float(s) for s in prep.svd.sigma],
        kp_trail=list(prep.sequential.trail),
        two_step=two,
        analytic=ana,
        allrank_table=table,
        warnings=list(dict.fromkeys(notes)),
    )
