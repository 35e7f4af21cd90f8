"""Monte Carlo helpers for rejection-rate experiments."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset
from .engine import TestConfig, run_test


def simulate_first_stage(n: int, Pi, rng: np.random.Generator, intercept: float = 0.0) -> Dataset:
    """``X = Z Pi + intercept + u`` with ``Z`` and ``u`` iid standard normal."""
    Pi = np.atleast_2d(np.asarray(Pi, dtype=np.float64))
    m, k = Pi.shape
    Z = rng.standard_normal((n, m))
    X = Z @ Pi + intercept + rng.standard_normal((n, k))
    return Dataset.from_arrays(X, Z)


@dataclass(frozen=True)
class RejectionRates:
    reps: int
    two_step: float
    analytic: float | None
    first_step: float

    def stderr(self, p: float) -> float:
        return float(np.sqrt(p * (1 - p) / self.reps))


def rejection_rates(Pi, n: int, reps: int, cfg: TestConfig, seed: int = 0) -> RejectionRates:
    """Share of ``reps`` simulated samples in which each variant rejects.

    Replication ``i`` draws its data from ``SeedSequence(seed).spawn(reps)[i]``
    and bootstraps with seed ``cfg.seed + i``.
    """
    children = np.random.SeedSequence(seed).spawn(reps)
    two = ana = first = 0
    for i, child in enumerate(children):
        d = simulate_first_stage(n, Pi, np.random.default_rng(child))
        rep = run_test(d, replace(cfg, seed=cfg.seed + i))
        two += rep.two_step.decision == "reject"
        first += rep.two_step.first_step_rejected
        if rep.analytic is not None:
            ana += rep.analytic.decision == "reject"
    return RejectionRates(
        reps=reps,
        two_step=two / reps,
        analytic=ana / reps if cfg.run_analytic else None,
        first_step=first / reps,
    )
