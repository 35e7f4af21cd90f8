from pathlib import Path

import numpy as np
import pytest

from bootrank.data import Dataset, assemble, lag, load_csv, set_time

DATA = Path(__file__).parent / "data"
KLEIN_CSV = DATA / "klein.csv"
KLEIN_ENDOG = ["profits", "wagetot"]
KLEIN_INST = ["govt", "taxnetx", "year", "wagegovt", "capital1", "totinc_L1"]
KLEIN_PARTIAL = ["profits_L1"]


def klein_dataset() -> Dataset:
    table = set_time(load_csv(KLEIN_CSV), "yr")
    table = lag(lag(table, "totinc", 1), "profits", 1)
    return assemble(table, KLEIN_ENDOG, KLEIN_INST, KLEIN_PARTIAL)


@pytest.fixture(scope="session")
def klein():
    return klein_dataset()


def synthetic(n=50, m=3, k=2, ell=1, Pi=None, seed=0, heteroskedastic=False):
    """Random first-stage data; ``ell`` nonconstant controls plus a constant."""
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, m))
    Wnc = rng.standard_normal((n, ell))
    Pi = rng.standard_normal((m, k)) if Pi is None else np.asarray(Pi, dtype=float)
    Gamma = rng.standard_normal((ell + 1, k))
    u = rng.standard_normal((n, k))
    if heteroskedastic:
        u *= (1 + np.abs(Z[:, :1]))
    X = Z @ Pi + np.column_stack([np.ones(n), Wnc]) @ Gamma + u
    return Dataset.from_arrays(X, Z, Wnc)


@pytest.fixture
def small_data():
    return synthetic()


ACCEPTANCE_LINES: list[str] = []


def record_criterion(label: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
