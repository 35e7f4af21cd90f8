import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from bootrank.errors import DegenerateVarianceError, NumericalWarning
from bootrank.rank import kp_pvalue, kp_statistic, sequential_rank, threshold_rank


def kp_first_principles(Pi, Omega, q, n, flip=None):
    """Quadratic form built from Gram-matrix eigenvectors and an explicit loop for T."""
    m, k = Pi.shape
    _, U = np.linalg.eigh(Pi @ Pi.T)   # ascending eigenvalues
    _, V = np.linalg.eigh(Pi.T @ Pi)
    P2 = U[:, : m - q]
    Q2 = V[:, : k - q]
    if flip is not None:
        P2 = P2.copy()
        P2[:, flip] *= -1
    lam = P2.T @ Pi @ Q2
    a_dim, b_dim = m - q, k - q
    ell = np.array([lam[a, b] for b in range(b_dim) for a in range(a_dim)])
    T = np.zeros((m * k, a_dim * b_dim))
    for i in range(m):
        for j in range(k):
            for a in range(a_dim):
                for b in range(b_dim):
                    T[i + m * j, a + a_dim * b] = P2[i, a] * Q2[j, b]
    return n * ell @ np.linalg.solve(T.T @ Omega @ T, ell)


def random_spd(rng, p):
    A = rng.standard_normal((p, p))
    return A @ A.T + p * np.eye(p)


def test_threshold_examples():
    assert threshold_rank([2.0, 0.001], 0.1, 1).value == 1
    assert threshold_rank([0.05, 0.01, 0.0], 0.1, 2).value == 0
    assert threshold_rank([3.0, 2.0, 1.0], 0.5, 1).value == 1
    assert threshold_rank([3.0, 0.2, 0.1], 0.5, 2).value == 1


@given(st.lists(st.floats(0, 10), min_size=1, max_size=6), st.floats(1e-3, 5),
       st.floats(1e-3, 5), st.integers(0, 6))
def test_threshold_monotone_in_kappa(sig, k1, k2, r):
    sig = sorted(sig, reverse=True)
    r = min(r, len(sig) - 1)
    lo, hi = sorted([k1, k2])
    a, b = threshold_rank(sig, lo, r).value, threshold_rank(sig, hi, r).value
    assert b <= a <= r


def test_threshold_klein_value(klein):
    from bootrank.regression import fit_first_stage
    sigma = np.linalg.svd(fit_first_stage(klein).Pi_hat, compute_uv=False)
    kappa = 22 ** -0.25
    expected = max([j for j in (1,) if sigma[j - 1] >= kappa], default=0)
    assert threshold_rank(sigma, kappa, 1).value == expected == 1


@pytest.mark.parametrize("seed", range(10))
def test_kp_identity_variance(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 6))
    k = int(rng.integers(1, m + 1))
    Pi = rng.standard_normal((m, k))
    sv = np.sqrt(np.clip(np.linalg.eigvalsh(Pi.T @ Pi), 0, None))[::-1]
    for q in range(k):
        stat, df = kp_statistic(Pi, np.eye(m * k), q, 37.0)
        assert df == (m - q) * (k - q)
        assert abs(stat - 37.0 * np.sum(sv[q:] ** 2)) <= 1e-8 * (1 + stat)


def test_kp_exact_rank_gives_zero():
    rng = np.random.default_rng(1)
    Pi = np.outer(rng.standard_normal(3), rng.standard_normal(2))
    stat, _ = kp_statistic(Pi, random_spd(rng, 6), 1, 100)
    assert stat == pytest.approx(0.0, abs=1e-20)


@pytest.mark.parametrize("seed", range(5))
def test_kp_first_principles(seed):
    rng = np.random.default_rng(seed)
    Pi = rng.standard_normal((3, 2))
    Omega = random_spd(rng, 6)
    for q in range(2):
        stat, _ = kp_statistic(Pi, Omega, q, 50)
        assert stat == pytest.approx(kp_first_principles(Pi, Omega, q, 50), rel=1e-9)


def test_kp_sign_invariance():
    rng = np.random.default_rng(8)
    Pi = rng.standard_normal((4, 3))
    Omega = random_spd(rng, 12)
    for q in range(3):
        base = kp_first_principles(Pi, Omega, q, 10)
        flipped = kp_first_principles(Pi, Omega, q, 10, flip=0)
        assert abs(base - flipped) <= 1e-10 * (1 + base)
        assert kp_statistic(Pi, Omega, q, 10)[0] == pytest.approx(base, rel=1e-9)


@given(st.floats(1e-3, 1e3))
@settings(max_examples=25)
def test_kp_homogeneity(c):
    rng = np.random.default_rng(0)
    Pi = rng.standard_normal((3, 2))
    for q in range(2):
        s1, _ = kp_statistic(Pi, np.eye(6), q, 20)
        sc, _ = kp_statistic(Pi, c * np.eye(6), q, 20)
        assert sc == pytest.approx(s1 / c, rel=1e-9)


def test_kp_pvalue():
    assert kp_pvalue(0.0, 4) == 1.0
    assert kp_pvalue(stats.chi2.ppf(0.95, 12), 12) == pytest.approx(0.05)


def test_kp_singular_variance_warns():
    rng = np.random.default_rng(2)
    Pi = rng.standard_normal((3, 2))
    A = rng.standard_normal((6, 3))
    with pytest.warns(NumericalWarning):
        stat, _ = kp_statistic(Pi, A @ A.T, 0, 10)
    assert np.isfinite(stat) and stat >= 0


def test_kp_zero_variance():
    Pi = np.ones((3, 2))
    with pytest.raises(DegenerateVarianceError):
        kp_statistic(Pi, np.zeros((6, 6)), 0, 10)
    assert kp_statistic(np.zeros((3, 2)), np.zeros((6, 6)), 0, 10)[0] == 0.0


def test_sequential_zero_matrix():
    est = sequential_rank(np.zeros((3, 2)), np.eye(6), 100, 0.005)
    assert est.value == 0
    assert est.trail[0].statistic == 0.0 and est.trail[0].p_value == 1.0


def test_sequential_strong_rank_one():
    Pi = np.outer([1.0, 2.0, -1.0], [1.0, 0.5])
    n = 500
    est = sequential_rank(Pi, np.eye(6), n, 0.005)
    assert est.trail[0].p_value < 0.005
    assert est.trail[0].statistic > stats.chi2.ppf(0.995, 6)
    assert est.value == 1


def test_sequential_all_reject_returns_k():
    est = sequential_rank(np.eye(3)[:, :2] * 5, np.eye(6), 200, 0.005)
    assert est.value == 2 and len(est.trail) == 2


@given(st.integers(0, 10_000), st.floats(0.001, 0.5), st.floats(1, 500))
@settings(max_examples=40, deadline=None)
def test_sequential_trail_consistent(seed, beta, n):
    rng = np.random.default_rng(seed)
    Pi = rng.standard_normal((4, 3)) * rng.uniform(0, 0.3)
    est = sequential_rank(Pi, random_spd(rng, 12), n, beta)
    ps = [s.p_value for s in est.trail]
    assert all(0 <= p <= 1 for p in ps)
    assert all(p < beta for p in ps[:-1])
    if est.value < 3:
        assert ps[-1] >= beta and est.trail[-1].q == est.value
    else:
        assert len(ps) == 3 and ps[-1] < beta
