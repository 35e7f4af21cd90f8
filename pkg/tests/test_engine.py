import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bootrank.bootstrap import BootstrapScheme, run
from bootrank.data import Dataset
from bootrank.engine import (
    TestConfig,
    TestReport,
    bootstrap_law,
    critical_value,
    p_value,
    prepare,
    run_allrank,
    run_analytic,
    run_test,
    run_two_step,
    statistic,
)
from bootrank.errors import InvalidInputError, InvalidRankError, InvalidStateError
from bootrank.linalg import phi, svd
from bootrank.rank import kp_statistic
from bootrank.regression import fit_first_stage

from conftest import synthetic


def naive_critical_value(law, level):
    ordered = sorted(float(x) for x in law)
    j = int(np.floor(len(ordered) * level + 1e-9))
    return ordered[max(j, 1) - 1]


def test_statistic_klein(klein):
    fit = fit_first_stage(klein)
    assert statistic(fit, klein.n_table, 1) == pytest.approx(8.1005329, abs=1e-4)
    assert statistic(fit, klein.n_table, 0) == pytest.approx(69.488582, abs=1e-4)


def test_statistic_zero_when_rank_at_most_r():
    rng = np.random.default_rng(0)
    n = 80
    Z = rng.standard_normal((n, 3))
    X = np.outer(Z @ [1.0, -1.0, 0.5], [1.0, 2.0])  # exact rank-1 coefficients, no noise
    fit = fit_first_stage(Dataset.from_arrays(X, Z))
    assert statistic(fit, n, 1) <= 1e-20


def test_critical_value_examples():
    assert critical_value(np.arange(1, 101), 0.95) == 95
    assert critical_value(np.full(10, 3.5), 0.2) == 3.5
    assert critical_value([5.0, 1.0], 0.3) == 1.0  # floor(0.6) = 0 -> minimum
    law = np.random.default_rng(0).permutation(1000).astype(float)
    assert critical_value(law, 0.955) == 954.0  # the 955th smallest
    assert critical_value(law, 0.95) == 949.0


@given(st.lists(st.floats(0, 100), min_size=1, max_size=300), st.floats(0.01, 0.999),
       st.floats(0.01, 0.999))
def test_critical_value_naive_and_monotone(law, l1, l2):
    assert critical_value(law, l1) == naive_critical_value(law, l1)
    lo, hi = sorted([l1, l2])
    assert critical_value(law, lo) <= critical_value(law, hi)


def test_p_value_examples():
    law = np.arange(1.0, 11.0)
    assert p_value(law, 0.0) == 1.0
    assert p_value(law, 11.0) == 0.0
    assert p_value(law, 5.0) == 0.6


def test_bootstrap_law_cases():
    d = synthetic(n=60, m=3, k=2, seed=2)
    fit = fit_first_stage(d)
    draws = run(fit, d, BootstrapScheme.wild(), B=5, seed=3)
    s = svd(fit.Pi_hat)
    law = bootstrap_law(draws, s, 1, 0)
    naive = []
    for M in draws.M_star:
        C = s.P.T @ M @ s.Q
        naive.append(np.sort(np.linalg.svd(C, compute_uv=False))[::-1][1] ** 2)
    np.testing.assert_allclose(law, naive, rtol=1e-10)
    single = bootstrap_law(draws, s, 1, 1)
    P2, Q2 = s.P[:, 1:], s.Q[:, 1:]
    np.testing.assert_allclose(single, [np.sum((P2.T @ M @ Q2) ** 2) for M in draws.M_star],
                               rtol=1e-10)
    zero = type(draws)(M_star=np.zeros_like(draws.M_star), Omega_hat=draws.Omega_hat,
                       M_null=draws.M_null, Omega_null=draws.Omega_null, seed=0,
                       scheme=draws.scheme, n_scale=60)
    assert np.all(bootstrap_law(zero, s, 1, 0) == 0)
    with pytest.raises(InvalidStateError):
        bootstrap_law(draws, s, 0, 1)


def test_config_validation():
    with pytest.raises(InvalidInputError):
        TestConfig(alpha=0.05, beta=0.05)
    with pytest.raises(InvalidInputError):
        TestConfig(B=0)
    with pytest.raises(InvalidInputError):
        TestConfig(kappa_n=-1)
    with pytest.raises(InvalidRankError, match="strictly less"):
        TestConfig(r=2).resolve_rank(2)
    assert TestConfig().resolve_rank(3) == 2


def test_defaults():
    cfg = TestConfig()
    assert (cfg.alpha, cfg.beta, cfg.B, cfg.scheme.kind, cfg.r, cfg.kappa_n) == \
        (0.05, 0.005, 1000, "wild", None, None)
    d = synthetic(n=81, m=3, k=2)
    rep = run_test(d, TestConfig(B=100))
    assert rep.r == 1 and rep.kappa_n == pytest.approx(81 ** -0.25)


def test_first_step_rejection():
    d = synthetic(n=300, m=3, k=2, Pi=[[2.0, 0.0], [0.0, 2.0], [1.0, 1.0]], seed=1)
    res = run_two_step(d, TestConfig(r=1, B=200))
    assert res.first_step_rejected and res.rank_estimate == 2
    assert res.decision == "reject" and res.p_value is None and res.statistic is None


def test_analytic_zero_rank_path():
    rng = np.random.default_rng(3)
    n = 50
    Z = rng.standard_normal((n, 3))
    W = rng.standard_normal((n, 1))
    X = np.column_stack([np.ones(n), W]) @ rng.standard_normal((2, 2))  # no instrument signal
    d = Dataset.from_arrays(X, Z, W)
    cfg = TestConfig(r=1, B=100, kappa_n=1e-8, run_analytic=True)
    res = run_analytic(d, cfg)
    assert res.rank_estimate == 0

    # r_hat = 0: the law is phi of each full draw
    d = synthetic(n=50, seed=4)
    cfg = TestConfig(r=1, B=50, kappa_n=1e6)
    prep = prepare(d, cfg)
    res = run_analytic(d, cfg, prep)
    assert res.rank_estimate == 0
    law = bootstrap_law(prep.draws, prep.svd, 1, 0)
    np.testing.assert_allclose(law, [phi(M, 1) for M in prep.draws.M_star], rtol=1e-9)


def test_allrank_rows(klein):
    cfg = TestConfig(B=200, run_analytic=True, allrank=True)
    rows = run_allrank(klein, cfg)
    assert [r.r for r in rows] == [0, 1]
    assert rows[0].statistic >= rows[1].statistic
    assert rows[0].statistic == pytest.approx(69.488582, abs=1e-4)
    assert rows[1].statistic == pytest.approx(8.1005329, abs=1e-4)
    rep = run_test(klein, cfg)
    assert rep.allrank_table[1].two_step == rep.two_step


@given(st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_decision_duality(seed):
    d = synthetic(n=40, m=3, k=2, Pi=[[0.3, 0.0], [0.0, 0.0], [0.0, 0.0]], seed=seed)
    cfg = TestConfig(r=1, B=200, seed=seed, run_analytic=True)
    prep = prepare(d, cfg)
    for res, p_cut in ((run_two_step(d, cfg, prep), cfg.alpha - cfg.beta),
                       (run_analytic(d, cfg, prep), cfg.alpha)):
        if res.first_step_rejected:
            continue
        law = np.sort(bootstrap_law(prep.draws, prep.svd, 1, res.rank_estimate))
        by_p = res.p_value < p_cut
        by_cv = res.statistic > res.critical_value
        assert (res.decision == "reject") == by_p
        # p-based rejection implies exceeding the critical value; the converse can
        # only fail between the order statistic and the next one
        assert by_cv or not by_p
        if by_cv and not by_p:
            j = int(np.floor(round(cfg.B * res.level, 9)))
            assert law[j - 1] < res.statistic <= law[j]


def test_report_deterministic_and_round_trip(klein):
    cfg = TestConfig(B=300, run_analytic=True, allrank=True, seed=5)
    a, b = run_test(klein, cfg), run_test(klein, cfg)
    assert a.to_dict() == b.to_dict()
    assert TestReport.from_dict(a.to_dict()) == a


def test_reparameterized_instruments_kp_first_step():
    d = synthetic(n=120, m=3, k=2, seed=6)
    C = np.array([[2.0, 0.3, 0.0], [0.1, 1.0, 0.4], [0.0, -0.5, 1.5]])
    d2 = Dataset(X=d.X, Z=d.Z @ C, W=d.W)
    cfg = TestConfig(B=400, seed=2)
    p1, p2 = prepare(d, cfg), prepare(d2, cfg)
    np.testing.assert_allclose(p2.fit.Pi_hat, np.linalg.solve(C, p1.fit.Pi_hat), atol=1e-10)
    s1, _ = kp_statistic(p1.fit.Pi_hat, p1.draws.Omega_null, 0, 120)
    s2, _ = kp_statistic(p2.fit.Pi_hat, p2.draws.Omega_null, 0, 120)
    assert s2 == pytest.approx(s1, rel=1e-6)
    assert p1.sequential.value == p2.sequential.value


def test_more_endogenous_than_instruments():
    d = synthetic(n=60, m=2, k=3, seed=1)
    rep = run_test(d, TestConfig(B=100, run_analytic=True))
    assert rep.r == 1 and len(rep.singular_values) == 2
    assert any("transposed" in w for w in rep.warnings)


def test_cluster_and_block_runs():
    d = synthetic(n=60, seed=7)
    dc = Dataset(X=d.X, Z=d.Z, W=d.W, cluster_ids=np.array([str(i % 6) for i in range(60)]))
    rep = run_test(dc, TestConfig(B=100, scheme=BootstrapScheme.cluster(dc.cluster_ids)))
    assert rep.scheme == {"kind": "cluster", "n_clusters": 6}
    rep = run_test(d, TestConfig(B=100, scheme=BootstrapScheme.block(3), run_analytic=True))
    assert 0 <= rep.analytic.p_value <= 1


def test_simulate_first_stage_shapes():
    from bootrank.simulate import simulate_first_stage
    d = simulate_first_stage(30, np.zeros((3, 2)), np.random.default_rng(0), intercept=1.0)
    assert (d.n, d.m, d.k, d.ell) == (30, 3, 2, 1)
