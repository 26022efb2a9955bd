"""Regime-harness tests: config validation, reproducibility, thread-count
independence, and the statistical check helpers."""
import math

import numpy as np
import pytest

from cechbetti import limit_constants as lc
from cechbetti.experiments import (
    RegimeConfig,
    check_connectivity_bound,
    check_critical,
    check_poisson,
    check_sparse_clt,
    poisson_gof,
    poisson_lambda,
    run_regime,
    two_sample_chi_square,
)
from cechbetti.limit_constants import McEstimate
from cechbetti.pointproc import UniformCube, c_f_k, stream, unit_ball_volume

DENS = UniformCube(d=2)


def _config(**kw):
    base = dict(
        regime="poisson", d=2, k=1, density=DENS, n_list=[300.0],
        t_grid=np.array([0.8, 1.2]), replicates=50, base_seed=3, truncation=4,
    )
    base.update(kw)
    return RegimeConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        _config(regime="dense")
    with pytest.raises(ValueError):
        _config(regime="sparse")  # gamma required
    with pytest.raises(ValueError):
        _config(regime="sparse", gamma=0.9)  # outside (1/2, 3/4)
    with pytest.raises(ValueError):
        _config(gamma=0.6)  # gamma forbidden outside sparse
    with pytest.raises(ValueError):
        _config(t_grid=np.array([0.5, 0.4]))
    with pytest.raises(ValueError):
        _config(truncation=2)
    cfg = _config(regime="sparse", gamma=0.65)
    assert cfg.scale(2**10) == pytest.approx(2 ** (-6.5))
    assert cfg.rho(100.0) == pytest.approx(100.0**3 * 100.0 ** (-0.65 * 4))


def test_schedules():
    crit = _config(regime="critical", t_grid=np.array([0.3]))
    assert crit.scale(400.0) == pytest.approx(0.05)
    assert 400.0 * crit.scale(400.0) ** 2 == pytest.approx(1.0)  # n s^d = 1
    poi = _config()
    assert poi.rho(777.0) == pytest.approx(1.0)  # rho_n = 1
    assert crit.clt_t_bound == pytest.approx((math.e * math.pi) ** -0.5)


def test_reproducible_and_thread_independent():
    a = run_regime(_config(threads=1))
    b = run_regime(_config(threads=1))
    c = run_regime(_config(threads=3))
    sa, sb, sc = a.largest, b.largest, c.largest
    assert np.array_equal(sa.beta, sb.beta)
    assert np.array_equal(sa.beta, sc.beta)
    assert sa.u_totals == sc.u_totals


def test_single_replicate_no_covariance():
    summary = run_regime(_config(replicates=1))
    st = summary.largest
    assert st.cov_beta() is None and st.var_truncated() is None
    assert summary.to_jsonable()["per_n"]["300.0"]["cov_beta"] is None


def test_doubling_replicates_shrinks_standard_error():
    # SE of the mean ~ sigma/sqrt(R): the R vs 2R ratio should be near 0.71
    s1 = run_regime(_config(n_list=[800.0], replicates=150, base_seed=5))
    s2 = run_regime(_config(n_list=[800.0], replicates=300, base_seed=5))
    x1 = s1.largest.beta[:, 1].astype(float)
    x2 = s2.largest.beta[:, 1].astype(float)
    se1 = x1.std(ddof=1) / math.sqrt(len(x1))
    se2 = x2.std(ddof=1) / math.sqrt(len(x2))
    assert 0.6 <= se2 / se1 <= 0.85


def test_decomposition_identities_in_summary():
    summary = run_regime(_config(replicates=100))
    st = summary.largest
    assert np.array_equal(st.beta, st.smallest + st.remainder)
    assert np.all(st.truncated <= st.beta)
    cov = st.cov_beta()
    assert np.allclose(cov, cov.T)
    w = np.linalg.eigvalsh(cov)
    assert w.min() >= -1e-10 * max(w.max(), 1e-300)


def test_poisson_gof_calibrated():
    rng = stream(50)
    lam = 3.0
    passes = 0
    for rep in range(20):
        x = rng.poisson(lam, size=2000)
        if poisson_gof(x, lam)["p_value"] > 0.01:
            passes += 1
    assert passes >= 18
    # wrong lambda is rejected
    x = rng.poisson(6.0, size=2000)
    assert poisson_gof(x, lam)["p_value"] < 1e-6


def test_two_sample_chi_square_calibrated():
    rng = stream(51)
    a = list(rng.poisson(2.0, size=3000))
    b = list(rng.poisson(2.0, size=3000))
    assert two_sample_chi_square(a, b)["p_value"] > 0.01
    c = list(rng.poisson(4.0, size=3000))
    assert two_sample_chi_square(a, c)["p_value"] < 1e-6


def test_poisson_lambda_scaling_identity():
    vp = McEstimate(5.79, 0.01, 1, 1)
    vm = McEstimate(5.55, 0.01, 1, 1)
    lam1 = poisson_lambda(0.7, 2, 1, 1 / 6, vp, vm)
    lam2 = poisson_lambda(1.4, 2, 1, 1 / 6, vp, vm)
    assert lam2 / lam1 == 2.0**4


def test_check_sparse_report_shape():
    cfg = _config(
        regime="sparse", gamma=0.65, n_list=[256.0, 1024.0],
        t_grid=np.array([1.0]), replicates=200,
    )
    summary = run_regime(cfg)
    mu_hat = lc.mu_matrix(1, np.array([1.0]), DENS, 200_000, 9)
    report = check_sparse_clt(summary, mu_hat)
    assert set(report["checks"]) >= {"mean_vs_mu", "remainder_negligible", "normality"}
    assert isinstance(report["passed"], bool)


def test_check_critical_report_shape():
    cfg = _config(
        regime="critical", n_list=[500.0, 1500.0], t_grid=np.array([0.3]),
        replicates=200,
    )
    summary = run_regime(cfg)
    tables = {3: [lc.eta_table(3, 0.3, 0.3, DENS, 1, 400_000, 60)]}
    report = check_critical(summary, tables)
    assert "class_means" in report["checks"] and "slln_trend" in report["checks"]
    # t = 0.3 is below the uniform-f bound, so CLT diagnostics run
    assert "normality" in report["checks"]
    # beyond the bound they are suppressed with a notice
    cfg2 = _config(regime="critical", n_list=[500.0], t_grid=np.array([0.5]),
                   replicates=100)
    s2 = run_regime(cfg2)
    tables2 = {3: [lc.eta_table(3, 0.5, 0.5, DENS, 1, 200_000, 61)]}
    r2 = check_critical(s2, tables2)
    assert "normality" not in r2["checks"]
    assert any("suppressed" in n for n in r2["notices"])


def test_critical_mean_plateau():
    # n^-1 mean(beta) settles on a finite plateau: consecutive n's agree
    # within combined noise, already at desk scale
    cfg = _config(regime="critical", n_list=[200.0, 1000.0, 5000.0],
                  t_grid=np.array([0.5]), replicates=300)
    summary = run_regime(cfg)
    stats = []
    for n in summary.n_list:
        st = summary.per_n[n]
        mean = st.mean_beta()[0] / n
        se = st.beta[:, 0].std(ddof=1) / math.sqrt(st.replicates) / n
        stats.append((mean, se))
    for (m1, s1), (m2, s2) in zip(stats, stats[1:]):
        assert abs(m2 - m1) <= 4 * math.hypot(s1, s2)
    assert 0 < stats[-1][0] < 1.0


def test_connectivity_bound_cases():
    # i = 2: the bound is exact, never exceeded
    r = check_connectivity_bound(2, 1, 2, 0.1, DENS, 50_000, 8)
    assert r["empirical"] <= r["bound"] + 1e-12
    assert r["passed"]
    # large radius: vacuous but passing
    r = check_connectivity_bound(2, 1, 3, 10.0, DENS, 2_000, 8)
    assert r["empirical"] == 1.0 and r["bound"] > 1.0 and r["passed"]
    # d=2, i=4, r=0.05 fixture
    r = check_connectivity_bound(2, 1, 4, 0.05, DENS, 100_000, 8)
    assert r["bound"] == pytest.approx(16 * (0.05**2 * math.pi) ** 3)
    assert r["passed"]
    with pytest.raises(ValueError):
        check_connectivity_bound(2, 1, 1, 0.1, DENS, 100, 8)
