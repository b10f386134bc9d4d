import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from dwgam import distribution as dw
from dwgam.distribution import DWParams, MomentOptions, ParameterDomainError, TruncationWarning

# Reference values below were produced once with mpmath at 50 digits, a
# brute-force cdf scan, or mpmath.findroot, and are frozen here.
PMF_3_08_25 = 0.03006249476612031310920185
LOG_PMF_50_0999_12 = -6.051247386746464606817461
MEAN_07_2 = 0.9839136844643902341505646
VAR_07_2 = 0.6784814145545525239765765
VR_05_35 = 0.5011773369615273307744658
CQ_09_08_15 = 3.739736869196337787569787

Q_GRID = np.round(np.arange(0.05, 0.951, 0.05), 2)
BETA_GRID = np.array([0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0])
TAU_GRID = np.linspace(0.001, 0.999, 199)


def test_pmf_examples():
    assert dw.pmf(0, 0.3, 2.0) == pytest.approx(0.7, abs=1e-15)
    assert dw.pmf(1, 0.5, 1.0) == pytest.approx(0.25, abs=1e-15)
    assert dw.pmf(3, 0.8, 2.5) == pytest.approx(PMF_3_08_25, rel=1e-12)


def test_pmf_negative_is_zero():
    assert dw.pmf(-1, 0.5, 1.0) == 0.0


@pytest.mark.parametrize("q,beta", [(0.0, 1.0), (1.0, 1.0), (1.5, 1.0), (0.5, 0.0), (0.5, -1.0)])
def test_domain_errors(q, beta):
    with pytest.raises(ParameterDomainError):
        dw.pmf(0, q, beta)
    with pytest.raises(ParameterDomainError):
        DWParams(q, beta)


def test_log_pmf_examples():
    assert dw.log_pmf(0, 0.3, 2.0) == pytest.approx(math.log(0.7), rel=1e-14)
    assert dw.log_pmf(1, 0.5, 1.0) == pytest.approx(math.log(0.25), rel=1e-14)
    assert dw.log_pmf(50, 0.999, 1.2) == pytest.approx(LOG_PMF_50_0999_12, rel=1e-12)


def test_log_pmf_finite_where_naive_underflows():
    # naive pmf is exactly 0 here (both powers underflow or cancel)
    assert dw.pmf(400, 0.2, 2.0) == 0.0
    lp = dw.log_pmf(400, 0.2, 2.0)
    assert np.isfinite(lp)
    assert lp == pytest.approx(-(400.0 ** 2) * -math.log(0.2) + math.log1p(-0.2 ** 801), rel=1e-12)
    # q extremely close to 1: naive difference loses all digits
    lam = 1e-12
    lp = dw.log_pmf_rate(3, lam, 1.0)
    assert lp == pytest.approx(-3 * lam + math.log(-math.expm1(-lam)), rel=1e-12)


def test_log_pmf_matches_log_pmf_grid():
    # reference log(pmf) in 40-digit arithmetic, so cancellation in the naive
    # double-precision pmf does not pollute the comparison
    mp.mp.dps = 40
    ys = [0, 1, 2, 5, 13, 40]
    for q in Q_GRID:
        for beta in BETA_GRID:
            got = dw.log_pmf(ys, q, beta)
            qm, bm = mp.mpf(float(q)), mp.mpf(float(beta))
            for y, g in zip(ys, got):
                ref = qm ** (mp.mpf(y) ** bm) - qm ** (mp.mpf(y + 1) ** bm)
                if ref > mp.mpf("1e-300"):
                    assert g == pytest.approx(float(mp.log(ref)), rel=1e-12, abs=1e-13)
                    if dw.pmf(y, q, beta) > 1e-300:
                        assert np.isfinite(g)
                else:
                    assert np.isfinite(g) or ref == 0


def test_cdf_examples():
    assert dw.cdf(-1, 0.4, 1.7) == 0.0
    assert dw.cdf(0, 0.3, 2.0) == pytest.approx(0.7, abs=1e-15)
    assert dw.cdf(4, 0.5, 1.0) == pytest.approx(0.96875, abs=1e-15)


def test_quantile_examples():
    assert dw.quantile(0.5, 0.5, 1.0) == 0
    assert dw.quantile(0.5, 0.9, 2.0) == 2
    assert dw.quantile(0.05, 0.3, 2.0) == 0
    with pytest.raises(ValueError):
        dw.quantile(1.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        dw.quantile(0.0, 0.5, 1.0)


def test_continuous_quantile_examples():
    assert dw.continuous_quantile(0.5, 0.5, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert dw.continuous_quantile(0.75, 0.5, 1.0) == pytest.approx(1.0, abs=1e-14)
    assert dw.continuous_quantile(0.9, 0.8, 1.5) == pytest.approx(CQ_09_08_15, rel=1e-12)
    assert dw.continuous_quantile(0.05, 0.3, 2.0) < 0


def test_median_examples():
    assert dw.median(0.5, 1.0) == 0
    assert dw.median(0.9, 2.0) == 2
    assert dw.median(0.99, 1.0) == 68


def _brute_quantile(tau, q, beta):
    y = 0
    while dw.cdf(y, q, beta) < tau:
        y += 1
    return y


def test_quantile_matches_brute_force_scan():
    rng = np.random.default_rng(11)
    for _ in range(300):
        q, beta, tau = rng.uniform(0.05, 0.98), rng.uniform(0.3, 5), rng.uniform(0.01, 0.99)
        assert dw.quantile(tau, q, beta) == _brute_quantile(tau, q, beta)


def test_grid_invariants():
    for q in Q_GRID:
        for beta in BETA_GRID:
            # telescoping normalization
            # telescoping normalization; for the heaviest tails Y* is ~1e9, so
            # the partial sum is taken up to min(Y*, 2e5)
            ystar = int(dw.quantile(1 - 1e-10, q, beta))
            assert dw.cdf(ystar, q, beta) >= 1 - 1e-9
            top = min(ystar, 200_000)
            ys = np.arange(top + 1)
            total = math.fsum(dw.pmf(ys, q, beta))
            assert total == pytest.approx(dw.cdf(top, q, beta), abs=1e-12)
            assert np.all(np.diff(dw.cdf(ys, q, beta)) >= 0)
            # duality
            m = dw.quantile(TAU_GRID, q, beta)
            assert np.all(dw.cdf(m, q, beta) >= TAU_GRID)
            below = dw.cdf(m - 1, q, beta)
            assert np.all((m == 0) | (below < TAU_GRID))
            # ceil of the continuous quantile; the two can only disagree where
            # tau is a cdf atom up to rounding (e.g. tau=0.9, q=0.1)
            cq = dw.continuous_quantile(TAU_GRID, q, beta)
            differ = m != np.maximum(0, np.ceil(cq)).astype(int)
            lo = np.minimum(m, np.ceil(cq)) - 1
            tie = np.minimum(np.abs(dw.cdf(lo, q, beta) - TAU_GRID),
                             np.abs(dw.cdf(lo + 1, q, beta) - TAU_GRID)) < 1e-13
            assert np.all(~differ | tie), (q, beta, TAU_GRID[differ & ~tie])
            assert dw.median(q, beta) == dw.quantile(0.5, q, beta)


def test_moment_examples():
    assert dw.mean(0.5, 1.0) == pytest.approx(1.0, rel=1e-12)
    assert dw.variance(0.5, 1.0) == pytest.approx(2.0, rel=1e-12)
    assert dw.mean(0.3, 50.0) == pytest.approx(0.3, rel=1e-12)
    assert dw.variance(0.3, 50.0) == pytest.approx(0.21, rel=1e-12)
    assert dw.mean(0.7, 2.0) == pytest.approx(MEAN_07_2, rel=1e-12)
    assert dw.variance(0.7, 2.0) == pytest.approx(VAR_07_2, rel=1e-12)


def test_mean_increasing_in_q():
    for beta in (0.5, 1.0, 2.5):
        means = [dw.mean(q, beta) for q in Q_GRID]
        assert np.all(np.diff(means) > 0)


def test_moment_truncation_flag_and_tail_correction():
    opts = MomentOptions(max_support=1000)
    with pytest.warns(TruncationWarning):
        m = dw.mean(0.999, 1.0, opts)
    # geometric mean q/(1-q) = 999; tail correction keeps it close
    assert m == pytest.approx(999.0, rel=1e-3)
    assert dw.moments(0.999, 1.0, opts).truncated
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert dw.mean(0.999, 1.0) == pytest.approx(999.0, rel=1e-9)


def test_moment_options_validation():
    with pytest.raises(ValueError):
        MomentOptions(tail_tolerance=0)
    with pytest.raises(ValueError):
        MomentOptions(max_support=0)


def test_dispersion_examples():
    assert dw.dispersion_vs_poisson(0.5, 1.0) == pytest.approx(2.0, rel=1e-12)
    assert dw.dispersion_vs_poisson(0.5, 3.5) == pytest.approx(VR_05_35, rel=1e-10)
    assert dw.dispersion_vs_poisson(0.3, 50.0) == pytest.approx(0.7, rel=1e-12)


def test_dispersion_degenerate():
    with pytest.raises(ValueError):
        dw.dispersion_vs_poisson(1e-320, 1.0)


def test_sample_reproducible():
    a = dw.sample(0.5, 1.0, 5, seed=42)
    b = dw.sample(0.5, 1.0, 5, seed=42)
    np.testing.assert_array_equal(a, b)
    assert a.dtype.kind == "i" and np.all(a >= 0)
    with pytest.raises(ValueError):
        dw.sample(0.5, 1.0, 0)


def test_sample_geometric_mean():
    y = dw.sample(0.5, 1.0, 100_000, seed=1)
    assert abs(y.mean() - 1.0) < 3 * math.sqrt(2 / 100_000)


def test_sample_ks():
    # discrete KS: the empirical cdf at the support points must lie within the
    # 1% Kolmogorov band around the model cdf
    n = 100_000
    y = dw.sample(0.7, 2.0, n, seed=5)
    support = np.arange(0, y.max() + 1)
    ecdf = np.searchsorted(np.sort(y), support, side="right") / n
    d = np.max(np.abs(ecdf - dw.cdf(support, 0.7, 2.0)))
    assert d < stats.kstwo.ppf(0.99, n)


def test_interval_censored_identity():
    assert dw.interval_censored_weibull_loglik([0], 0.3, 2.0) == pytest.approx(math.log(0.7), rel=1e-12)
    assert dw.interval_censored_weibull_loglik([0, 1, 2], 0.5, 1.0) == pytest.approx(
        math.log(0.5 * 0.25 * 0.125), rel=1e-12)
    rng = np.random.default_rng(3)
    for _ in range(50):
        q, beta = rng.uniform(0.2, 0.98), rng.uniform(0.4, 4)
        y = dw.sample(q, beta, 200, seed=rng)
        ll = dw.interval_censored_weibull_loglik(y, q, beta)
        assert ll == pytest.approx(np.sum(dw.log_pmf(y, q, beta)), abs=1e-10)
    with pytest.raises(ValueError):
        dw.interval_censored_weibull_loglik([-1], 0.5, 1.0)


def test_dwparams_methods():
    p = DWParams(0.9, 2.0)
    assert p.median() == 2
    assert p.quantile(0.5) == dw.quantile(0.5, 0.9, 2.0)
    assert p.pmf(1) == dw.pmf(1, 0.9, 2.0)
    assert p.mean() == pytest.approx(dw.mean(0.9, 2.0))
    assert len(p.sample(3, seed=0)) == 3


@settings(max_examples=200, deadline=None)
@given(q=st.floats(0.01, 0.995), beta=st.floats(0.2, 8.0), tau=st.floats(1e-6, 1 - 1e-6))
def test_quantile_duality_property(q, beta, tau):
    m = dw.quantile(tau, q, beta)
    assert dw.cdf(m, q, beta) >= tau * (1 - 1e-12)
    assert m == 0 or dw.cdf(m - 1, q, beta) < tau * (1 + 1e-12)


@settings(max_examples=200, deadline=None)
@given(q=st.floats(0.01, 0.995), beta=st.floats(0.2, 8.0), y=st.integers(0, 10_000))
def test_pmf_bounds_property(q, beta, y):
    p = dw.pmf(y, q, beta)
    assert 0.0 <= p <= 1.0
    assert dw.cdf(y, q, beta) >= dw.cdf(y - 1, q, beta)
