import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from anovapower.distributions import (
    FParams,
    central_f_cdf,
    central_f_quantile,
    find_increasing_root,
    noncentral_f_cdf,
    power_from_lambda,
    regularized_incomplete_beta,
)
from anovapower.errors import DomainError

dfs = st.floats(min_value=0.5, max_value=400.0)
lams = st.floats(min_value=0.0, max_value=300.0)


def poisson_mixture_oracle(x, df1, df2, lam):
    """Direct Poisson-weighted beta sum with scipy primitives, no recurrences."""
    u = df1 * x / (df1 * x + df2)
    h = lam / 2.0
    hi = int(h + 40 * math.sqrt(h + 1) + 50)
    j = np.arange(hi)
    return float(np.sum(stats.poisson.pmf(j, h) * special.betainc(df1 / 2 + j, df2 / 2, u)))


class TestIncompleteBeta:
    @pytest.mark.parametrize(
        "x,p,q", [(0.3, 2.0, 3.0), (0.9, 0.5, 0.5), (1e-5, 10.0, 0.7), (0.999, 200.0, 3.5), (0.5, 1000.0, 1000.0)]
    )
    def test_matches_scipy(self, x, p, q):
        assert regularized_incomplete_beta(x, p, q) == pytest.approx(special.betainc(p, q, x), rel=1e-12, abs=1e-15)

    def test_endpoints(self):
        assert regularized_incomplete_beta(0.0, 2.0, 3.0) == 0.0
        assert regularized_incomplete_beta(1.0, 2.0, 3.0) == 1.0

    @given(st.floats(0.001, 0.999), dfs, dfs)
    def test_reflection(self, x, p, q):
        lhs = regularized_incomplete_beta(x, p, q)
        rhs = 1.0 - regularized_incomplete_beta(1.0 - x, q, p)
        assert lhs == pytest.approx(rhs, abs=1e-12)

    @pytest.mark.parametrize("args", [(-0.1, 1, 1), (1.1, 1, 1), (0.5, 0, 1), (0.5, 1, -2)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            regularized_incomplete_beta(*args)


class TestCentralF:
    def test_lambda_zero_reduction(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            d1, d2 = rng.uniform(0.5, 200, 2)
            x = rng.uniform(0.01, 8)
            assert abs(noncentral_f_cdf(x, FParams(d1, d2, 0.0)) - central_f_cdf(x, d1, d2)) <= 1e-13

    @pytest.mark.parametrize("d1,d2", [(1, 1), (5, 6), (14, 42.28), (30, 36), (2.5, 1000)])
    def test_cdf_matches_scipy(self, d1, d2):
        for x in (0.05, 0.5, 1.0, 2.7, 20.0):
            assert central_f_cdf(x, d1, d2) == pytest.approx(stats.f.cdf(x, d1, d2), rel=1e-11, abs=1e-14)

    @pytest.mark.parametrize("gamma", [1e-6, 0.05, 0.5, 0.9, 0.95, 0.999999])
    @pytest.mark.parametrize("d1,d2", [(1, 2), (5, 6), (10, 120), (0.7, 3.3)])
    def test_quantile(self, gamma, d1, d2):
        x = central_f_quantile(gamma, d1, d2)
        assert central_f_cdf(x, d1, d2) == pytest.approx(gamma, rel=1e-11)
        assert x == pytest.approx(stats.f.ppf(gamma, d1, d2), rel=1e-9)

    def test_quantile_domain(self):
        for g in (0.0, 1.0, -0.5):
            with pytest.raises(DomainError):
                central_f_quantile(g, 3, 4)
        with pytest.raises(DomainError):
            central_f_quantile(0.5, 0, 4)


class TestNoncentralF:
    @pytest.mark.parametrize(
        "x,d1,d2,lam",
        [(1.0, 5, 6, 8.0), (2.77, 5, 30, 19.64), (0.3, 1, 1, 0.5), (3.0, 30, 36, 4.8), (1.5, 10, 1000, 250.0)],
    )
    def test_matches_two_oracles(self, x, d1, d2, lam):
        ours = noncentral_f_cdf(x, FParams(d1, d2, lam))
        assert ours == pytest.approx(poisson_mixture_oracle(x, d1, d2, lam), abs=1e-11)
        assert ours == pytest.approx(stats.ncf.cdf(x, d1, d2, lam), abs=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.01, 20.0), dfs, dfs, lams)
    def test_property_against_mixture(self, x, d1, d2, lam):
        ours = noncentral_f_cdf(x, FParams(d1, d2, lam))
        assert 0.0 <= ours <= 1.0
        assert ours == pytest.approx(poisson_mixture_oracle(x, d1, d2, lam), abs=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(dfs, dfs, st.floats(0.0, 100.0), st.floats(0.01, 50.0))
    def test_decreasing_in_lambda(self, d1, d2, lam, step):
        x = 1.3
        assert noncentral_f_cdf(x, FParams(d1, d2, lam + step)) <= noncentral_f_cdf(x, FParams(d1, d2, lam)) + 1e-14

    def test_limits(self):
        p = FParams(4, 9, 3.0)
        assert noncentral_f_cdf(0.0, p) == 0.0
        assert noncentral_f_cdf(math.inf, p) == 1.0
        with pytest.raises(DomainError):
            noncentral_f_cdf(-1.0, p)

    @pytest.mark.parametrize("kwargs", [dict(df1=0, df2=1), dict(df1=1, df2=-1), dict(df1=1, df2=1, lam=-1.0)])
    def test_params_validated(self, kwargs):
        with pytest.raises(DomainError):
            FParams(**kwargs)


class TestPower:
    def test_power_at_zero_lambda_is_alpha(self):
        for alpha in (0.01, 0.05, 0.1):
            assert power_from_lambda(alpha, FParams(5, 6, 0.0)) == pytest.approx(alpha, abs=1e-12)

    def test_reference_value(self):
        # (b, c, n) = (6, 2, 2) of the nested three-factor model
        assert power_from_lambda(0.05, FParams(5, 30, 19.636363636363637)) == pytest.approx(0.897849, abs=5e-7)

    @settings(max_examples=40, deadline=None)
    @given(dfs, dfs, lams, st.floats(0.01, 0.2))
    def test_power_bounds(self, d1, d2, lam, alpha):
        p = power_from_lambda(alpha, FParams(d1, d2, lam))
        assert alpha - 1e-10 <= p <= 1.0

    def test_real_degrees_of_freedom(self):
        p = power_from_lambda(0.1, FParams(14.0, 42.279122951880645, 24.56071450518482))
        assert p == pytest.approx(0.9, abs=1e-9)


class TestRootFinder:
    def test_simple(self):
        assert find_increasing_root(lambda x: x**3 - 2, 0.0, 2.0) == pytest.approx(2 ** (1 / 3), abs=1e-12)

    def test_flat_then_steep(self):
        root = find_increasing_root(lambda x: math.tanh(50 * (x - 0.7)), 0.0, 10.0)
        assert root == pytest.approx(0.7, abs=1e-12)

    def test_endpoints(self):
        assert find_increasing_root(lambda x: x, 0.0, 1.0) == 0.0
        assert find_increasing_root(lambda x: x - 1, 0.0, 1.0) == 1.0

    def test_not_bracketed(self):
        with pytest.raises(DomainError):
            find_increasing_root(lambda x: x + 1, 0.0, 1.0)
