import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from statsmodels.stats.proportion import proportion_confint

from hardrods.statcheck import StatReport, fraction_ci, ks_statistic, profile_deviation


def exp_cdf(rate):
    return lambda x: -np.expm1(-rate * np.asarray(x))


class TestKS:
    def test_single_point(self):
        assert ks_statistic([math.log(2)], exp_cdf(1.0)) == pytest.approx(0.5)

    @pytest.mark.parametrize("n", [1, 7, 100])
    def test_exact_quantiles(self, n):
        q = -np.log1p(-(np.arange(1, n + 1) - 0.5) / n)
        assert ks_statistic(q, exp_cdf(1.0)) == pytest.approx(0.5 / n, abs=1e-12)

    def test_detects_wrong_law(self):
        sample = np.random.default_rng(0).exponential(1.0, 10_000)
        assert ks_statistic(sample, exp_cdf(2.0)) >= 0.15

    def test_matches_scipy(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            sample = rng.normal(size=rng.integers(1, 500))
            ours = ks_statistic(sample, stats.norm.cdf)
            assert ours == pytest.approx(stats.kstest(sample, "norm").statistic, abs=1e-14)

    def test_unsorted_input(self):
        s = np.array([3.0, 0.1, 1.2])
        assert ks_statistic(s, exp_cdf(1.0)) == ks_statistic(np.sort(s), exp_cdf(1.0))

    def test_empty(self):
        with pytest.raises(ValueError):
            ks_statistic([], exp_cdf(1.0))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0.0, 20.0), min_size=1, max_size=50))
    def test_range_and_monotone_invariance(self, values):
        x = np.array(values)
        d = ks_statistic(x, exp_cdf(1.0))
        assert 0.0 <= d <= 1.0
        # y = sqrt(x) with F_y(y) = F_x(y^2)
        d2 = ks_statistic(np.sqrt(x), lambda y: exp_cdf(1.0)(np.asarray(y) ** 2))
        assert d2 == pytest.approx(d, abs=1e-12)


def make_profile(edges, values):
    return SimpleNamespace(bin_edges=np.asarray(edges), values=np.asarray(values))


class TestProfileDeviation:
    curve = staticmethod(lambda x: 1 - np.asarray(x) ** 2)

    def test_exact(self):
        edges = np.linspace(0, 1, 11)
        mid = 0.5 * (edges[1:] + edges[:-1])
        assert profile_deviation(make_profile(edges, self.curve(mid)), self.curve) == (0.0, 0.0)

    def test_constant_offset(self):
        edges = np.linspace(0, 1, 11)
        mid = 0.5 * (edges[1:] + edges[:-1])
        sup, l1 = profile_deviation(make_profile(edges, self.curve(mid) + 0.03), self.curve)
        assert sup == pytest.approx(0.03)
        assert l1 == pytest.approx(0.03)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
    def test_sup_dominates_l1(self, values):
        edges = np.cumsum(np.r_[0, np.linspace(0.5, 1.5, len(values))])
        sup, l1 = profile_deviation(make_profile(edges, values), lambda x: np.zeros_like(x))
        assert sup >= l1 - 1e-15


class TestFractionCI:
    def test_reference_value(self):
        # Wilson score formula with z=1.959964, cross-checked against statsmodels
        lo, hi = fraction_ci(90, 100, 0.95)
        assert lo == pytest.approx(0.825634, abs=1e-6)
        assert hi == pytest.approx(0.944771, abs=1e-6)

    def test_matches_statsmodels(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            n = int(rng.integers(1, 500))
            k = int(rng.integers(0, n + 1))
            for level in (0.90, 0.95, 0.99):
                ref = proportion_confint(k, n, alpha=1 - level, method="wilson")
                assert fraction_ci(k, n, level) == pytest.approx(ref, abs=2e-6)

    def test_edges(self):
        assert fraction_ci(0, 17)[0] == 0.0
        assert fraction_ci(17, 17)[1] == 1.0

    @pytest.mark.parametrize("k,n", [(-1, 5), (6, 5), (0, 0)])
    def test_invalid(self, k, n):
        with pytest.raises(ValueError):
            fraction_ci(k, n)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 1000).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
    def test_brackets_and_widens(self, kn):
        k, n = kn
        widths = []
        for level in (0.90, 0.95, 0.99):
            lo, hi = fraction_ci(k, n, level)
            assert lo <= k / n <= hi
            widths.append(hi - lo)
        assert widths[0] <= widths[1] <= widths[2]


def test_report_orientation():
    assert StatReport("a", 0.01, 0.02).passed
    assert not StatReport("b", 0.5, 0.9, orientation=">=").passed
    assert "FAIL" in StatReport("c", 1.0, 0.0).line()
    with pytest.raises(ValueError):
        StatReport("d", 0.0, 0.0, orientation="<")
