import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from doselab.stat_core import (
    g_function,
    implied_alpha,
    linear_cdf_error,
    normal_cdf,
    normal_quantile,
    power_exact,
    power_linear,
    power_linear_intercept,
    sample_size,
)

mpmath.mp.dps = 40


def _mp_cdf(x):
    return float(mpmath.ncdf(mpmath.mpf(x)))


def _mp_quantile(p):
    return float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(p) - 1))


class TestNormalCdf:
    def test_zero(self):
        assert normal_cdf(0.0) == 0.5

    @pytest.mark.parametrize("x,expected", [(1.959964, 0.975), (-1.644854, 0.05)])
    def test_reference_points(self, x, expected):
        assert normal_cdf(x) == pytest.approx(expected, abs=1e-6)

    @pytest.mark.parametrize("x", np.linspace(-8, 8, 81))
    def test_matches_high_precision_oracle(self, x):
        assert abs(normal_cdf(float(x)) - _mp_cdf(float(x))) <= 1e-12

    @given(st.floats(-30, 30))
    def test_symmetry(self, x):
        assert abs(normal_cdf(-x) + normal_cdf(x) - 1.0) <= 1e-12

    def test_strictly_increasing(self):
        xs = np.linspace(-6, 6, 2001)
        vals = [normal_cdf(float(x)) for x in xs]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite(self, bad):
        with pytest.raises(ValueError):
            normal_cdf(bad)


class TestNormalQuantile:
    def test_median(self):
        assert normal_quantile(0.5) == 0.0

    @pytest.mark.parametrize("p,expected", [(0.05, -1.644854), (0.975, 1.959964)])
    def test_reference_points(self, p, expected):
        assert normal_quantile(p) == pytest.approx(expected, abs=1e-5)

    @pytest.mark.parametrize("p", [1e-12, 1e-6, 0.001, 0.02, 0.0243, 0.1, 0.3, 0.49, 0.7, 0.9, 0.99, 0.999999])
    def test_against_oracle(self, p):
        assert normal_quantile(p) == pytest.approx(_mp_quantile(p), rel=1e-12, abs=1e-12)

    @given(st.floats(1e-10, 1 - 1e-10))
    def test_round_trip(self, p):
        assert abs(normal_cdf(normal_quantile(p)) - p) <= 1e-10

    # below ~1e-6, 1 - p itself is not representable closely enough
    @given(st.floats(1e-6, 0.5))
    def test_odd_symmetry(self, p):
        assert normal_quantile(p) == pytest.approx(-normal_quantile(1 - p), abs=1e-9)

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.1])
    def test_domain(self, bad):
        with pytest.raises(ValueError):
            normal_quantile(bad)

    def test_increasing(self):
        ps = np.linspace(0.001, 0.999, 999)
        qs = [normal_quantile(float(p)) for p in ps]
        assert all(b > a for a, b in zip(qs, qs[1:]))


class TestSampleSize:
    def test_examples(self):
        assert sample_size(0.05, 0.20, 0.5) == pytest.approx(98.9209157, abs=1e-6)
        assert sample_size(0.025, 0.10, 0.4) == pytest.approx(262.6855765, abs=1e-6)

    def test_inverse_square_in_delta(self):
        assert sample_size(0.05, 0.20, 1.0) == pytest.approx(sample_size(0.05, 0.20, 0.5) / 4, rel=1e-14)

    def test_zero_delta(self):
        with pytest.raises(ValueError):
            sample_size(0.05, 0.2, 0.0)

    @pytest.mark.parametrize("alpha,beta_err", [(0.0, 0.2), (0.5, 0.2), (0.05, 0.6), (0.05, 0.0)])
    def test_bad_error_rates(self, alpha, beta_err):
        with pytest.raises(ValueError):
            sample_size(alpha, beta_err, 0.5)


class TestPower:
    def test_round_trip_example(self):
        assert power_exact(98.92, 0.5, 0.05) == pytest.approx(0.80, abs=1e-3)

    def test_n100(self):
        assert power_exact(100, 0.5, 0.05) == pytest.approx(0.8037649400, abs=1e-9)

    def test_tiny_n_tends_to_alpha(self):
        assert power_exact(1e-12, 0.5, 0.05) == pytest.approx(0.05, abs=1e-6)

    @pytest.mark.parametrize("alpha", [0.025, 0.05, 0.1])
    @pytest.mark.parametrize("beta_err", [0.1, 0.2, 0.3, 0.4, 0.5])
    @pytest.mark.parametrize("delta", [0.2, 0.4, 0.6, 0.8, 1.0])
    def test_round_trip_grid(self, alpha, beta_err, delta):
        n = sample_size(alpha, beta_err, delta)
        assert abs(power_exact(n, delta, alpha) - (1 - beta_err)) <= 1e-9

    def test_monotone(self):
        ns = np.linspace(5, 500, 200)
        ps = [power_exact(float(n), 0.3, 0.05) for n in ns]
        assert all(b > a for a, b in zip(ps, ps[1:]))
        ds = np.linspace(0.05, 1.5, 200)
        ps = [power_exact(80, float(d), 0.05) for d in ds]
        assert all(b > a for a, b in zip(ps, ps[1:]))

    def test_linear_example(self):
        lin = power_linear(90, 0.3, 0.10)
        assert lin == pytest.approx(0.5564397134, abs=1e-9)
        assert abs(lin - power_exact(90, 0.3, 0.10)) < 0.02

    def test_linear_center(self):
        alpha = 0.05
        # choose N so that sqrt(N) * delta / 2 + F(alpha) == 0
        n = (2 * -normal_quantile(alpha) / 0.5) ** 2
        assert power_linear(n, 0.5, alpha) == pytest.approx(0.5, abs=1e-12)
        assert power_exact(n, 0.5, alpha) == pytest.approx(0.5, abs=1e-12)

    def test_intercept_near_zero_at_alpha_10pct(self):
        assert power_linear_intercept(0.10) == pytest.approx(-0.0112651040, abs=1e-9)

    def test_linear_not_clamped(self):
        assert power_linear(10_000, 1.0, 0.05) > 1.0

    def test_power_proportional_to_strength(self):
        # pairs of designs whose powers both sit in [0.25, 0.75]
        alpha = 0.10
        checked = 0
        for n1 in np.linspace(20, 200, 19):
            for d1 in np.linspace(0.1, 0.8, 15):
                for n2 in np.linspace(20, 200, 19):
                    d2 = 0.3
                    r = d1 * math.sqrt(n1) / (d2 * math.sqrt(n2))
                    if not 1.0 <= r <= 2.0:
                        continue
                    x1 = power_exact(float(n1), float(d1), alpha)
                    x2 = power_exact(float(n2), d2, alpha)
                    if 0.25 <= x1 <= 0.75 and 0.25 <= x2 <= 0.75:
                        assert abs(x1 / x2 - r) <= 0.08
                        checked += 1
        assert checked > 100


class TestGFunction:
    def test_reference_point(self):
        g = g_function(0.5, 1.5)
        assert g == pytest.approx(-1.2921818979, abs=1e-9)
        assert normal_cdf(g) == pytest.approx(0.0981470795, abs=1e-9)

    def test_second_point(self):
        assert implied_alpha(0.3, 2.0) == pytest.approx(0.0607550387, abs=1e-9)

    @pytest.mark.parametrize("r", [1.0, 0.5, 1.0 + 1e-12])
    def test_rejects_r_at_most_one(self, r):
        with pytest.raises(ValueError):
            g_function(0.5, r)

    def test_band_over_practical_grid(self):
        for x in np.arange(0.25, 0.7501, 0.01):
            for r in np.arange(1.2, 2.0001, 0.1):
                assert 0.04 <= implied_alpha(float(x), float(r)) <= 0.11


class TestLinearCdfError:
    def test_zero(self):
        assert linear_cdf_error(0.0) == 0.0

    def test_upper_quartile(self):
        assert linear_cdf_error(normal_quantile(0.75)) == pytest.approx(0.0190824791, abs=1e-9)

    def test_band(self):
        lo, hi = normal_quantile(0.25), normal_quantile(0.75)
        assert max(linear_cdf_error(float(x)) for x in np.linspace(lo, hi, 2001)) < 0.02

    def test_fails_far_out(self):
        assert linear_cdf_error(3.0) > 0.02
