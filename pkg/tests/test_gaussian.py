import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ndtr

from mqreg import (
    BvnParams,
    bvn_cdf,
    oracle_conditional_quantile,
    oracle_graph,
    std_normal_cdf,
    std_normal_quantile,
    truncated_normal_moments,
)
from mqreg.exceptions import ValidationError


def bvn_quadrature(h, k, rho):
    """Independent adaptive-quadrature route: integrate the conditional CDF."""
    if rho == 0.0:
        return ndtr(h) * ndtr(k)
    den = math.sqrt(1.0 - rho * rho)
    val, _err = quad(
        lambda z: math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        * ndtr((k - rho * z) / den),
        -40.0,
        h,
        epsabs=1e-13,
        limit=200,
    )
    return val


class TestStdNormal:
    def test_cdf_spot_values(self):
        assert std_normal_cdf(0.0) == 0.5
        assert std_normal_cdf(1.959963985) == pytest.approx(0.975, abs=1e-9)

    def test_reflection(self):
        for z in (0.3, 1.1, 2.7):
            assert std_normal_cdf(-z) == pytest.approx(1.0 - std_normal_cdf(z), abs=1e-15)

    def test_quantile_inverts_cdf(self):
        assert std_normal_quantile(0.5) == 0.0
        assert std_normal_quantile(0.975) == pytest.approx(1.959963985, abs=1e-8)
        for p in (0.01, 0.2, 0.77, 0.999):
            assert std_normal_cdf(std_normal_quantile(p)) == pytest.approx(p, abs=1e-12)

    def test_quantile_symmetry(self):
        for p in (0.05, 0.31, 0.48):
            assert std_normal_quantile(p) == pytest.approx(
                -std_normal_quantile(1.0 - p), abs=1e-12
            )


class TestBvnCdf:
    def test_independence_quadrant(self):
        assert bvn_cdf(0.0, 0.0, 0.0) == pytest.approx(0.25, abs=1e-15)

    def test_arcsine_closed_form(self):
        for rho in (-0.9, -0.5, -0.1, 0.3, 0.5, 0.8, 0.95):
            want = 0.25 + math.asin(rho) / (2.0 * math.pi)
            assert bvn_cdf(0.0, 0.0, rho) == pytest.approx(want, abs=1e-12)

    def test_marginalization_limit(self):
        for rho in (-0.6, 0.2, 0.9):
            assert bvn_cdf(8.0, 1.2, rho) == pytest.approx(ndtr(1.2), abs=1e-9)

    def test_product_at_zero_correlation(self):
        for h, k in ((-1.3, 0.4), (0.0, 2.0), (1.7, -2.5)):
            assert bvn_cdf(h, k, 0.0) == pytest.approx(ndtr(h) * ndtr(k), abs=1e-12)

    def test_against_quadrature_grid(self):
        pts = np.linspace(-3.0, 3.0, 5)
        rhos = np.linspace(-0.95, 0.95, 5)
        worst = 0.0
        for h in pts:
            for k in pts:
                for rho in rhos:
                    err = abs(bvn_cdf(h, k, rho) - bvn_quadrature(h, k, rho))
                    worst = max(worst, err)
        assert worst <= 1e-10

    def test_monotone_and_bounded(self):
        rho = 0.6
        grid = np.linspace(-2.5, 2.5, 11)
        for k in (-1.0, 0.5):
            vals = [bvn_cdf(h, k, rho) for h in grid]
            assert np.all(np.diff(vals) >= -1e-14)
        for h in grid:
            for k in grid:
                v = bvn_cdf(h, k, rho)
                assert v <= min(ndtr(h), ndtr(k)) + 1e-13

    def test_extreme_correlation(self):
        # near-comonotone: P -> Phi(min(h, k))
        assert bvn_cdf(0.7, 1.5, 0.99999) == pytest.approx(ndtr(0.7), abs=1e-4)
        assert bvn_cdf(0.7, 1.5, 0.999) == pytest.approx(
            bvn_quadrature(0.7, 1.5, 0.999), abs=1e-10
        )

    def test_rejects_unit_correlation(self):
        with pytest.raises(ValidationError):
            bvn_cdf(0.0, 0.0, 1.0)


class TestTruncatedMoments:
    def test_no_truncation_limit(self):
        m = truncated_normal_moments(0.0, 1.0, 40.0)
        assert m.mean == pytest.approx(0.0, abs=1e-9)
        assert m.variance == pytest.approx(1.0, abs=1e-9)

    def test_half_normal_closed_form(self):
        m = truncated_normal_moments(0.0, 1.0, 0.0)
        assert m.mean == pytest.approx(-math.sqrt(2.0 / math.pi), abs=1e-9)
        assert m.variance == pytest.approx(1.0 - 2.0 / math.pi, abs=1e-9)

    def test_location_scale_equivariance(self):
        base = truncated_normal_moments(0.0, 1.0, -0.7)
        m = truncated_normal_moments(3.0, 2.5, 3.0 + 2.5 * -0.7)
        assert m.mean == pytest.approx(3.0 + 2.5 * base.mean, rel=1e-12)
        assert m.variance == pytest.approx(2.5**2 * base.variance, rel=1e-12)

    @pytest.mark.parametrize("mu", [-1.0, 0.0, 2.0])
    @pytest.mark.parametrize("sigma", [0.5, 1.0, 3.0])
    def test_against_quadrature(self, mu, sigma):
        for alpha in np.linspace(-3.0, 3.0, 7):
            q = mu + sigma * alpha
            mass = ndtr(alpha)
            phi = lambda t: math.exp(-0.5 * ((t - mu) / sigma) ** 2) / (
                sigma * math.sqrt(2 * math.pi)
            )
            m1, _ = quad(lambda t: t * phi(t), mu - 40 * sigma, q, epsabs=1e-13)
            m2, _ = quad(lambda t: t * t * phi(t), mu - 40 * sigma, q, epsabs=1e-13)
            mean = m1 / mass
            var = m2 / mass - mean**2
            got = truncated_normal_moments(mu, sigma, q)
            assert got.mean == pytest.approx(mean, abs=1e-9)
            assert got.variance == pytest.approx(var, abs=1e-9)

    def test_deep_tail_asymptotic_branch(self):
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 60
        alpha = mpmath.mpf(-45)
        lam = mpmath.npdf(alpha) / mpmath.ncdf(alpha)
        want_mean = float(-lam)
        want_var = float(1 - lam * (lam + alpha))
        got = truncated_normal_moments(0.0, 1.0, -45.0)
        assert got.mean == pytest.approx(want_mean, rel=1e-10)
        assert got.variance == pytest.approx(want_var, rel=1e-9)
        assert got.variance > 0.0

    def test_tighter_than_untruncated(self):
        m = truncated_normal_moments(1.0, 2.0, 2.0)
        assert m.mean < 1.0
        assert m.variance < 4.0

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValidationError):
            truncated_normal_moments(0.0, 0.0, 1.0)


class TestConditionalQuantile:
    def test_independence_reduces_to_marginal(self):
        params = BvnParams(1.0, -2.0, 2.0, 0.5, 0.0)
        for p in (0.1, 0.5, 0.9):
            got = oracle_conditional_quantile(params, 0.3, p)
            want = -2.0 + 0.5 * std_normal_quantile(p)
            assert got == pytest.approx(want, abs=1e-9)

    def test_frozen_high_correlation_median(self):
        # independent quadrature oracle: -0.6576456871078 (also matched by a
        # 1e7-draw simulation to 1e-3)
        params = BvnParams(0.0, 0.0, 1.0, 1.0, 0.9)
        got = oracle_conditional_quantile(params, 0.0, 0.5)
        assert got == pytest.approx(-0.657645687108, abs=1e-9)
        assert got < 0.0

    def test_monotone_in_level(self):
        params = BvnParams(0.0, 0.0, 1.0, 1.0, 0.4)
        qs = [
            oracle_conditional_quantile(params, -0.5, p)
            for p in (0.05, 0.3, 0.6, 0.9, 0.9999)
        ]
        assert np.all(np.diff(qs) > 0.0)
        assert qs[-1] > 2.0


class TestOracleGraph:
    def test_independent_symmetric_point(self):
        from mqreg._grid import grid_levels

        params = BvnParams(0.0, 0.0, 1.0, 1.0, 0.0)
        points = oracle_graph(params, 0.25, 0.05)
        levels = grid_levels(0.25, 0.05)
        assert len(points) == len(levels)
        # tau1 = 0.5 factorizes 0.25 as 0.5 * 0.5: both coordinates at the median
        i = int(np.argmin(np.abs(levels - 0.5)))
        assert levels[i] == pytest.approx(0.5, abs=1e-12)
        assert points[i] == pytest.approx((0.0, 0.0), abs=1e-9)

    @pytest.mark.parametrize("rho", [0.0, 0.5, 1 / math.sqrt(2)])
    def test_defining_property(self, rho):
        params = BvnParams(2.0, 4.0, 1.0, math.sqrt(2.0), rho)
        for tau in (0.1, 0.25):
            for q1, q2 in oracle_graph(params, tau, 0.02):
                p = bvn_cdf((q1 - 2.0) / 1.0, (q2 - 4.0) / math.sqrt(2.0), rho)
                assert abs(p - tau) <= 1e-8
