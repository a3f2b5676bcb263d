import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ndtr, ndtri

import vlsf
from vlsf.asym import (
    coupled_gauss_quantile,
    critical_epsilon_symmetric,
    expected_min_gauss,
    expected_min_max_gauss,
    gauss_phi,
    second_order_curves,
    sqrt_coeff_achievability,
    sqrt_coeff_converse,
    symmetric_converse_bracket,
)
from vlsf.channel import BroadcastPair, InputDistribution

EPS_GRID = (0.001, 0.01, 0.05, 0.1, 0.3, 0.5, 0.9)


def make_pair(v1, v2, c=0.3466, w=None):
    """Hand-built pair for coefficient formulas that only read the moments."""
    w = w or vlsf.bsc(0.11)
    return BroadcastPair(
        w1=w,
        w2=w,
        pstar=InputDistribution.uniform(2),
        c1=c,
        c2=c,
        v1=v1,
        v2=v2,
        capacity=c,
        rho1=(v1 / v2) ** 0.25 if v1 > 0 and v2 > 0 else float("nan"),
        rho2=(v2 / v1) ** 0.25 if v1 > 0 and v2 > 0 else float("nan"),
        v_geo=math.sqrt(v1 * v2),
        common_maximizer_gap=0.0,
    )


class TestCoupledQuantile:
    def test_symmetric_case_reduces_to_gaussian_quantile(self):
        # oracle: with both ratios 1 the defining equation becomes quadratic
        # in Phi(y), with root 1 - eps
        for eps in EPS_GRID:
            u = (-eps + math.sqrt(eps * eps + 4 * (1 - eps))) / 2.0
            assert u == pytest.approx(1 - eps, abs=1e-12)
            y = coupled_gauss_quantile(eps, 1.0, 1.0)
            assert y == pytest.approx(float(ndtri(1 - eps)), abs=1e-8)

    def test_median(self):
        assert coupled_gauss_quantile(0.5, 1.0, 1.0) == pytest.approx(0.0, abs=1e-10)

    def test_divergence_toward_one(self):
        assert coupled_gauss_quantile(0.999, 1.0, 1.0) < -3.0

    def test_residual_for_general_ratios(self):
        for eps in (0.01, 0.05, 0.3):
            for rho1 in (0.5, 0.8, 1.7):
                rho2 = 1.0 / rho1
                y = coupled_gauss_quantile(eps, rho1, rho2)
                f1, f2 = ndtr(rho1 * y), ndtr(rho2 * y)
                residual = f1 * f2 + eps * (1 + min(f1, f2)) - 1.0
                assert abs(residual) <= 1e-12

    def test_input_validation(self):
        with pytest.raises(ValueError):
            coupled_gauss_quantile(0.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            coupled_gauss_quantile(0.1, 2.0, 1.0)  # product must be 1


class TestClippedGaussianExpectations:
    def test_min_gauss_at_zero(self):
        assert expected_min_gauss(0.0, 1.0) == pytest.approx(-gauss_phi(0.0), abs=1e-14)
        assert expected_min_gauss(0.0, 1.0) == pytest.approx(-0.3989423, abs=1e-7)

    def test_min_gauss_saturates(self):
        assert expected_min_gauss(40.0, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_min_gauss_quadrature_oracle(self):
        for c in (-1.5, -0.3, 0.0, 0.7, 2.0):
            for rho in (0.6, 1.0, 1.9):
                oracle, _ = quad(
                    lambda z: min(c, rho * z) * gauss_phi(z), -45, 45, limit=300
                )
                assert expected_min_gauss(c, rho) == pytest.approx(oracle, abs=1e-10)

    def test_min_gauss_upper_bounds(self):
        for c in (0.0, 0.5, 2.0):
            v = expected_min_gauss(c, 1.0)
            assert v <= c and v <= 0.0

    def test_min_max_limit_is_mean_of_two_max(self):
        # E[max(Z1, Z2)] = 1/sqrt(pi); Monte Carlo cross-check at 4 sigma
        value = expected_min_max_gauss(40.0, 1.0, 1.0)
        assert value == pytest.approx(1.0 / math.sqrt(math.pi), abs=1e-10)
        rng = np.random.default_rng(42)
        n, total, total2 = 0, 0.0, 0.0
        for _ in range(10):
            z = rng.standard_normal((2, 1_000_000))
            m = np.maximum(z[0], z[1])
            total += float(m.sum())
            total2 += float((m * m).sum())
            n += m.size
        mc = total / n
        se = math.sqrt((total2 / n - mc * mc) / n)
        assert abs(mc - value) <= 4 * se

    def test_min_max_at_zero_quadrature_oracle(self):
        oracle = -quad(lambda z: ndtr(z) ** 2, -45, 0, limit=300)[0]
        assert expected_min_max_gauss(0.0, 1.0, 1.0) == pytest.approx(oracle, abs=1e-10)

    def test_min_max_monotone_in_c(self):
        vals = [expected_min_max_gauss(c, 1.3, 1 / 1.3) for c in np.linspace(-2, 3, 21)]
        assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))


class TestSqrtCoefficients:
    def test_achievability_zero_dispersion(self):
        assert sqrt_coeff_achievability(make_pair(0.0, 0.0), 0.05) == 0.0

    def test_achievability_value(self, pair_bsc011):
        v = pair_bsc011.v1
        expected = math.sqrt(2 * v / (2 * math.pi * 0.95))
        got = sqrt_coeff_achievability(pair_bsc011, 0.05)
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(0.37872, abs=1e-4)

    def test_achievability_scaling(self):
        base = sqrt_coeff_achievability(make_pair(0.4, 0.4), 0.05)
        doubled = sqrt_coeff_achievability(make_pair(0.8, 0.8), 0.05)
        assert doubled == pytest.approx(math.sqrt(2) * base, rel=1e-12)

    def test_converse_matches_symmetric_closed_form(self, pair_bsc011):
        # the assembled expression must collapse to the closed-form bracket
        for eps in EPS_GRID:
            general = sqrt_coeff_converse(pair_bsc011, eps)
            closed = math.sqrt(pair_bsc011.v_geo / (1 - eps) ** 3) * symmetric_converse_bracket(eps)
            assert general == pytest.approx(closed, abs=1e-6)

    def test_converse_positive_at_small_eps(self, pair_bsc011):
        assert sqrt_coeff_converse(pair_bsc011, 0.05) > 0.0

    def test_converse_monte_carlo_oracle(self, pair_bsc011):
        # re-evaluate the two expectations with 1e7 Gaussian pairs
        eps = 0.05
        y = coupled_gauss_quantile(eps, 1.0, 1.0)
        rng = np.random.default_rng(11)
        n, s_max, s2_max, s_single, s2_single = 0, 0.0, 0.0, 0.0, 0.0
        for _ in range(10):
            z = rng.standard_normal((2, 1_000_000))
            a = np.minimum(y, np.maximum(z[0], z[1]))
            b = np.minimum(y, z[0])
            s_max += float(a.sum())
            s2_max += float((a * a).sum())
            s_single += float(b.sum())
            s2_single += float((b * b).sum())
            n += a.shape[0]
        mc_max, mc_single = s_max / n, s_single / n
        se_max = math.sqrt((s2_max / n - mc_max**2) / n)
        se_single = math.sqrt((s2_single / n - mc_single**2) / n)
        assert expected_min_max_gauss(y, 1.0, 1.0) == pytest.approx(mc_max, abs=4 * se_max)
        assert expected_min_gauss(y, 1.0) == pytest.approx(mc_single, abs=4 * se_single)
        mc_bracket = mc_max - eps * (2 * y - mc_single)
        got = sqrt_coeff_converse(pair_bsc011, eps)
        scale = math.sqrt(pair_bsc011.v_geo / (1 - eps) ** 3)
        se_bracket = scale * (se_max + eps * se_single)
        assert got == pytest.approx(scale * mc_bracket, abs=4 * se_bracket + 1e-9)

    def test_requires_positive_dispersions(self):
        with pytest.raises(ValueError):
            sqrt_coeff_converse(make_pair(0.0, 0.0), 0.05)

    def test_warns_on_unequal_capacities(self):
        pair = vlsf.optimize_common_input(vlsf.bsc(0.05), vlsf.bsc(0.2))
        with pytest.warns(UserWarning):
            sqrt_coeff_converse(pair, 0.05)

    def test_continuity_in_epsilon(self, pair_bsc011):
        grid = np.arange(0.02, 0.5, 1e-3)
        xa = np.array([sqrt_coeff_achievability(pair_bsc011, e) for e in grid])
        xc = np.array([sqrt_coeff_converse(pair_bsc011, e) for e in grid])
        # adjacent evaluations move by O(grid spacing)
        assert np.max(np.abs(np.diff(xa))) < 5e-3
        assert np.max(np.abs(np.diff(xc))) < 5e-3


class TestCriticalEpsilon:
    def test_value_within_published_window(self):
        assert 0.1963 <= critical_epsilon_symmetric() <= 0.1973

    def test_bracket_signs(self):
        assert symmetric_converse_bracket(0.05) > 0.0
        assert symmetric_converse_bracket(0.4) < 0.0

    def test_single_sign_change_on_scan(self):
        grid = np.linspace(0.01, 0.5, 1000)
        signs = np.sign([symmetric_converse_bracket(e) for e in grid])
        changes = np.count_nonzero(np.diff(signs))
        assert changes == 1


class TestCurves:
    def test_ordering_and_shape(self, pair_bsc011):
        grid = np.array([200.0, 500.0, 1000.0, 5000.0])
        lower, upper = second_order_curves(pair_bsc011, 0.05, grid)
        assert np.all(lower < upper)  # achievable penalty exceeds the converse one
        first = pair_bsc011.capacity * grid / 0.95
        assert np.all(lower < first) and np.all(upper < first)

    def test_rejects_bad_grid(self, pair_bsc011):
        with pytest.raises(ValueError):
            second_order_curves(pair_bsc011, 0.05, np.array([0.0, 10.0]))
