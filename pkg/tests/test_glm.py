import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from helpers import newton_logistic
from scipy import integrate, special

from treeclust.errors import ConvergenceSuspect, DimensionMismatch, DomainError, RankDeficient, Separation
from treeclust.glm import (
    PROB_FLOOR,
    DesignMatrix,
    Family,
    GlmFit,
    chisq_sf,
    fit_glm,
    log_likelihood,
    lr_test,
)


def chi2_sf_quadrature(x, k):
    """Independent oracle: integrate the chi-squared density over (x, inf)."""

    def pdf(t):
        if t <= 0:
            return 0.0
        return math.exp((k / 2 - 1) * math.log(t) - t / 2 - (k / 2) * math.log(2) - math.lgamma(k / 2))

    value, _ = integrate.quad(pdf, x, np.inf, epsabs=1e-14, epsrel=1e-13, limit=500)
    return value


def _fake_fit(ll):
    return GlmFit(np.zeros(1), ll, 0.0, True, 1, Family.GAUSSIAN)


class TestFitGlm:
    def test_intercept_only_gaussian(self):
        fit = fit_glm([1.0, 2.0, 3.0], np.ones((3, 1)), "gaussian")
        assert fit.coefficients[0] == pytest.approx(2.0)
        assert fit.sigma2_hat == pytest.approx(2.0 / 3.0)
        assert fit.converged

    def test_penalised_logistic_matches_newton(self):
        y = np.array([0, 0, 1, 1.0])
        X = DesignMatrix.from_array([[1, 0], [1, 0], [1, 1], [1, 1]], intercept_col=0)
        fit = fit_glm(y, X, "binomial", ridge=0.01)
        # Frozen from newton_logistic with the slope penalised only.
        np.testing.assert_allclose(fit.coefficients, [-3.359275045369593, 6.71855009073919], atol=1e-6)
        np.testing.assert_allclose(
            fit.coefficients, newton_logistic(X.values, y, 0.01, [0, 1]), atol=1e-6)

    def test_gaussian_dummies_match_normal_equations(self):
        rng = np.random.default_rng(3)
        units = np.repeat(np.arange(5), 6)
        X = np.column_stack([np.eye(5)[units], rng.normal(size=30)])
        y = rng.normal(size=30) + units
        fit = fit_glm(y, X, "gaussian")
        direct = np.linalg.solve(X.T @ X, X.T @ y)
        np.testing.assert_allclose(fit.coefficients, direct, rtol=1e-8, atol=1e-10)

    def test_rank_deficient(self):
        X = np.column_stack([np.ones(4), np.ones(4)])
        with pytest.raises(RankDeficient):
            fit_glm([1.0, 2, 3, 4], X, "gaussian")
        fit = fit_glm([1.0, 2, 3, 4], X, "gaussian", ridge=1e-4)
        assert np.all(np.isfinite(fit.coefficients))

    def test_separation_raises_without_ridge(self):
        y = np.array([0, 0, 1, 1.0])
        X = np.array([[1, 0], [1, 0], [1, 1], [1, 1.0]])
        with pytest.raises(Separation):
            fit_glm(y, X, "binomial")

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            fit_glm([1.0, 2.0], np.ones((3, 1)), "gaussian")

    def test_binomial_rejects_non_binary(self):
        with pytest.raises(DomainError):
            fit_glm([0.0, 0.5, 1.0], np.ones((3, 1)), "binomial")

    def test_log_likelihood_is_unpenalised(self):
        rng = np.random.default_rng(0)
        X = np.column_stack([np.ones(40), rng.normal(size=40)])
        y = (rng.random(40) < 0.5).astype(float)
        fit = fit_glm(y, DesignMatrix.from_array(X, 0), "binomial", ridge=0.5)
        mu = special.expit(X @ fit.coefficients)
        assert fit.log_likelihood == pytest.approx(log_likelihood(y, mu, "binomial"), abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), p=st.integers(1, 6))
    def test_binomial_score_vanishes(self, seed, p):
        rng = np.random.default_rng(seed)
        X = np.column_stack([np.ones(120), rng.normal(size=(120, p - 1))])
        beta = rng.normal(scale=0.5, size=p)
        y = (rng.random(120) < special.expit(X @ beta)).astype(float)
        try:
            fit = fit_glm(y, X, "binomial")
        except Separation:
            return
        grad = X.T @ (y - fit.fitted)
        assert np.max(np.abs(grad)) <= 1e-6

        # Finite-difference gradient of the log-likelihood agrees.
        h = 1e-6
        for j in range(p):
            e = np.zeros(p)
            e[j] = h
            up = log_likelihood(y, special.expit(X @ (fit.coefficients + e)), "binomial")
            dn = log_likelihood(y, special.expit(X @ (fit.coefficients - e)), "binomial")
            assert abs((up - dn) / (2 * h)) <= 1e-4

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), p=st.integers(1, 8))
    def test_extra_column_never_lowers_likelihood(self, seed, p):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(60, p + 1))
        y = rng.normal(size=60)
        small = fit_glm(y, X[:, :p], "gaussian")
        big = fit_glm(y, X, "gaussian")
        assert big.log_likelihood >= small.log_likelihood - 1e-6

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), scale=st.floats(0.1, 100), shift=st.floats(-10, 10))
    def test_lr_statistic_invariant_to_affine_rescaling(self, seed, scale, shift):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=80)
        z = rng.normal(size=80)
        y = 0.5 * x + 0.3 * z + rng.normal(size=80)
        for family, resp in (("gaussian", y), ("binomial", (y > 0).astype(float))):
            null = fit_glm(resp, DesignMatrix.from_array(np.column_stack([np.ones(80), x]), 0), family)
            alt = fit_glm(resp, DesignMatrix.from_array(np.column_stack([np.ones(80), x, z]), 0), family)
            try:
                alt2 = fit_glm(resp, DesignMatrix.from_array(
                    np.column_stack([np.ones(80), x, scale * z + shift]), 0), family)
            except Separation:
                # The fixed coefficient cap is not scale invariant.
                assume(False)
            s1, _ = lr_test(null, alt, 1)
            s2, _ = lr_test(null, alt2, 1)
            assert s2 == pytest.approx(s1, rel=1e-7, abs=1e-8)
            assert alt2.coefficients[2] == pytest.approx(alt.coefficients[2] / scale, rel=1e-6)


class TestLogLikelihood:
    def test_single_bernoulli(self):
        assert log_likelihood([0.0], [0.5], "binomial") == pytest.approx(math.log(0.5))

    def test_saturated_mean_is_clamped(self):
        ll = log_likelihood([1.0, 1.0], [1.0, 1.0], "binomial")
        assert math.isfinite(ll)
        assert ll == pytest.approx(2 * math.log(1 - PROB_FLOOR))

    def test_gaussian_hand_value(self):
        ll = log_likelihood([0.0, 2.0], [1.0, 1.0], "gaussian", sigma2=1.0)
        assert ll == pytest.approx(-2.837877, abs=1e-6)

    def test_binomial_domain(self):
        with pytest.raises(DomainError):
            log_likelihood([1.0], [1.5], "binomial")


class TestChisqSf:
    def test_zero_statistic(self):
        assert chisq_sf(0.0, 5) == 1.0

    @pytest.mark.parametrize("x,df", [(3.841459, 1), (18.307, 10)])
    def test_five_percent_quantiles(self, x, df):
        assert chisq_sf(x, df) == pytest.approx(0.05, abs=1e-3)
        assert chisq_sf(x, df) == pytest.approx(chi2_sf_quadrature(x, df), abs=1e-10)

    def test_against_regularized_gamma_grid(self):
        worst = 0.0
        for df in (1, 2, 3, 5, 10, 19, 38, 50, 100, 199, 300, 500):
            for x in np.linspace(0.0, 200.0, 81):
                worst = max(worst, abs(chisq_sf(float(x), df) - special.gammaincc(df / 2, x / 2)))
        assert worst <= 1e-10

    @given(df=st.integers(1, 500), a=st.floats(0, 200), b=st.floats(0, 200))
    def test_monotone_in_x(self, df, a, b):
        lo, hi = sorted((a, b))
        assert chisq_sf(hi, df) <= chisq_sf(lo, df) + 1e-15

    def test_saturates(self):
        assert chisq_sf(1e6, 3) == 0.0
        assert chisq_sf(math.inf, 3) == 0.0


class TestLrTest:
    def test_identical_fits(self):
        assert lr_test(_fake_fit(-10.0), _fake_fit(-10.0), 3) == (0.0, 1.0)

    def test_hand_example(self):
        stat, p = lr_test(_fake_fit(-110.0), _fake_fit(-105.0), 1)
        assert stat == pytest.approx(10.0)
        # Frozen from the quadrature oracle.
        assert p == pytest.approx(0.0015654022580025495, abs=1e-9)

    def test_noise_is_clamped(self):
        assert lr_test(_fake_fit(-5.0), _fake_fit(-5.0 - 1e-12), 1) == (0.0, 1.0)

    def test_large_negative_difference_is_suspect(self):
        with pytest.raises(ConvergenceSuspect):
            lr_test(_fake_fit(-5.0), _fake_fit(-6.0), 1)
        assert lr_test(_fake_fit(-5.0), _fake_fit(-6.0), 1, check=False) == (0.0, 1.0)
