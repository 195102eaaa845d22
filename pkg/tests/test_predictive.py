import numpy as np
import pytest
from numpy.testing import assert_allclose

import copsurv as cs
from copsurv.copulas import ClaytonFamily, GaussianFamily, alpha_schedule
from copsurv.distributions import LomaxParams, lomax_cdf, lomax_inv_cdf, lomax_pdf
from copsurv.errors import ConfigurationError
from copsurv.predictive import (
    absorb,
    evaluate,
    fit_uncensored,
    new_fit,
    prequential_log_lik,
)

from conftest import make_dataset


# -- independent scalar oracle: the plain-formula recursion, no log space --

def oracle_clayton_density(u, v, a):
    num = (1 - u) ** (-(a + 1) / a) * (1 - v) ** (-(a + 1) / a)
    den = ((1 - u) ** (-1 / a) + (1 - v) ** (-1 / a) - 1) ** (a + 2)
    return (a + 1) / a * num / den


def oracle_clayton_partial(u, v, a):
    den = ((1 - u) ** (-1 / a) + (1 - v) ** (-1 / a) - 1) ** (a + 1)
    return 1 - (1 - v) ** (-(a + 1) / a) / den


def oracle_running_cdf(y, previous, a):
    """Running CDF of y after absorbing `previous` in order, rebuilt with
    the plain formulas."""
    base = LomaxParams(a, 1.0)
    u = float(lomax_cdf(y, base))
    for k, y_prev in enumerate(previous, start=1):
        alpha_k = (2 - 1 / k) / (k + 1)
        v_k = oracle_running_cdf(y_prev, previous[: k - 1], a)
        u = (1 - alpha_k) * u + alpha_k * oracle_clayton_partial(u, v_k, a)
    return u


def oracle_two_step(y_grid, y1, y2, a):
    """Hand evaluation of the density/CDF recursion applied twice."""
    base = LomaxParams(a, 1.0)
    dens = [float(lomax_pdf(y, base)) for y in y_grid]
    u = [float(lomax_cdf(y, base)) for y in y_grid]
    observations = [y1, y2]
    for i, y_obs in enumerate(observations, start=1):
        alpha = (2 - 1 / i) / (i + 1)
        v_i = oracle_running_cdf(y_obs, observations[: i - 1], a)
        dens = [d * (1 - alpha + alpha * oracle_clayton_density(uu, v_i, a))
                for d, uu in zip(dens, u)]
        u = [(1 - alpha) * uu + alpha * oracle_clayton_partial(uu, v_i, a)
             for uu in u]
    return np.array(dens), np.array(u)


class TestAbsorbEvaluate:
    def test_empty_fit_is_base_measure(self):
        fit = new_fit(ClaytonFamily(1.2))
        point = evaluate(fit, 0.7)
        base = LomaxParams(1.2, 1.0)
        assert point.density == lomax_pdf(0.7, base)
        assert point.cdf == lomax_cdf(0.7, base)

    def test_single_absorb_density_formula(self):
        a = 2.0
        fit = absorb(new_fit(ClaytonFamily(a)), 0.5)
        base = LomaxParams(a, 1.0)
        y1 = float(lomax_inv_cdf(0.5, base))
        alpha1 = float(alpha_schedule(1))
        expected = (1 - alpha1 + alpha1 * cs.clayton_density(0.5, 0.5, a)) \
            * lomax_pdf(y1, base)
        assert_allclose(evaluate(fit, y1).density, expected, rtol=1e-12)

    def test_single_absorb_cdf_formula(self):
        a = 1.5
        fit = absorb(new_fit(ClaytonFamily(a)), 0.5)
        base = LomaxParams(a, 1.0)
        median = float(lomax_inv_cdf(0.5, base))
        alpha1 = float(alpha_schedule(1))
        expected = (1 - alpha1) * 0.5 + alpha1 * cs.clayton_partial(0.5, 0.5, a)
        assert_allclose(evaluate(fit, median).cdf, expected, rtol=1e-12)

    def test_cdf_approaches_one(self):
        data = make_dataset([0.5, 1.2, 0.9], [1, 1, 1])
        fit = fit_uncensored(data, ClaytonFamily(1.0))
        assert evaluate(fit, 1e12).cdf >= 1.0 - 1e-6

    def test_two_absorbs_match_hand_recursion(self):
        a = 1.3
        y1, y2 = 0.6, 1.7
        data = make_dataset([y1, y2], [1, 1])
        fit = fit_uncensored(data, ClaytonFamily(a))
        grid = np.array([0.3, 1.0, 2.5])
        point = evaluate(fit, grid)
        dens_oracle, cdf_oracle = oracle_two_step(grid, y1, y2, a)
        assert_allclose(point.density, dens_oracle, rtol=1e-10)
        assert_allclose(point.cdf, cdf_oracle, rtol=1e-10)

    def test_absorb_validates_u(self):
        fit = new_fit(ClaytonFamily(1.0))
        with pytest.raises(ConfigurationError):
            absorb(fit, 1.0)

    def test_covariate_config_mismatch(self):
        fit = new_fit(ClaytonFamily(1.0))
        with pytest.raises(ConfigurationError):
            absorb(fit, 0.5, x_new=np.array([1.0]))
        cond = new_fit(GaussianFamily(0.5), rho_x=0.5)
        with pytest.raises(ConfigurationError):
            absorb(cond, 0.5)


class TestFitUncensored:
    def test_single_point_vseq(self):
        data = make_dataset([0.8], [1])
        fit = fit_uncensored(data, ClaytonFamily(1.1))
        assert fit.n == 1
        assert_allclose(fit.vseq[0], lomax_cdf(0.8, LomaxParams(1.1, 1.0)))

    def test_identical_points_second_v_is_updated_cdf(self):
        a = 1.0
        y = 0.9
        data = make_dataset([y, y], [1, 1])
        fit = fit_uncensored(data, ClaytonFamily(a))
        base = LomaxParams(a, 1.0)
        v1 = float(lomax_cdf(y, base))
        alpha1 = float(alpha_schedule(1))
        v2_expected = (1 - alpha1) * v1 + alpha1 * oracle_clayton_partial(v1, v1, a)
        assert_allclose(fit.vseq, [v1, v2_expected], rtol=1e-12)

    def test_censored_record_rejected(self):
        data = make_dataset([1.0, 2.0], [1, 0])
        with pytest.raises(ConfigurationError):
            fit_uncensored(data, ClaytonFamily(1.0))

    def test_deterministic(self, uncensored_exp50):
        f1 = fit_uncensored(uncensored_exp50, ClaytonFamily(0.8))
        f2 = fit_uncensored(uncensored_exp50, ClaytonFamily(0.8))
        assert np.array_equal(f1.vseq, f2.vseq)


class TestPrequential:
    def test_single_point(self):
        data = make_dataset([1.4], [1])
        got = prequential_log_lik(data, ClaytonFamily(0.9))
        assert_allclose(got, np.log(lomax_pdf(1.4, LomaxParams(0.9, 1.0))),
                        rtol=1e-14)

    def test_additivity(self, uncensored_exp50):
        family = ClaytonFamily(1.0)
        data = uncensored_exp50
        head = make_dataset(data.times[:-1], data.status[:-1])
        full = prequential_log_lik(data, family)
        partial = prequential_log_lik(head, family)
        fit_head = fit_uncensored(head, family)
        last_term = float(np.log(evaluate(fit_head, data.times[-1]).density))
        assert_allclose(full, partial + last_term, rtol=1e-10)

    def test_finite_and_reproducible(self, uncensored_exp50):
        v1 = prequential_log_lik(uncensored_exp50, ClaytonFamily(1.2))
        v2 = prequential_log_lik(uncensored_exp50, ClaytonFamily(1.2))
        assert np.isfinite(v1) and v1 == v2


class TestDensityProperties:
    def test_density_normalizes(self, uncensored_exp50):
        head = make_dataset(uncensored_exp50.times[:20],
                            uncensored_exp50.status[:20])
        fit = fit_uncensored(head, ClaytonFamily(1.0))
        grid = np.concatenate([[0.0], np.geomspace(1e-8, 1e5, 4000)])
        point = evaluate(fit, grid)
        mass = np.trapezoid(point.density, grid)
        assert_allclose(mass, 1.0, atol=1e-3)

    def test_cdf_monotone_density_nonnegative(self, uncensored_exp50):
        fit = fit_uncensored(uncensored_exp50, ClaytonFamily(0.7))
        grid = np.geomspace(1e-3, 50, 300)
        point = evaluate(fit, grid)
        assert np.all(np.diff(point.cdf) >= 0)
        assert np.all(point.density >= 0)

    def test_cdf_density_finite_difference(self, uncensored_exp50):
        fit = fit_uncensored(uncensored_exp50, ClaytonFamily(1.1))
        for y in np.linspace(0.2, 3.0, 10):
            h = 1e-5 * max(1.0, y)
            numeric = (evaluate(fit, y + h).cdf - evaluate(fit, y - h).cdf) / (2 * h)
            assert_allclose(numeric, evaluate(fit, y).density, rtol=1e-3)

    def test_martingale_unbiasedness(self, uncensored_exp50):
        # absorbing one draw from the current predictive leaves the CDF
        # unchanged in expectation
        head = make_dataset(uncensored_exp50.times[:15],
                            uncensored_exp50.status[:15])
        fit = fit_uncensored(head, ClaytonFamily(1.0))
        grid = np.array([0.3, 0.7, 1.2, 2.0, 3.5])
        before = np.asarray(evaluate(fit, grid).cdf)
        rng = np.random.default_rng(77)
        draws = rng.random(10_000)
        after = np.empty((draws.size, grid.size))
        for idx, u in enumerate(draws):
            after[idx] = evaluate(absorb(fit, float(u)), grid).cdf
        mc_mean = after.mean(axis=0)
        mc_se = after.std(axis=0, ddof=1) / np.sqrt(draws.size)
        assert np.all(np.abs(mc_mean - before) <= 3 * mc_se)


class TestConditionalVariant:
    def test_rho_x_zero_degenerates_to_plain(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(25, 2))
        data = make_dataset(rng.exponential(1.0, 25), np.ones(25), covariates=x)
        fam = GaussianFamily(0.6)
        plain = fit_uncensored(data, fam)
        cond = fit_uncensored(data, fam, rho_x=0.0)
        grid = np.geomspace(0.05, 5.0, 40)
        d_plain = np.asarray(evaluate(plain, grid).density)
        d_cond = np.asarray(evaluate(cond, grid, x=np.array([0.2, -1.0])).density)
        assert_allclose(d_cond, d_plain, rtol=1e-10)

    def test_conditional_density_depends_on_x(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(25, 1))
        y = np.exp(0.8 * x[:, 0]) * rng.exponential(1.0, 25)
        data = make_dataset(y, np.ones(25), covariates=x)
        fit = fit_uncensored(data, GaussianFamily(0.6), rho_x=0.8)
        grid = np.geomspace(0.05, 5.0, 40)
        lo = np.asarray(evaluate(fit, grid, x=np.array([-1.5])).density)
        hi = np.asarray(evaluate(fit, grid, x=np.array([1.5])).density)
        assert np.max(np.abs(lo - hi)) > 1e-3

    def test_missing_x_rejected(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(10, 1))
        data = make_dataset(rng.exponential(1.0, 10), np.ones(10), covariates=x)
        fit = fit_uncensored(data, GaussianFamily(0.5), rho_x=0.5)
        with pytest.raises(ConfigurationError):
            evaluate(fit, 1.0)
