"""Tests for the prior density, likelihood cache, and quadrature oracles."""

import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spa.model import (
    GtPrior,
    QuadSpec,
    QuadratureError,
    de_log_density,
    gt_log_density,
    gt_scale_mixture_oracle,
    log_likelihood,
    log_likelihood_delta,
    log_posterior_unnorm,
    shrinkage_posterior_mean,
    sparsity_thresholds,
)


def make_data(X, y):
    return SimpleNamespace(X=np.asarray(X, float), y=np.asarray(y, float))


def random_data(rng, n, p):
    X = rng.standard_normal((n, p))
    y = (rng.random(n) < 0.5).astype(float)
    return make_data(X, y)


class TestGtPrior:
    def test_density_at_origin(self):
        assert gt_log_density(0.0, GtPrior(4, 0.1)) == pytest.approx(math.log(5.0), abs=1e-12)

    def test_density_plugin(self):
        assert gt_log_density(1.0, GtPrior(1, 1)) == pytest.approx(-3 * math.log(2), abs=1e-12)

    @given(st.floats(-50, 50), st.floats(0.1, 20), st.floats(0.01, 5))
    def test_symmetry(self, beta, a, c):
        prior = GtPrior(a, c)
        assert gt_log_density(beta, prior) == gt_log_density(-beta, prior)

    def test_derived_parameters(self):
        prior = GtPrior(4, 0.1)
        assert prior.b == pytest.approx(0.4)
        assert prior.lambda_de == pytest.approx(10.0)

    @pytest.mark.parametrize("a,c", [(0, 1), (-1, 1), (1, 0), (1, -0.5)])
    def test_invalid_parameters(self, a, c):
        with pytest.raises(ValueError):
            GtPrior(a, c)

    @pytest.mark.parametrize("a", [0.5, 1.0, 4.0, 100.0])
    @pytest.mark.parametrize("c", [0.01, 0.1, 1.0])
    def test_normalization(self, a, c):
        # Substituting u = log1p(beta/(a c)) turns the positive half-line
        # integral into int_0^U (a/2) exp(-a u) du, which Simpson resolves
        # even for the heavy a = 0.5 tail.
        prior = GtPrior(a, c)
        u = np.linspace(0.0, 45.0 / a, 100001)
        beta = a * c * np.expm1(u)
        integrand = np.exp(gt_log_density(beta, prior)) * a * c * np.exp(u)
        w = np.ones(u.size)
        w[1:-1:2], w[2:-1:2] = 4.0, 2.0
        total = 2.0 * (u[1] - u[0]) / 3.0 * (w @ integrand)
        assert total == pytest.approx(1.0, abs=1e-6)


class TestDoubleExponential:
    def test_values(self):
        assert de_log_density(0.0, 1.0) == pytest.approx(-math.log(2), abs=1e-12)
        assert de_log_density(1.0, 1.0) == pytest.approx(-math.log(2) - 1.0, abs=1e-12)

    def test_invalid_scale(self):
        with pytest.raises(ValueError):
            de_log_density(1.0, 0.0)

    def test_gt_limit_large_a(self):
        gap = abs(gt_log_density(2.0, GtPrior(1e6, 1.0)) - de_log_density(2.0, 1.0))
        assert gap < 1e-5

    def test_log_density_limit_c1(self):
        beta = np.linspace(-5, 5, 2001)
        gap = np.abs(gt_log_density(beta, GtPrior(1e4, 1.0)) - de_log_density(beta, 1.0))
        assert gap.max() < 1e-3

    @pytest.mark.parametrize("c", [0.1, 1.0])
    def test_density_limit(self, c):
        beta = np.linspace(-5, 5, 2001)
        gap = np.abs(
            np.exp(gt_log_density(beta, GtPrior(1e4, c))) - np.exp(de_log_density(beta, c))
        )
        assert gap.max() < 1e-3

    def test_heavier_tails_than_laplace(self):
        # Gt(1, 1) crosses DE(1) near beta* ~ 2.51: lighter inside, heavier outside.
        beta_out = np.linspace(2.6, 12.0, 100)
        assert np.all(gt_log_density(beta_out, GtPrior(1, 1)) > de_log_density(beta_out, 1.0))
        beta_in = np.linspace(0.1, 2.4, 100)
        assert np.all(gt_log_density(beta_in, GtPrior(1, 1)) < de_log_density(beta_in, 1.0))


class TestScaleMixtureOracle:
    def test_origin(self):
        assert gt_scale_mixture_oracle(0.0, GtPrior(1, 1)) == pytest.approx(0.5, rel=1e-9)

    def test_matches_closed_form(self):
        val = gt_scale_mixture_oracle(0.5, GtPrior(2, 0.3))
        assert val == pytest.approx(math.exp(gt_log_density(0.5, GtPrior(2, 0.3))), rel=1e-6)

    def test_grid(self):
        for a in [0.5, 1.0, 4.0]:
            for c in [0.05, 0.5]:
                prior = GtPrior(a, c)
                for beta in [-3.0, -0.2, 0.0, 0.7, 4.0]:
                    assert gt_scale_mixture_oracle(beta, prior) == pytest.approx(
                        math.exp(gt_log_density(beta, prior)), rel=1e-6
                    )

    def test_degenerate_spec(self):
        with pytest.raises(ValueError):
            gt_scale_mixture_oracle(0.0, GtPrior(1, 1), QuadSpec(n_nodes=1))


class TestLogLikelihood:
    def test_zero_beta(self):
        rng = np.random.default_rng(0)
        data = random_data(rng, 40, 3)
        value, cache = log_likelihood(data, np.zeros(3))
        assert value == pytest.approx(40 * math.log(0.5), abs=1e-12)
        assert np.all(cache.eta == 0.0)

    def test_scalar_case(self):
        # Frozen from a direct high-precision evaluation of
        # -log(1 + exp(-0.4578)).
        data = make_data([[1.0]], [1.0])
        value, _ = log_likelihood(data, [0.4578])
        assert value == pytest.approx(-0.490219160473097, abs=1e-12)

    def test_dimension_mismatch(self):
        data = make_data(np.zeros((5, 3)), np.zeros(5))
        with pytest.raises(ValueError):
            log_likelihood(data, np.zeros(4))

    def test_overflow_safe(self):
        data = make_data([[1.0], [-1.0]], [1.0, 0.0])
        value, _ = log_likelihood(data, [800.0])
        assert np.isfinite(value)
        assert value == pytest.approx(0.0, abs=1e-12)


class TestLogLikelihoodDelta:
    def test_noop_update(self):
        rng = np.random.default_rng(1)
        data = random_data(rng, 30, 4)
        _, cache = log_likelihood(data, np.full(4, 0.3))
        value, cache2 = log_likelihood_delta(cache, data, 2, 0.3, 0.3)
        assert value == cache.loglik
        assert cache2 is cache

    def test_matches_full_recompute(self):
        rng = np.random.default_rng(2)
        data = random_data(rng, 50, 6)
        beta = rng.standard_normal(6)
        _, cache = log_likelihood(data, beta)
        new = beta.copy()
        new[3] = 1.7
        value, _ = log_likelihood_delta(cache, data, 3, beta[3], 1.7)
        expected, _ = log_likelihood(data, new)
        assert value == pytest.approx(expected, abs=1e-10)

    def test_out_of_range(self):
        data = make_data(np.zeros((3, 2)), np.zeros(3))
        _, cache = log_likelihood(data, np.zeros(2))
        with pytest.raises(IndexError):
            log_likelihood_delta(cache, data, 2, 0.0, 1.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_permuted_edit_sequence(self, seed):
        rng = np.random.default_rng(seed)
        n, p = 60, 8
        data = random_data(rng, n, p)
        beta = rng.standard_normal(p) * 0.5
        _, cache = log_likelihood(data, beta)
        target = rng.standard_normal(p) * 0.5
        current = beta.copy()
        for j in rng.permutation(p):
            _, cache = log_likelihood_delta(cache, data, j, current[j], target[j])
            current[j] = target[j]
        expected, fresh = log_likelihood(data, target)
        assert cache.loglik == pytest.approx(expected, abs=1e-9)
        assert np.allclose(cache.eta, fresh.eta, atol=1e-9)


class TestLogPosterior:
    def test_single_coefficient_at_zero(self):
        rng = np.random.default_rng(3)
        data = random_data(rng, 25, 1)
        prior = GtPrior(4, 0.2)
        lp = log_posterior_unnorm(data, np.zeros(1), prior)
        assert lp == pytest.approx(25 * math.log(0.5) + math.log(1 / 0.4), abs=1e-12)

    def test_prior_term_only_depends_on_scale(self):
        rng = np.random.default_rng(4)
        data = random_data(rng, 25, 3)
        beta = rng.standard_normal(3)
        lp1 = log_posterior_unnorm(data, beta, GtPrior(4, 0.2))
        lp2 = log_posterior_unnorm(data, beta, GtPrior(4, 0.7))
        prior_diff = float(
            np.sum(gt_log_density(beta, GtPrior(4, 0.2)) - gt_log_density(beta, GtPrior(4, 0.7)))
        )
        assert lp1 - lp2 == pytest.approx(prior_diff, abs=1e-12)

    def test_recomposition(self):
        rng = np.random.default_rng(5)
        data = random_data(rng, 30, 2)
        beta = np.array([0.4, -1.1])
        prior = GtPrior(2, 0.5)
        loglik, _ = log_likelihood(data, beta)
        expected = loglik + float(np.sum(gt_log_density(beta, prior)))
        assert log_posterior_unnorm(data, beta, prior) == pytest.approx(expected, abs=1e-12)


def riemann_posterior_mean(y, prior, n_cells=400001, half_width=14.0):
    """Independent midpoint Riemann-sum oracle for the shrinkage curve."""
    edges = np.linspace(y - half_width, y + half_width, n_cells + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    w = np.exp(-0.5 * (mid - y) ** 2 + gt_log_density(mid, prior))
    return float((mid * w).sum() / w.sum())


class TestShrinkagePosteriorMean:
    def test_zero_observation(self):
        assert shrinkage_posterior_mean(0.0, GtPrior(4, 0.1)) == pytest.approx(0.0, abs=1e-12)

    def test_sign_and_magnitude(self):
        prior = GtPrior(4, 0.1)
        for y in [-6.0, -2.5, -0.7, 0.4, 1.9, 5.0]:
            m = shrinkage_posterior_mean(y, prior)
            oracle = riemann_posterior_mean(y, prior)
            assert m == pytest.approx(oracle, abs=1e-4)
            assert math.copysign(1.0, m) == math.copysign(1.0, y)
            assert abs(m) <= abs(y)

    def test_against_riemann_oracle(self):
        m = shrinkage_posterior_mean(3.0, GtPrior(4, 0.1))
        assert m == pytest.approx(riemann_posterior_mean(3.0, GtPrior(4, 0.1)), abs=1e-4)

    def test_narrow_interval_fails_loudly(self):
        with pytest.raises(QuadratureError):
            shrinkage_posterior_mean(0.0, GtPrior(1, 5.0), half_width=0.5)


class TestSparsityThresholds:
    def test_a_four(self):
        thr = sparsity_thresholds(4.0)
        assert thr.c_sparse == pytest.approx(2 * math.sqrt(5) / 4, abs=1e-12)
        assert thr.c_continuous == pytest.approx(math.sqrt(5) / 4, abs=1e-12)

    def test_a_one(self):
        thr = sparsity_thresholds(1.0)
        assert thr.c_sparse == pytest.approx(2 * math.sqrt(2), abs=1e-12)
        assert thr.c_continuous == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_invalid(self):
        with pytest.raises(ValueError):
            sparsity_thresholds(0.0)


class TestCacheInvariant:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_cache_matches_recompute_after_edits(self, seed):
        rng = np.random.default_rng(seed)
        n, p = 20, 4
        data = random_data(rng, n, p)
        beta = rng.standard_normal(p)
        _, cache = log_likelihood(data, beta)
        for _ in range(6):
            j = int(rng.integers(p))
            new = float(rng.standard_normal())
            _, cache = log_likelihood_delta(cache, data, j, beta[j], new)
            beta[j] = new
        full, fresh = log_likelihood(data, beta)
        assert abs(cache.loglik - full) < 1e-10
        assert np.max(np.abs(cache.eta - fresh.eta)) < 1e-10
