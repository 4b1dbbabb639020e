import time

import numpy as np
import pytest
from conftest import random_instance, random_spd

from cpp_predict.conjugate import (
    Dataset,
    PriorSpec,
    fit_posterior,
    loo_all,
    loo_predictive,
    loo_predictive_naive,
    map_predictive,
    sigma2_posterior_params,
    swap_coefficients_fast,
    swap_coefficients_naive,
    swap_terms,
)
from cpp_predict.errors import DegenerateLeverage, NotPositiveDefinite


def direct_posterior_mean(data, prior):
    Vinv = np.linalg.inv(prior.V)
    return np.linalg.solve(data.X.T @ data.X + Vinv, data.X.T @ data.y + Vinv @ prior.beta0)


class TestFitPosterior:
    def test_two_point_example(self, toy):
        st = fit_posterior(*toy)
        assert st.A[0, 0] == pytest.approx(3.0, abs=1e-14)
        assert st.b[0] == pytest.approx(2.0, abs=1e-14)
        assert st.beta_hat[0] == pytest.approx(2 / 3, abs=1e-14)
        np.testing.assert_allclose(st.leverages, [1 / 3, 1 / 3], atol=1e-14)

    def test_diffuse_prior_approaches_ols(self, rng):
        X = rng.standard_normal((40, 3))
        y = X @ np.array([1.0, -2.0, 0.5]) + rng.standard_normal(40)
        st = fit_posterior(Dataset(X, y), PriorSpec(np.zeros(3), 1e6 * np.eye(3)))
        ols = np.linalg.solve(X.T @ X, X.T @ y)
        np.testing.assert_allclose(st.beta_hat, ols, rtol=1e-4)

    @pytest.mark.parametrize("c", [0.7, -3.0, 12.5])
    def test_sign_flip_symmetry(self, c):
        prior = PriorSpec(np.zeros(1), 2.0 * np.eye(1))
        st = fit_posterior(Dataset(np.array([[1.0], [-1.0]]), np.array([c, -c])), prior)
        assert st.beta_hat[0] == pytest.approx(2 * c / (2 + 1 / 2.0), rel=1e-14)
        neg = fit_posterior(Dataset(np.array([[1.0], [-1.0]]), np.array([-c, c])), prior)
        assert neg.beta_hat[0] == -st.beta_hat[0]

    def test_matches_direct_solve_and_inverse(self, rng):
        data, prior = random_instance(rng, 30, 5)
        st = fit_posterior(data, prior)
        np.testing.assert_allclose(st.beta_hat, direct_posterior_mean(data, prior), atol=1e-10)
        np.testing.assert_allclose(st.A @ st.Ainv, np.eye(5), atol=1e-10)
        assert np.all((st.leverages > 0) & (st.leverages < 1))

    def test_leverage_guard(self):
        # a tiny prior precision and a single dominant row push leverage to one
        X = np.array([[1.0, 0.0], [0.0, 1e-9]])
        prior = PriorSpec(np.zeros(2), 1e30 * np.eye(2))
        with pytest.raises(DegenerateLeverage) as err:
            fit_posterior(Dataset(X, np.zeros(2)), prior)
        assert err.value.i in (0, 1)

    def test_non_spd_prior(self):
        with pytest.raises(NotPositiveDefinite):
            fit_posterior(Dataset(np.ones((3, 2)), np.zeros(3)), PriorSpec(np.zeros(2), np.diag([1.0, -1.0])))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            fit_posterior(Dataset(np.ones((3, 2)), np.zeros(3)), PriorSpec.default(3))

    def test_dataset_validation(self):
        with pytest.raises(ValueError):
            Dataset(np.ones((1, 2)), np.ones(1))
        with pytest.raises(ValueError):
            Dataset(np.array([[1.0], [np.nan]]), np.ones(2))
        with pytest.raises(ValueError):
            Dataset(np.ones((3, 1)), np.ones(2))


class TestLoo:
    def test_two_point_example(self, toy):
        data, prior = toy
        loo = loo_predictive(fit_posterior(data, prior), data, 0, 1.0)
        assert loo.m2 == pytest.approx(1.0, abs=1e-14)
        assert loo.s2_sq == pytest.approx(1.5, abs=1e-14)

    def test_zero_row(self, rng):
        data, prior = random_instance(rng, 10, 3)
        X = data.X.copy()
        X[4] = 0.0
        data = Dataset(X, data.y)
        st = fit_posterior(data, prior)
        loo = loo_predictive(st, data, 4, 2.0)
        assert st.leverages[4] == 0.0
        assert loo.m2 == 0.0 and loo.s2_sq == 2.0

    def test_matches_refit(self, rng):
        data, prior = random_instance(rng, 20, 4)
        st = fit_posterior(data, prior)
        for i in range(data.n):
            fast = loo_predictive(st, data, i, 1.3)
            ref = loo_predictive_naive(data, prior, i, 1.3)
            assert abs(fast.m2 - ref.m2) <= 1e-10
            assert fast.s2_sq == pytest.approx(ref.s2_sq, rel=1e-8)
            assert fast.s2_sq > 1.3

    def test_vectorized_agrees(self, rng):
        data, prior = random_instance(rng, 25, 3)
        st = fit_posterior(data, prior)
        m2, u2 = loo_all(st, data)
        for i in range(data.n):
            one = loo_predictive(st, data, i, 1.0)
            assert m2[i] == pytest.approx(one.m2, abs=1e-12)
            assert u2[i] == pytest.approx(one.s2_sq, rel=1e-12)


class TestSwap:
    def test_two_point_example(self, toy):
        data, prior = toy
        for fn in (lambda: swap_coefficients_naive(data, prior, 0, np.ones(1)),
                   lambda: swap_coefficients_fast(fit_posterior(data, prior), data, prior, 0, np.ones(1))):
            s = fn()
            assert s.c == pytest.approx(2 / 3, abs=1e-12)
            assert s.d == pytest.approx(1 / 3, abs=1e-12)
            assert s.delta_lev == pytest.approx(1 / 3, abs=1e-12)
            assert s.s1_sq == pytest.approx(4 / 3, abs=1e-12)

    def test_swap_identity(self, rng):
        data, prior = random_instance(rng, 15, 3, sigma2=1.0)
        st = fit_posterior(data, prior)
        for i in (0, 7, 14):
            s = swap_coefficients_fast(st, data, prior, i, data.X[i])
            assert s.mean(data.y[i]) == pytest.approx(data.X[i] @ st.beta_hat, abs=1e-10)
            assert s.delta_lev == pytest.approx(st.leverages[i], abs=1e-12)

    def test_orthogonal_candidate_has_no_influence(self, rng):
        data, prior = random_instance(rng, 12, 3)
        i = 2
        Aminus = data.X.T @ data.X + prior.Vinv - np.outer(data.X[i], data.X[i])
        # x_new orthogonal to x_i in the A_-i^-1 metric
        g = np.linalg.solve(Aminus, data.X[i])
        x_new = rng.standard_normal(3)
        x_new -= (x_new @ g) / (g @ g) * g
        assert abs(swap_coefficients_naive(data, prior, i, x_new).d) < 1e-12
        st = fit_posterior(data, prior)
        assert abs(swap_coefficients_fast(st, data, prior, i, x_new).d) < 1e-12

    def test_affine_in_candidate(self, rng):
        data, prior = random_instance(rng, 18, 4)
        x_new = rng.standard_normal(4)
        st = fit_posterior(data, prior)
        for i in (0, 9):
            s = swap_coefficients_fast(st, data, prior, i, x_new)
            for a in (-1.0, 0.0, 1.0):
                X = np.vstack([np.delete(data.X, i, axis=0), x_new])
                y = np.append(np.delete(data.y, i), a)
                m = data.X[i] @ direct_posterior_mean(Dataset(X, y), prior)
                assert abs(m - s.mean(a)) <= 1e-10

    def test_fast_matches_naive(self, rng):
        data, prior = random_instance(rng, 50, 8, sigma2=0.7)
        st = fit_posterior(data, prior)
        x_new = rng.standard_normal(8)
        c, d, delta = swap_terms(st, data, x_new)
        for i in range(data.n):
            ref = swap_coefficients_naive(data, prior, i, x_new)
            fast = swap_coefficients_fast(st, data, prior, i, x_new)
            for s in (fast,):
                assert abs(s.c - ref.c) < 1e-10 and abs(s.d - ref.d) < 1e-10
                assert abs(s.delta_lev - ref.delta_lev) < 1e-10
                assert s.s1_sq == pytest.approx(ref.s1_sq, rel=1e-8)
                assert s.s1_sq > 0.7
            assert abs(c[i] - ref.c) < 1e-10 and abs(d[i] - ref.d) < 1e-10
            assert abs(delta[i] - ref.delta_lev) < 1e-10

    def test_fast_path_is_faster(self, rng):
        data, prior = random_instance(rng, 2000, 16)
        st = fit_posterior(data, prior)
        x_new = rng.standard_normal(16)
        idx = range(0, 2000, 10)
        t0 = time.perf_counter()
        for i in idx:
            swap_coefficients_naive(data, prior, i, x_new)
        t_naive = time.perf_counter() - t0
        t0 = time.perf_counter()
        for i in idx:
            swap_coefficients_fast(st, data, prior, i, x_new)
        t_fast = time.perf_counter() - t0
        assert t_naive > 5 * t_fast


def test_map_predictive(rng):
    data, prior = random_instance(rng, 20, 3)
    st = fit_posterior(data, prior)
    x = rng.standard_normal(3)
    mean, var = map_predictive(st, x, 2.0)
    assert mean == pytest.approx(x @ direct_posterior_mean(data, prior), abs=1e-12)
    A = data.X.T @ data.X + np.linalg.inv(prior.V)
    assert var == pytest.approx(2.0 * (1 + x @ np.linalg.solve(A, x)), rel=1e-12)


def test_sigma2_posterior_params(rng):
    data, prior = random_instance(rng, 20, 3)
    st = fit_posterior(data, prior)
    shape, scale = sigma2_posterior_params(st, data, prior, 0.1, 0.2)
    # residual form of the same quadratic
    Vinv = np.linalg.inv(prior.V)
    r = data.y - data.X @ st.beta_hat
    e = st.beta_hat - prior.beta0
    assert shape == pytest.approx(0.1 + 10)
    assert scale == pytest.approx(0.2 + 0.5 * (r @ r + e @ Vinv @ e), rel=1e-10)


def test_random_spd_helper(rng):
    assert np.all(np.linalg.eigvalsh(random_spd(rng, 6)) > 0)
