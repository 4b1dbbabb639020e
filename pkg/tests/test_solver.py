import math
from dataclasses import replace

import numpy as np
import pytest
from conftest import random_instance
from scipy import optimize

from cpp_predict.conjugate import (
    Dataset,
    PriorSpec,
    fit_posterior,
    loo_predictive,
    swap_coefficients_fast,
)
from cpp_predict.divergences import DivergenceKind
from cpp_predict.errors import AllDZero
from cpp_predict.gp import KernelSpec, fit_gp
from cpp_predict.solver import (
    CppConfig,
    CppProblem,
    assemble_problem,
    draw_sigma2_posterior,
    gp_problem,
    linear_problem,
    objective_eval,
    robustify_draws,
    scaled_problem,
    solve,
    solve_1d,
    solve_approach_I,
    solve_approach_II,
    solve_logbc_closed_form,
)

BC = DivergenceKind("logbc")
H = DivergenceKind("hellinger")
DPD1 = DivergenceKind("dpd", 1.0)


def single(m2=5.0, c=0.0, d=1.0, kind=H, s1=1.0, s2=1.0, center=None):
    return CppProblem([m2], [c], [d], [s1], [s2], kind, (m2 - c) / d if center is None else center, 1.0)


def random_problem(rng, n, kind, spread=1.0):
    d = rng.uniform(0.2, 1.5, n) * rng.choice([-1, 1], n)
    c = rng.normal(0, 1, n)
    target = rng.normal(0.3, spread, n)
    m2 = c + d * target
    return CppProblem(m2, c, d, rng.uniform(0.5, 2, n), rng.uniform(0.5, 2, n), kind, float(np.median(target)), 1.0)


def dense_min(prob, lo, hi, k=100_001):
    grid = np.linspace(lo, hi, k)
    vals = np.array([prob.objective(g) for g in grid]) if prob.n > 200 else prob.objective(grid)
    j = int(np.argmin(vals))
    res = optimize.minimize_scalar(lambda a: float(prob.objective(a)), bounds=(grid[max(j - 1, 0)], grid[min(j + 1, k - 1)]),
                                   method="bounded", options={"xatol": 1e-12})
    return res.x if res.fun <= vals[j] else grid[j]


class TestConfig:
    def test_defaults(self):
        cfg = CppConfig()
        assert (cfg.grid_len, cfg.window_sd, cfg.refine_tol, cfg.summary) == (61, 4.0, 1e-8, "mean")

    @pytest.mark.parametrize("kw", [{"grid_len": 60}, {"grid_len": 1}, {"window_sd": 0}, {"summary": "mode"},
                                    {"truncate_quantile": 1.5}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            CppConfig(**kw)


class TestAssembly:
    def test_single_term_gap(self):
        prob = single(m2=5.0, c=0.0, d=1.0)
        assert prob.delta(2.0)[0] == 3.0

    def test_all_d_zero(self):
        with pytest.raises(AllDZero):
            CppProblem([1.0, 2.0], [0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0], H, 0.0, 1.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            CppProblem([1.0, 2.0], [0.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0], H, 0.0, 1.0)

    def test_from_two_point_example(self, toy):
        data, prior = toy
        st = fit_posterior(data, prior)
        x_new = np.ones(1)
        loo = [loo_predictive(st, data, i, 1.0) for i in range(2)]
        swaps = [swap_coefficients_fast(st, data, prior, i, x_new) for i in range(2)]
        prob = assemble_problem(loo, swaps, H, float(st.beta_hat[0]), 1.0)
        assert prob.c[0] == pytest.approx(2 / 3) and prob.d[0] == pytest.approx(1 / 3)
        ref = linear_problem(st, data, x_new, H, 1.0)
        for k in ("m2", "c", "d", "s1_sq", "s2_sq"):
            np.testing.assert_allclose(getattr(prob, k), getattr(ref, k), atol=1e-12)
        with pytest.raises(ValueError):
            assemble_problem(loo[:1], swaps, H, 0.0, 1.0)

    def test_gp_linear_kernel_problem_matches_conjugate(self, rng):
        X = rng.standard_normal((12, 3))
        y = X @ np.array([1.0, -1.0, 0.5]) + rng.standard_normal(12)
        s2, v = 0.8, 3.0
        data = Dataset(X, y)
        st = fit_posterior(data, PriorSpec(np.zeros(3), v * np.eye(3), s2))
        x_new = rng.standard_normal(3)
        a = linear_problem(st, data, x_new, DPD1, s2)
        b = gp_problem(fit_gp(X, y, KernelSpec("linear", signal_var=s2 * v), s2), x_new, DPD1)
        for k in ("m2", "c", "d", "s1_sq", "s2_sq"):
            np.testing.assert_allclose(getattr(a, k), getattr(b, k), atol=1e-8)
        assert a.map_prediction == pytest.approx(b.map_prediction, abs=1e-8)


class TestObjective:
    def test_zero_gap_floor(self):
        c = np.array([0.0, 1.0, -1.0])
        d = np.array([1.0, 2.0, 0.5])
        a0 = 0.7
        s1, s2 = np.array([1.0, 1.5, 2.0]), np.array([1.2, 1.1, 3.0])
        prob = CppProblem(c + d * a0, c, d, s1, s2, H, a0, 1.0)
        floor = np.sum(1 - np.sqrt(2 * np.sqrt(s1 * s2) / (s1 + s2)))
        assert objective_eval(prob, a0) == pytest.approx(floor, abs=1e-15)

    def test_hellinger_saturates(self, rng):
        prob = random_problem(rng, 7, H)
        assert objective_eval(prob, 1e8) == pytest.approx(7.0, abs=1e-12)
        assert objective_eval(prob, 0.0) < 7.0

    def test_matches_termwise_quadrature(self, rng):
        from scipy import integrate, stats

        prob = random_problem(rng, 4, DPD1)
        a = 0.4
        total = 0.0
        for i in range(4):
            p = stats.norm(prob.m2[i], math.sqrt(prob.s2_sq[i])).pdf
            q = stats.norm(prob.c[i] + prob.d[i] * a, math.sqrt(prob.s1_sq[i])).pdf
            total += integrate.quad(lambda x: p(x) ** 2 - 2 * q(x) * p(x) + q(x) ** 2, -40, 40,
                                    epsabs=1e-13, limit=400)[0]
        assert objective_eval(prob, a) == pytest.approx(total, abs=1e-8)


class TestLogBc:
    def test_single_term(self):
        assert solve_logbc_closed_form(single(5.0, kind=BC)).a_star == pytest.approx(5.0, abs=1e-14)

    def test_symmetric_pair(self):
        prob = CppProblem([1.0 + 2.0, 1.0 - 2.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0], BC, 0.0, 1.0)
        assert solve_logbc_closed_form(prob).a_star == pytest.approx(1.0, abs=1e-14)

    def test_matches_dense_grid(self, rng):
        for _ in range(10):
            prob = random_problem(rng, 10, BC)
            sol = solve_logbc_closed_form(prob)
            assert sol.converged and sol.convexity_ok and sol.curvature > 0
            assert abs(sol.a_star - dense_min(prob, -10, 10)) <= 1e-6
            assert abs(sol.gradient) < 1e-10

    def test_solve_dispatches_to_closed_form(self, rng):
        prob = random_problem(rng, 6, BC)
        assert solve(prob).a_star == solve_logbc_closed_form(prob).a_star

    def test_translation(self):
        base = single(5.0, c=1.0, d=2.0, kind=BC)
        shifted = replace(base, m2=base.m2 + 3.0 * base.d)
        assert solve(shifted).a_star - solve(base).a_star == pytest.approx(3.0, abs=1e-13)


class TestSolve1d:
    @pytest.mark.parametrize("kind", [H, DPD1], ids=str)
    def test_single_term_root(self, kind):
        prob = single(m2=5.0, c=1.0, d=0.5, kind=kind, center=7.3)
        assert solve_1d(prob).a_star == pytest.approx(8.0, abs=1e-8)

    def test_dense_grid_dpd(self, rng):
        for _ in range(5):
            prob = random_problem(rng, 20, DPD1)
            sol = solve_1d(prob)
            assert not sol.boundary
            assert abs(sol.a_star - dense_min(prob, prob.map_prediction - 4, prob.map_prediction + 4)) <= 1e-4

    def test_convexity_implies_positive_curvature(self, rng):
        for kind in (H, DPD1):
            for _ in range(10):
                sol = solve_1d(random_problem(rng, 15, kind, spread=0.3))
                if sol.convexity_ok:
                    assert sol.curvature > 0
                assert abs(sol.gradient) < 1e-5

    def test_boundary_flag_after_doubling(self):
        # minimum at 20 while the window is 0 +- 4, doubled to +- 8; wide variances keep J sloped there
        prob = single(m2=20.0, kind=H, s1=25.0, s2=25.0, center=0.0)
        sol = solve_1d(prob)
        assert sol.boundary and not sol.converged
        assert sol.a_star == pytest.approx(8.0)

    def test_window_doubling_recovers(self):
        prob = single(m2=6.0, kind=H, center=0.0)
        sol = solve_1d(prob)
        assert not sol.boundary and sol.a_star == pytest.approx(6.0, abs=1e-8)

    def test_tie_break_nearest_center(self):
        # a flat objective: every grid point ties, the center wins
        prob = CppProblem([1e6], [0.0], [1.0], [1.0], [1.0], H, 0.25, 1.0)
        sol = solve_1d(prob, CppConfig(grid_len=5))
        assert sol.a_star == pytest.approx(0.25, abs=1e-12)

    def test_clean_data_close_to_map(self, rng):
        X = rng.standard_normal((200, 4))
        y = X @ np.array([1.0, -1.0, 0.5, 0.0]) + rng.standard_normal(200)
        data = Dataset(X, y)
        st = fit_posterior(data, PriorSpec.default(4))
        for _ in range(5):
            x_new = rng.standard_normal(4)
            for kind in (H, DPD1):
                sol = solve(linear_problem(st, data, x_new, kind, 1.0))
                assert abs(sol.a_star - x_new @ st.beta_hat) <= 0.05


class TestUnknownVariance:
    def test_draws_reproducible(self, rng):
        data, prior = random_instance(rng, 30, 3)
        a = draw_sigma2_posterior(data, prior, 0.1, 0.1, 1, seed=5)
        b = draw_sigma2_posterior(data, prior, 0.1, 0.1, 1, seed=5)
        assert a.shape == (1,) and a[0] == b[0]
        with pytest.raises(ValueError):
            draw_sigma2_posterior(data, prior, 0.1, 0.1, 0, seed=5)

    def test_posterior_concentrates(self, rng):
        X = rng.standard_normal((500, 3))
        data = Dataset(X, X @ np.ones(3) + rng.standard_normal(500))
        draws = draw_sigma2_posterior(data, PriorSpec.default(3), 0.1, 0.1, 2000, seed=1)
        assert abs(draws.mean() - 1.0) < 0.2

    def test_inverse_gamma_moment(self, rng):
        from cpp_predict.conjugate import sigma2_posterior_params

        data, prior = random_instance(rng, 40, 3)
        st = fit_posterior(data, prior)
        shape, scale = sigma2_posterior_params(st, data, prior, 2.0, 1.0)
        draws = draw_sigma2_posterior(data, prior, 2.0, 1.0, 10_000, seed=3)
        se = draws.std() / math.sqrt(draws.size)
        assert abs(draws.mean() - scale / (shape - 1)) < 3 * se

    def _scaled(self, rng, kind=DPD1):
        X = rng.standard_normal((60, 3))
        data = Dataset(X, X @ np.array([1.0, -1.0, 0.5]) + rng.standard_normal(60))
        prior = PriorSpec.default(3)
        st = fit_posterior(data, prior)
        return data, prior, st, scaled_problem(st, data, rng.standard_normal(3), kind)

    @pytest.mark.parametrize("kind", [H, DPD1, BC], ids=str)
    def test_degenerate_posterior_approach_I(self, rng, kind):
        data, prior, st, sp = self._scaled(rng, kind)
        res = solve_approach_I(sp, np.full(5, 1.3))
        ref = solve(sp.at(1.3))
        assert res.a_hat == ref.a_star
        assert np.all(res.solutions == ref.a_star)

    def test_generic_builder_matches_scaled(self, rng):
        data, prior, st, sp = self._scaled(rng)
        x_new = np.array([0.3, -1.2, 0.8])
        sp = scaled_problem(st, data, x_new, DPD1)
        draws = np.array([0.8, 1.0, 1.3])
        a = solve_approach_I(sp, draws)
        b = solve_approach_I(lambda s2: linear_problem(st, data, x_new, DPD1, s2), draws)
        np.testing.assert_allclose(a.solutions, b.solutions, atol=1e-10)

    def test_median_ignores_one_wild_solution(self, rng):
        data, prior, st, sp = self._scaled(rng)
        draws = np.array([0.9, 1.0, 1.1, 1.2, 1.3])
        base = solve_approach_I(sp, draws, CppConfig(summary="median"))
        calls = iter(range(100))

        def builder(s2):
            prob = sp.at(s2)
            if next(calls) == 2:
                # move every gap so that this draw's solution lands near 1e6
                return replace(prob, m2=prob.m2 + prob.d * 1e6, map_prediction=prob.map_prediction + 1e6)
            return prob

        wild = solve_approach_I(builder, draws, CppConfig(summary="median"))
        assert wild.solutions.max() > 1e5
        assert wild.a_hat == pytest.approx(base.a_hat, abs=abs(np.diff(np.sort(base.solutions))).max() + 1e-9)

    def test_boundary_draws_excluded(self, rng):
        data, prior, st, sp = self._scaled(rng)
        calls = iter(range(100))

        def builder(s2):
            prob = sp.at(s2)
            if next(calls) == 0:
                return replace(prob, m2=prob.m2 + prob.d * 1e3)
            return prob

        res = solve_approach_I(builder, np.array([1.0, 1.0, 1.0]))
        assert res.boundary.tolist() == [True, False, False]
        assert res.a_hat == pytest.approx(res.solutions[1])

    def test_errors_carry_draw_index(self):
        def builder(s2):
            raise AllDZero("nothing to solve")

        with pytest.raises(AllDZero, match="draw 0"):
            solve_approach_I(builder, np.array([1.0]))

    @pytest.mark.parametrize("kind", [H, DPD1], ids=str)
    def test_degenerate_posterior_approach_II(self, rng, kind):
        data, prior, st, sp = self._scaled(rng, kind)
        res = solve_approach_II(sp, np.full(4, 0.9))
        ref = solve_1d(sp.at(0.9))
        assert res.a_star == pytest.approx(ref.a_star, abs=1e-9)
        assert res.objective_at_star == pytest.approx(ref.objective_at_star, rel=1e-12)

    def test_two_draw_logbc_average(self, rng):
        data, prior, st, sp = self._scaled(rng, BC)
        draws = np.array([0.5, 2.0])
        res = solve_approach_II(lambda s2: sp.at(s2), draws, CppConfig(refine_tol=1e-11))
        # both objectives are weighted least squares in a with weights d^2 / (2 s2 (u1 + u2))
        w = sum(sp.d**2 / (4 * s * (sp.u1 + sp.u2)) for s in draws)
        r = sum(sp.d * (sp.m2 - sp.c) / (4 * s * (sp.u1 + sp.u2)) for s in draws)
        assert res.a_star == pytest.approx(r.sum() / w.sum(), abs=1e-8)

    def test_approaches_agree_on_clean_data(self, rng):
        X = rng.standard_normal((150, 3))
        data = Dataset(X, X @ np.array([1.0, -1.0, 0.5]) + rng.standard_normal(150))
        prior = PriorSpec.default(3)
        st = fit_posterior(data, prior)
        draws = draw_sigma2_posterior(data, prior, 0.1, 0.1, 500, seed=2, state=st)
        for _ in range(3):
            sp = scaled_problem(st, data, rng.standard_normal(3), DPD1)
            a1 = solve_approach_I(sp, draws).a_hat
            a2 = solve_approach_II(sp, draws).a_star
            assert abs(a1 - a2) <= 0.1 * math.sqrt(draws.mean())

    def test_truncation(self):
        draws = np.arange(1.0, 11.0)
        out = robustify_draws(draws, 0.9)
        assert out.max() == pytest.approx(np.quantile(draws, 0.9))
        assert robustify_draws(draws, None) is not None and np.all(robustify_draws(draws, None) == draws)

    def test_draw_order_irrelevant(self, rng):
        data, prior, st, sp = self._scaled(rng)
        draws = draw_sigma2_posterior(data, prior, 0.1, 0.1, 50, seed=4, state=st)
        a = solve_approach_I(sp, draws).a_hat
        b = solve_approach_I(sp, draws[::-1]).a_hat
        assert a == pytest.approx(b, abs=1e-12)
