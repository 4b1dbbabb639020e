"""Property-based checks over randomly generated inputs."""

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from cpp_predict.conjugate import Dataset, PriorSpec, fit_posterior, swap_coefficients_naive, swap_terms
from cpp_predict.divergences import DivergenceKind, divergence_gap, score_gap
from cpp_predict.lab import ContaminationSpec, contaminate
from cpp_predict.protocol import SplitPlan, make_splits
from cpp_predict.solver import CppConfig, CppProblem, solve

KINDS = [DivergenceKind("logbc"), DivergenceKind("hellinger"), DivergenceKind("dpd", 0.5), DivergenceKind("dpd", 2.0)]
kinds = st.sampled_from(KINDS)
pos = st.floats(0.05, 20.0)
gaps = st.floats(-50.0, 50.0)
SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@SETTINGS
@given(kinds, gaps, pos, pos)
def test_gap_nonnegative_even_and_zero_at_origin(kind, d, s1, s2):
    g = divergence_gap(kind, d, s1, s2)
    assert g >= 0
    assert g == divergence_gap(kind, -d, s1, s2)
    assert score_gap(kind, d, s1, s2) == -score_gap(kind, -d, s1, s2)
    assert divergence_gap(kind, 0.0, s1, s1) == pytest.approx(0.0, abs=1e-15)


@st.composite
def problems(draw):
    n = draw(st.integers(2, 12))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    d = rng.normal(0, 1, n)
    d[0] = 0.5 + abs(d[0])
    return CppProblem(rng.normal(0, 2, n), rng.normal(0, 1, n), d, rng.uniform(0.3, 2, n), rng.uniform(0.3, 2, n),
                      draw(kinds), float(rng.normal()), float(rng.uniform(0.5, 2.0)))


def shifted(p, t):
    return CppProblem(p.m2 + p.d * t, p.c, p.d, p.s1_sq, p.s2_sq, p.divergence, p.map_prediction + t, p.sigma_hat)


def scaled(p, k):
    return CppProblem(k * p.m2, k * p.c, p.d, k * k * p.s1_sq, k * k * p.s2_sq, p.divergence,
                      k * p.map_prediction, k * p.sigma_hat)


@SETTINGS
@given(problems())
def test_solution_beats_every_window_grid_point(p):
    cfg = CppConfig()
    sol = solve(p, cfg)
    hw = cfg.window_sd * p.sigma_hat * (2 if sol.boundary else 1)
    grid = p.map_prediction + np.linspace(-hw, hw, 2001)
    assert sol.objective_at_star <= np.min(p.objective(grid)) + 1e-9 * (1 + abs(sol.objective_at_star))


@SETTINGS
@given(problems(), st.floats(-100.0, 100.0))
def test_translation_equivariance(p, t):
    a = solve(p).a_star
    b = solve(shifted(p, t)).a_star
    assert b == pytest.approx(a + t, abs=1e-6 * (1 + abs(t)))


@SETTINGS
@given(problems(), st.floats(0.01, 100.0))
def test_scale_equivariance(p, k):
    a = solve(p).a_star
    b = solve(scaled(p, k)).a_star
    assert b == pytest.approx(k * a, abs=1e-6 * (1 + k) * (1 + abs(a)))


@SETTINGS
@given(st.integers(3, 15), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_swap_rank_two_matches_refit(n, p, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    data = Dataset(X, rng.standard_normal(n))
    prior = PriorSpec(rng.standard_normal(p), np.diag(rng.uniform(0.5, 3.0, p)))
    x_new = rng.standard_normal(p)
    c, d, delta = swap_terms(fit_posterior(data, prior), data, x_new)
    for i in range(n):
        ref = swap_coefficients_naive(data, prior, i, x_new)
        assert abs(c[i] - ref.c) <= 1e-9 * (1 + abs(ref.c))
        assert abs(d[i] - ref.d) <= 1e-9 * (1 + abs(ref.d))
        assert abs(delta[i] - ref.delta_lev) <= 1e-9 * (1 + abs(ref.delta_lev))


@SETTINGS
@given(st.integers(2, 200), st.floats(0.0, 0.99), st.integers(0, 10_000))
def test_contamination_count(n, frac, seed):
    rng = np.random.default_rng(seed)
    data = Dataset(rng.standard_normal((n, 2)), rng.standard_normal(n))
    out = contaminate(data, ContaminationSpec(frac, 10.0), seed)
    assert out.indices.size == int(np.floor(frac * n + 1e-9))
    assert np.all(np.diff(out.indices) > 0)


@SETTINGS
@given(st.integers(5, 80), st.data())
def test_split_invariants(n, data):
    k_out = data.draw(st.integers(0, min(4, n - 3)))
    outliers = tuple(data.draw(st.lists(st.integers(0, n - 1), min_size=k_out, max_size=k_out, unique=True)))
    clean = n - len(outliers)
    n_clean_test = data.draw(st.integers(1, clean - 1))
    plan = SplitPlan(n_clean_test, outliers, 3, data.draw(st.integers(0, 99)))
    for train, test in make_splits(n, plan):
        assert test.size == plan.test_size
        assert set(outliers) <= set(test) and not set(outliers) & set(train)
        assert train.size + test.size == n and not set(train) & set(test)
