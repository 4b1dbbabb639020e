"""Assemble and minimize the CPP objective ``J(a) = sum_i D(p_i, q_i(.; a))``.

The candidate enters each term only through ``Delta_i(a) = m2_i - (c_i + d_i a)``.
Log-BC has a weighted least-squares closed form; Hellinger and DPD are solved
by a grid over ``map +- window_sd * sigma_hat`` followed by golden section in
the best grid cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .conjugate import (
    Dataset,
    LooPredictive,
    PosteriorState,
    PriorSpec,
    SwapCoefficients,
    fit_posterior,
    loo_all,
    sigma2_posterior_params,
    swap_terms,
)
from .divergences import (
    LOGBC,
    DivergenceKind,
    convexity_radius,
    divergence_gap,
    score_gap,
    second_derivative_gap,
)
from .errors import AllDZero


@dataclass(frozen=True)
class CppConfig:
    grid_len: int = 61
    window_sd: float = 4.0
    refine_tol: float = 1e-8
    summary: str = "mean"
    truncate_quantile: float | None = None

    def __post_init__(self):
        if self.grid_len < 3 or self.grid_len % 2 == 0:
            raise ValueError(f"grid_len must be odd and >= 3, got {self.grid_len}")
        if not (self.window_sd > 0 and self.refine_tol > 0):
            raise ValueError("window_sd and refine_tol must be positive")
        if self.summary not in ("mean", "median"):
            raise ValueError(f"summary must be 'mean' or 'median', got {self.summary!r}")
        if self.truncate_quantile is not None and not 0 < self.truncate_quantile <= 1:
            raise ValueError("truncate_quantile must lie in (0, 1]")


@dataclass(frozen=True)
class CppProblem:
    m2: np.ndarray
    c: np.ndarray
    d: np.ndarray
    s1_sq: np.ndarray
    s2_sq: np.ndarray
    divergence: DivergenceKind
    map_prediction: float
    sigma_hat: float

    def __post_init__(self):
        arrays = [np.atleast_1d(np.asarray(getattr(self, k), dtype=float)) for k in ("m2", "c", "d", "s1_sq", "s2_sq")]
        n = arrays[0].size
        if n < 1 or any(a.shape != (n,) for a in arrays):
            raise ValueError("problem terms must be 1-d arrays of one common length >= 1")
        for k, a in zip(("m2", "c", "d", "s1_sq", "s2_sq"), arrays):
            object.__setattr__(self, k, a)
        if np.all(arrays[2] == 0):
            raise AllDZero("every swap slope d_i is zero; the objective is constant in a")
        if np.any(arrays[3] <= 0) or np.any(arrays[4] <= 0):
            raise ValueError("predictive variances must be positive")
        if not self.sigma_hat > 0:
            raise ValueError("sigma_hat must be positive")

    @property
    def n(self):
        return self.m2.size

    def delta(self, a):
        a = np.asarray(a, dtype=float)
        return self.m2 - self.c - self.d * a[..., None] if a.ndim else self.m2 - self.c - self.d * float(a)

    def objective(self, a):
        return divergence_gap(self.divergence, self.delta(a), self.s1_sq, self.s2_sq).sum(axis=-1)

    def derivative(self, a):
        return -(self.d * score_gap(self.divergence, self.delta(a), self.s1_sq, self.s2_sq)).sum(axis=-1)

    def second_derivative(self, a):
        return (self.d**2 * second_derivative_gap(self.divergence, self.delta(a), self.s1_sq, self.s2_sq)).sum(axis=-1)


@dataclass(frozen=True)
class CppSolution:
    a_star: float
    objective_at_star: float
    converged: bool
    convexity_ok: bool
    curvature: float
    boundary: bool = False
    gradient: float = 0.0


@dataclass(frozen=True)
class ScaledProblem:
    """Conjugate-model terms at unit noise scale.

    At noise level ``sigma2`` the variances are ``sigma2 * u1`` and
    ``sigma2 * u2`` while the means are unchanged, so one set of swap
    coefficients serves every posterior draw.
    """

    m2: np.ndarray
    c: np.ndarray
    d: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    divergence: DivergenceKind
    map_prediction: float
    map_var_unit: float = field(default=1.0)

    def at(self, sigma2, sigma_hat=None):
        return CppProblem(
            self.m2, self.c, self.d, sigma2 * self.u1, sigma2 * self.u2, self.divergence,
            self.map_prediction, math.sqrt(sigma2) if sigma_hat is None else sigma_hat,
        )

    def __call__(self, sigma2):
        return self.at(sigma2)


# ---------------------------------------------------------------------------
# assembly


def assemble_problem(
    loo: Sequence[LooPredictive],
    swaps: Sequence[SwapCoefficients],
    divergence: DivergenceKind,
    map_prediction: float,
    sigma_hat: float,
) -> CppProblem:
    if len(loo) != len(swaps):
        raise ValueError(f"{len(loo)} LOO terms but {len(swaps)} swap terms")
    return CppProblem(
        np.array([t.m2 for t in loo]),
        np.array([s.c for s in swaps]),
        np.array([s.d for s in swaps]),
        np.array([s.s1_sq for s in swaps]),
        np.array([t.s2_sq for t in loo]),
        divergence,
        float(map_prediction),
        float(sigma_hat),
    )


def scaled_problem(state: PosteriorState, data: Dataset, x_new, divergence: DivergenceKind) -> ScaledProblem:
    x_new = np.asarray(x_new, dtype=float)
    m2, u2 = loo_all(state, data)
    c, d, delta = swap_terms(state, data, x_new)
    return ScaledProblem(m2, c, d, 1.0 + delta, u2, divergence, float(x_new @ state.beta_hat), 1.0 + state.quad(x_new))


def linear_problem(state: PosteriorState, data: Dataset, x_new, divergence: DivergenceKind, sigma2: float) -> CppProblem:
    """Known-variance problem for the conjugate backend."""
    return scaled_problem(state, data, x_new, divergence).at(sigma2)


def gp_problem(model, x_new, divergence: DivergenceKind, sigma_hat: float | None = None) -> CppProblem:
    from .gp import gp_predictive, gp_terms

    m2, s2_sq, c, d, s1_sq = gp_terms(model, np.asarray(x_new, dtype=float))
    center = gp_predictive(model, x_new).mean
    return CppProblem(m2, c, d, s1_sq, s2_sq, divergence, center,
                      math.sqrt(model.sigma2) if sigma_hat is None else sigma_hat)


# ---------------------------------------------------------------------------
# solvers


def objective_eval(prob: CppProblem, a: float) -> float:
    return float(prob.objective(a))


def _finish(prob: CppProblem, a, fa, boundary):
    delta = prob.delta(a)
    radius = convexity_radius(prob.divergence, prob.s1_sq, prob.s2_sq)
    return CppSolution(
        a_star=float(a),
        objective_at_star=float(fa),
        converged=not boundary,
        convexity_ok=bool(np.all(np.abs(delta) < radius)),
        curvature=float(prob.second_derivative(a)),
        boundary=bool(boundary),
        gradient=float(prob.derivative(a)),
    )


def solve_logbc_closed_form(prob: CppProblem) -> CppSolution:
    """Weighted least squares in the gaps: ``sum (d/D)(m2 - c) / sum d^2/D``."""
    D = prob.s1_sq + prob.s2_sq
    den = np.sum(prob.d**2 / D)
    if not den > 0:
        raise AllDZero("sum d_i^2 / D_i vanishes")
    a = float(np.sum(prob.d / D * (prob.m2 - prob.c)) / den)
    lb = prob if prob.divergence.kind == LOGBC else replace(prob, divergence=DivergenceKind(LOGBC))
    return _finish(lb, a, lb.objective(a), False)


def solve_1d(prob: CppProblem, cfg: CppConfig = CppConfig()) -> CppSolution:
    """Grid plus golden-section minimization of ``J`` around the plug-in prediction."""
    a, fa, bnd = kernels.solve_scaled(
        prob.m2, prob.c, prob.d, prob.s1_sq, prob.s2_sq, np.array([1.0]),
        prob.map_prediction, cfg.window_sd * prob.sigma_hat, cfg.grid_len, cfg.refine_tol,
        prob.divergence.code, prob.divergence.alpha_value,
    )
    return _finish(prob, a[0], fa[0], bool(bnd[0]))


def solve(prob: CppProblem, cfg: CppConfig = CppConfig()) -> CppSolution:
    if prob.divergence.kind == LOGBC:
        return solve_logbc_closed_form(prob)
    return solve_1d(prob, cfg)


# ---------------------------------------------------------------------------
# unknown variance


def draw_sigma2_posterior(data: Dataset, prior: PriorSpec, a0: float, b0: float, n_draws: int, seed, state=None):
    """Exact draws from the marginal inverse-gamma posterior of the noise variance."""
    if n_draws < 1:
        raise ValueError("n_draws must be positive")
    state = fit_posterior(data, prior) if state is None else state
    shape, scale = sigma2_posterior_params(state, data, prior, a0, b0)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return scale / rng.gamma(shape, 1.0, size=n_draws)


def robustify_draws(draws, quantile):
    """Truncate draws above the given empirical quantile."""
    draws = np.asarray(draws, dtype=float)
    if quantile is None:
        return draws
    return np.minimum(draws, np.quantile(draws, quantile))


def window_sigma(draws):
    """Scale of the search window: posterior mean of sigma."""
    return float(np.mean(np.sqrt(draws)))


class ApproachIResult(NamedTuple):
    a_hat: float
    solutions: np.ndarray
    boundary: np.ndarray


def _summarize(values, how):
    return float(np.median(values) if how == "median" else np.mean(values))


def solve_approach_I(
    builder: ScaledProblem | Callable[[float], CppProblem],
    sigma2_draws,
    cfg: CppConfig = CppConfig(),
    sigma_hat: float | None = None,
) -> ApproachIResult:
    """Solve once per noise draw and summarize the solutions.

    Draws whose minimum sits on the (doubled) window edge are left out of the
    summary unless every draw does.
    """
    draws = robustify_draws(sigma2_draws, cfg.truncate_quantile)
    sh = window_sigma(draws) if sigma_hat is None else sigma_hat
    if isinstance(builder, ScaledProblem):
        kind = builder.divergence
        if kind.kind == LOGBC:
            # the closed form is invariant to a common rescaling of the variances
            a = solve_logbc_closed_form(builder.at(1.0)).a_star
            sols, bnd = np.full(draws.size, a), np.zeros(draws.size, dtype=bool)
        else:
            sols, _, b8 = kernels.solve_scaled(
                builder.m2, builder.c, builder.d, builder.u1, builder.u2, draws,
                builder.map_prediction, cfg.window_sd * sh, cfg.grid_len, cfg.refine_tol,
                kind.code, kind.alpha_value,
            )
            bnd = b8.astype(bool)
    else:
        sols = np.empty(draws.size)
        bnd = np.zeros(draws.size, dtype=bool)
        for t, s2 in enumerate(draws):
            try:
                sol = solve(replace(builder(float(s2)), sigma_hat=sh), cfg)
            except Exception as exc:
                raise type(exc)(f"draw {t}: {exc}") from exc
            sols[t], bnd[t] = sol.a_star, sol.boundary
    keep = ~bnd if not np.all(bnd) else np.ones_like(bnd)
    return ApproachIResult(_summarize(sols[keep], cfg.summary), sols, bnd)


def solve_approach_II(
    builder: ScaledProblem | Callable[[float], CppProblem],
    sigma2_draws,
    cfg: CppConfig = CppConfig(),
    sigma_hat: float | None = None,
) -> CppSolution:
    """Minimize the draw-averaged objective ``mean_t J(a; sigma2_t)``."""
    draws = robustify_draws(sigma2_draws, cfg.truncate_quantile)
    sh = window_sigma(draws) if sigma_hat is None else sigma_hat
    if isinstance(builder, ScaledProblem):
        b = builder
        kind = b.divergence

        const, _ = kernels.objective_scaled_mean(b.m2, b.c, b.d, b.u1, b.u2, draws, [b.map_prediction],
                                                 kind.code, kind.alpha_value)

        def fun(a):
            return kernels.objective_scaled_mean(b.m2, b.c, b.d, b.u1, b.u2, draws, a, kind.code, kind.alpha_value)[1]

        center = b.map_prediction
        problems = [b.at(float(s2), sh) for s2 in draws]
    else:
        problems = [replace(builder(float(s2)), sigma_hat=sh) for s2 in draws]

        const = 0.0

        def fun(a):
            return np.mean([p.objective(np.asarray(a)) for p in problems], axis=0)

        center = problems[0].map_prediction
    a, fa, bnd, _ = kernels.grid_refine(fun, center, cfg.window_sd * sh, cfg.grid_len, cfg.refine_tol)
    fa += const
    curv = float(np.mean([p.second_derivative(a) for p in problems]))
    grad = float(np.mean([p.derivative(a) for p in problems]))
    ok = all(
        np.all(np.abs(p.delta(a)) < convexity_radius(p.divergence, p.s1_sq, p.s2_sq)) for p in problems
    )
    return CppSolution(float(a), float(fa), not bnd, bool(ok), curv, bool(bnd), grad)
