"""End-to-end CPP and plug-in predictions for a batch of new covariate rows.

One :class:`ModelConfig` drives the three backends:

``linear``  conjugate model on the covariates as given (optionally with an intercept)
``basis``   the same model on a fixed basis expansion of the covariates
``gp``      Gaussian-process regression with fixed hyperparameters and known noise

With the conjugate backends and ``sigma2=None`` the noise variance is
integrated out by posterior draws (Approach I or II). Both the CPP and the
plug-in densities use the predictive variance ``sigma2_bar * (1 + x'A^-1 x)``
with ``sigma2_bar`` the mean of the draws, so comparisons isolate the point
prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSpec, basis_expand
from .conjugate import Dataset, PriorSpec, fit_posterior, map_predictive
from .divergences import DivergenceKind, convexity_radius
from .gp import KernelSpec, fit_gp, gp_predictive
from .solver import (
    CppConfig,
    draw_sigma2_posterior,
    gp_problem,
    robustify_draws,
    scaled_problem,
    solve,
    solve_approach_I,
    solve_approach_II,
    window_sigma,
)

BACKENDS = ("linear", "basis", "gp")


@dataclass(frozen=True)
class ModelConfig:
    divergence: DivergenceKind = field(default_factory=lambda: DivergenceKind("dpd", 1.0))
    backend: str = "linear"
    intercept: bool = False
    prior_scale: float = 100.0
    a0: float = 0.1
    b0: float = 0.1
    sigma2: float | None = None
    n_draws: int = 500
    approach: str = "I"
    cpp: CppConfig = field(default_factory=CppConfig)
    basis: BasisSpec = field(default_factory=BasisSpec)
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.approach not in ("I", "II"):
            raise ValueError("approach must be 'I' or 'II'")
        if not (self.prior_scale > 0 and self.a0 > 0 and self.b0 > 0 and self.n_draws >= 1):
            raise ValueError("prior_scale, a0, b0 must be positive and n_draws >= 1")
        if self.sigma2 is not None and not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive when given")
        if self.backend == "gp" and self.sigma2 is None:
            raise ValueError("the gp backend needs a fixed noise variance sigma2")


@dataclass(frozen=True)
class Predictions:
    """Per-row results; ``boundary_draws`` counts draws whose minimum hit the window edge."""

    cpp_mean: np.ndarray
    map_mean: np.ndarray
    pred_var: np.ndarray
    boundary_draws: np.ndarray
    convexity_ok: np.ndarray
    sigma2_bar: float
    sigma_hat: float

    def cpp_logpdf(self, y):
        return _normal_logpdf(y, self.cpp_mean, self.pred_var)

    def map_logpdf(self, y):
        return _normal_logpdf(y, self.map_mean, self.pred_var)

    def gains(self, y):
        """Per-row ``log p_CPP(y) - log p_MAP(y)``."""
        y = np.asarray(y, dtype=float)
        return ((y - self.map_mean) ** 2 - (y - self.cpp_mean) ** 2) / (2.0 * self.pred_var)


def _normal_logpdf(y, mean, var):
    y = np.asarray(y, dtype=float)
    return -0.5 * (np.log(2.0 * math.pi * var) + (y - mean) ** 2 / var)


def design(X_raw, cfg: ModelConfig):
    X = np.asarray(X_raw, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if cfg.backend == "basis":
        return basis_expand(X, cfg.basis)
    if cfg.intercept:
        return np.column_stack([np.ones(X.shape[0]), X])
    return X


def predict(train: Dataset, X_new, cfg: ModelConfig, rng=None) -> Predictions:
    """CPP and plug-in predictions at every row of ``X_new``.

    ``rng`` (seed or Generator) drives the noise-variance draws; it is unused
    when the variance is known.
    """
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    if cfg.backend == "gp":
        return _predict_gp(train, X_new, cfg)
    Z = design(train.X, cfg)
    Znew = design(X_new, cfg)
    data = Dataset(Z, train.y)
    prior = PriorSpec.default(Z.shape[1], cfg.prior_scale, cfg.sigma2)
    state = fit_posterior(data, prior)
    if cfg.sigma2 is None:
        draws = draw_sigma2_posterior(data, prior, cfg.a0, cfg.b0, cfg.n_draws, rng, state=state)
        draws = robustify_draws(draws, cfg.cpp.truncate_quantile)
    else:
        draws = np.array([cfg.sigma2])
    s2_bar = float(np.mean(draws))
    sh = window_sigma(draws)
    m = Znew.shape[0]
    cpp_mean, map_mean, var = np.empty(m), np.empty(m), np.empty(m)
    bnd, conv = np.zeros(m, dtype=int), np.ones(m, dtype=bool)
    for k, x in enumerate(Znew):
        sp = scaled_problem(state, data, x, cfg.divergence)
        map_mean[k], var[k] = map_predictive(state, x, s2_bar)
        if cfg.approach == "I":
            res = solve_approach_I(sp, draws, cfg.cpp, sh)
            cpp_mean[k], bnd[k] = res.a_hat, int(res.boundary.sum())
            conv[k] = _convex_at(sp.at(s2_bar, sh), cpp_mean[k])
        else:
            sol = solve_approach_II(sp, draws, cfg.cpp, sh)
            cpp_mean[k], bnd[k], conv[k] = sol.a_star, int(sol.boundary), sol.convexity_ok
    return Predictions(cpp_mean, map_mean, var, bnd, conv, s2_bar, sh)


def _convex_at(prob, a):
    # every |Delta_i| inside its convexity radius at the plug-in noise level
    return bool(np.all(np.abs(prob.delta(a)) < convexity_radius(prob.divergence, prob.s1_sq, prob.s2_sq)))


def _predict_gp(train: Dataset, X_new, cfg: ModelConfig) -> Predictions:
    model = fit_gp(train.X, train.y, cfg.kernel, cfg.sigma2)
    sh = math.sqrt(cfg.sigma2)
    m = X_new.shape[0]
    cpp_mean, map_mean, var = np.empty(m), np.empty(m), np.empty(m)
    bnd, conv = np.zeros(m, dtype=int), np.ones(m, dtype=bool)
    for k, x in enumerate(X_new):
        law = gp_predictive(model, x)
        sol = solve(gp_problem(model, x, cfg.divergence, sh), cfg.cpp)
        cpp_mean[k], map_mean[k], var[k] = sol.a_star, law.mean, law.var
        bnd[k], conv[k] = int(sol.boundary), sol.convexity_ok
    return Predictions(cpp_mean, map_mean, var, bnd, conv, cfg.sigma2, sh)
