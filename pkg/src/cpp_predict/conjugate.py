"""Conjugate Gaussian linear-model algebra.

Model: ``y | beta ~ N(X beta, sigma2 I)``, ``beta ~ N(beta0, sigma2 V)``. With
``A = X'X + V^-1`` and ``b = X'y + V^-1 beta0`` the posterior mean is
``A^-1 b``. Leave-one-out and swapped predictives are obtained from ``A^-1``
by rank-one/rank-two updates; the ``*_naive`` functions re-solve from scratch
and exist as test oracles.

Because the prior scales with ``sigma2``, every mean and leverage below is
free of ``sigma2``; variances are ``sigma2`` times a unit-scale factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DegenerateAugmentation, DegenerateLeverage, NotPositiveDefinite

LEVERAGE_GUARD = 1e-12


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if X.shape[0] < 2 or X.shape[1] < 1:
            raise ValueError(f"need n >= 2 and p >= 1, got X of shape {X.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def drop(self, i):
        keep = np.arange(self.n) != i
        return Dataset(self.X[keep], self.y[keep])

    def with_response(self, j, value):
        y = self.y.copy()
        y[j] = value
        return Dataset(self.X, y)


@dataclass(frozen=True)
class PriorSpec:
    beta0: np.ndarray
    V: np.ndarray
    sigma2: float | None = None

    def __post_init__(self):
        beta0 = np.asarray(self.beta0, dtype=float).ravel()
        V = np.atleast_2d(np.asarray(self.V, dtype=float))
        if V.shape != (beta0.size, beta0.size):
            raise ValueError(f"V has shape {V.shape}, expected {(beta0.size, beta0.size)}")
        if not np.allclose(V, V.T, rtol=1e-12, atol=1e-14 * np.abs(V).max()):
            raise NotPositiveDefinite("prior scale V is not symmetric")
        if self.sigma2 is not None and not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive when given")
        object.__setattr__(self, "beta0", beta0)
        object.__setattr__(self, "V", V)

    @classmethod
    def default(cls, p, scale=100.0, sigma2=None):
        """``beta ~ N(0, sigma2 * scale * I)``."""
        return cls(np.zeros(p), scale * np.eye(p), sigma2)

    @property
    def Vinv(self):
        try:
            cf = linalg.cho_factor(self.V, lower=True)
        except linalg.LinAlgError as exc:
            raise NotPositiveDefinite("prior scale V is not positive definite") from exc
        return linalg.cho_solve(cf, np.eye(self.V.shape[0]))


@dataclass(frozen=True)
class PosteriorState:
    A: np.ndarray
    Ainv: np.ndarray
    b: np.ndarray
    beta_hat: np.ndarray
    leverages: np.ndarray
    chol: np.ndarray = field(repr=False)
    Vinv: np.ndarray = field(repr=False)

    def predict(self, x):
        return np.asarray(x, dtype=float) @ self.beta_hat

    def quad(self, x):
        """``x' A^-1 x`` for a vector or the rows of a matrix."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(x @ self.Ainv @ x)
        return np.einsum("ij,jk,ik->i", x, self.Ainv, x)


@dataclass(frozen=True)
class LooPredictive:
    m2: float
    s2_sq: float


@dataclass(frozen=True)
class SwapCoefficients:
    c: float
    d: float
    s1_sq: float
    delta_lev: float

    def mean(self, a):
        return self.c + self.d * a


def _resolve_sigma2(prior, sigma2):
    if sigma2 is not None:
        return float(sigma2)
    if prior is not None and prior.sigma2 is not None:
        return float(prior.sigma2)
    return 1.0


def fit_posterior(data: Dataset, prior: PriorSpec) -> PosteriorState:
    if prior.beta0.size != data.p:
        raise ValueError(f"prior has dimension {prior.beta0.size}, data has p={data.p}")
    Vinv = prior.Vinv
    A = data.X.T @ data.X + Vinv
    A = 0.5 * (A + A.T)
    try:
        L = linalg.cholesky(A, lower=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite("posterior precision A is singular") from exc
    Ainv = linalg.cho_solve((L, True), np.eye(data.p))
    Ainv = 0.5 * (Ainv + Ainv.T)
    b = data.X.T @ data.y + Vinv @ prior.beta0
    beta_hat = linalg.cho_solve((L, True), b)
    lev = np.einsum("ij,jk,ik->i", data.X, Ainv, data.X)
    bad = np.flatnonzero(lev >= 1.0 - LEVERAGE_GUARD)
    if bad.size:
        raise DegenerateLeverage(int(bad[0]), float(lev[bad[0]]))
    return PosteriorState(A, Ainv, b, beta_hat, lev, L, Vinv)


def loo_predictive(state: PosteriorState, data: Dataset, i: int, sigma2: float) -> LooPredictive:
    lev = state.leverages[i]
    if lev >= 1.0 - LEVERAGE_GUARD:
        raise DegenerateLeverage(i, float(lev))
    fit = data.X[i] @ state.beta_hat
    return LooPredictive((fit - lev * data.y[i]) / (1.0 - lev), sigma2 / (1.0 - lev))


def loo_all(state: PosteriorState, data: Dataset):
    """Vectorized LOO means and unit-scale variances ``1 / (1 - lev)``."""
    lev = state.leverages
    m2 = (data.X @ state.beta_hat - lev * data.y) / (1.0 - lev)
    return m2, 1.0 / (1.0 - lev)


def loo_predictive_naive(data: Dataset, prior: PriorSpec, i: int, sigma2: float) -> LooPredictive:
    """Refit without row ``i`` and predict ``y_i`` (oracle)."""
    Xs, ys = np.delete(data.X, i, axis=0), np.delete(data.y, i)
    A = Xs.T @ Xs + prior.Vinv
    beta = np.linalg.solve(A, Xs.T @ ys + prior.Vinv @ prior.beta0)
    xi = data.X[i]
    return LooPredictive(float(xi @ beta), sigma2 * (1.0 + float(xi @ np.linalg.solve(A, xi))))


def swap_coefficients_naive(
    data: Dataset, prior: PriorSpec, i: int, x_new, sigma2: float | None = None
) -> SwapCoefficients:
    """Invert the augmented precision ``A - x_i x_i' + x_new x_new'`` directly (oracle)."""
    sigma2 = _resolve_sigma2(prior, sigma2)
    x_new = np.asarray(x_new, dtype=float)
    Xs, ys = np.delete(data.X, i, axis=0), np.delete(data.y, i)
    Vinv = prior.Vinv
    Aplus = Xs.T @ Xs + Vinv + np.outer(x_new, x_new)
    try:
        Apinv = np.linalg.inv(Aplus)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"augmented precision for observation {i} is singular") from exc
    xi = data.X[i]
    g = Apinv @ xi
    c = float(g @ (Xs.T @ ys + Vinv @ prior.beta0))
    d = float(g @ x_new)
    delta = float(g @ xi)
    return SwapCoefficients(c, d, sigma2 * (1.0 + delta), delta)


def swap_coefficients_fast(
    state: PosteriorState, data: Dataset, prior: PriorSpec | None, i: int, x_new, sigma2: float | None = None
) -> SwapCoefficients:
    """Swap coefficients from ``A^-1`` via two sequential rank-one corrections."""
    sigma2 = _resolve_sigma2(prior, sigma2)
    x_new = np.asarray(x_new, dtype=float)
    xi = data.X[i]
    lev = state.leverages[i]
    if lev >= 1.0 - LEVERAGE_GUARD:
        raise DegenerateLeverage(i, float(lev))
    u = state.Ainv @ xi
    B = state.Ainv + np.outer(u, u) / (1.0 - lev)
    w = B @ x_new
    denom = 1.0 + x_new @ w
    if denom <= LEVERAGE_GUARD:
        raise DegenerateAugmentation(i, float(denom))
    Apinv = B - np.outer(w, w) / denom
    g = Apinv @ xi
    c = float(g @ (state.b - xi * data.y[i]))
    d = float(g @ x_new)
    delta = float(g @ xi)
    return SwapCoefficients(c, d, sigma2 * (1.0 + delta), delta)


def swap_terms(state: PosteriorState, data: Dataset, x_new):
    """All-``i`` swap coefficients in O(n p^2) without forming any p x p update.

    Returns arrays ``(c, d, delta_lev)``. Uses the same sequential rank-one
    identities as :func:`swap_coefficients_fast`, contracted to scalars.
    """
    x_new = np.asarray(x_new, dtype=float)
    X, y = data.X, data.y
    lev = state.leverages
    if np.any(lev >= 1.0 - LEVERAGE_GUARD):
        i = int(np.argmax(lev))
        raise DegenerateLeverage(i, float(lev[i]))
    one_m = 1.0 - lev
    g = state.Ainv @ x_new
    t = X @ g  # x_i' A^-1 x_new
    fit = X @ state.beta_hat  # x_i' A^-1 b
    gamma = x_new @ g + t**2 / one_m  # x_new' B_i x_new
    denom = 1.0 + gamma
    if np.any(denom <= LEVERAGE_GUARD):
        i = int(np.argmin(denom))
        raise DegenerateAugmentation(i, float(denom[i]))
    # w_i = B_i x_new;  (A_-i^+)^-1 x_i = (u_i - w_i t_i / denom_i) / (1 - lev_i)
    u_r = fit - lev * y  # u_i' (b - x_i y_i)
    w_x = t / one_m  # w_i' x_i
    w_r = (x_new @ state.beta_hat + t * fit / one_m) - w_x * y  # w_i' (b - x_i y_i)
    c = (u_r - t * w_r / denom) / one_m
    d = t / (denom * one_m)
    delta = (lev - t * w_x / denom) / one_m
    return c, d, delta


def map_predictive(state: PosteriorState, x_new, sigma2: float):
    """Plug-in posterior predictive mean and variance at ``x_new``."""
    x_new = np.asarray(x_new, dtype=float)
    return float(x_new @ state.beta_hat), sigma2 * (1.0 + state.quad(x_new))


def sigma2_posterior_params(state: PosteriorState, data: Dataset, prior: PriorSpec, a0: float, b0: float):
    """Shape and scale of the marginal inverse-gamma posterior of ``sigma2``."""
    if not (a0 > 0 and b0 > 0):
        raise ValueError("inverse-gamma hyperparameters must be positive")
    quad = data.y @ data.y + prior.beta0 @ state.Vinv @ prior.beta0 - state.b @ state.beta_hat
    return a0 + 0.5 * data.n, b0 + 0.5 * max(float(quad), 0.0)
