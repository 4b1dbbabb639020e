"""Gaussian-process regression backend.

Supplies the same leave-one-out and swap contracts as the conjugate backend.
Swap coefficients come from an affine probe: the swapped predictive mean is
linear in the candidate response, so two evaluations give ``(c, d)`` and a
third checks collinearity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .conjugate import LooPredictive, SwapCoefficients
from .divergences import GaussianLaw
from .errors import DegenerateLoo, NotPositiveDefinite

log = logging.getLogger(__name__)

JITTER = 1e-10
COLLINEARITY_TOL = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "squared-exponential"
    lengthscale: float = 1.0
    signal_var: float = 1.0
    mean_const: float = 0.0

    def __post_init__(self):
        if self.kind not in ("squared-exponential", "linear"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if not self.signal_var > 0:
            raise ValueError("signal_var must be positive")
        if self.kind == "squared-exponential" and not self.lengthscale > 0:
            raise ValueError("lengthscale must be positive")

    def __call__(self, X1, X2):
        X1 = np.atleast_2d(np.asarray(X1, dtype=float))
        X2 = np.atleast_2d(np.asarray(X2, dtype=float))
        if self.kind == "linear":
            return self.signal_var * (X1 @ X2.T)
        sq = (
            np.sum(X1**2, axis=1)[:, None]
            + np.sum(X2**2, axis=1)[None, :]
            - 2.0 * X1 @ X2.T
        )
        return self.signal_var * np.exp(-0.5 * np.maximum(sq, 0.0) / self.lengthscale**2)

    def diag(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "linear":
            return self.signal_var * np.sum(X**2, axis=1)
        return np.full(X.shape[0], self.signal_var)


@dataclass(frozen=True)
class GpModel:
    X: np.ndarray
    y: np.ndarray
    Sigma_n: np.ndarray
    Sigma_n_inv: np.ndarray
    kernel: KernelSpec
    sigma2: float
    alpha_vec: np.ndarray = field(repr=False)  # Sigma_n^-1 (y - m)

    @property
    def n(self):
        return self.X.shape[0]


def _covariance(kernel, X, sigma2):
    S = kernel(X, X)
    S[np.diag_indices_from(S)] += sigma2 + JITTER * kernel.signal_var
    return 0.5 * (S + S.T)


def fit_gp(X, y, kernel: KernelSpec, sigma2: float) -> GpModel:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ValueError("X and y disagree in length")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    S = _covariance(kernel, X, sigma2)
    try:
        cf = linalg.cho_factor(S, lower=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite("K_n + sigma2 I is not positive definite") from exc
    Sinv = linalg.cho_solve(cf, np.eye(y.size))
    Sinv = 0.5 * (Sinv + Sinv.T)
    alpha_vec = linalg.cho_solve(cf, y - kernel.mean_const)
    return GpModel(X, y, S, Sinv, kernel, float(sigma2), alpha_vec)


def _clamp(v, what):
    if v < 0:
        if v < -1e-10:
            log.warning("clamped %s variance %.3e to 0", what, v)
        else:
            log.debug("clamped %s variance %.3e to 0", what, v)
        return 0.0
    return v


def gp_predictive(model: GpModel, x_star) -> GaussianLaw:
    x_star = np.atleast_2d(np.asarray(x_star, dtype=float))
    k = model.kernel(model.X, x_star)[:, 0]
    mean = model.kernel.mean_const + k @ model.alpha_vec
    v = float(model.kernel.diag(x_star)[0] - k @ model.Sigma_n_inv @ k)
    return GaussianLaw(float(mean), _clamp(v, "latent") + model.sigma2)


def gp_loo_predictive(model: GpModel, i: int) -> LooPredictive:
    sii = model.Sigma_n_inv[i, i]
    if sii <= 1e-14:
        raise DegenerateLoo(i, float(sii))
    return LooPredictive(float(model.y[i] - model.alpha_vec[i] / sii), float(1.0 / sii))


def gp_loo_all(model: GpModel):
    diag = np.diag(model.Sigma_n_inv)
    if np.any(diag <= 1e-14):
        i = int(np.argmin(diag))
        raise DegenerateLoo(i, float(diag[i]))
    return model.y - model.alpha_vec / diag, 1.0 / diag


def gp_loo_predictive_naive(model: GpModel, i: int) -> LooPredictive:
    keep = np.arange(model.n) != i
    sub = fit_gp(model.X[keep], model.y[keep], model.kernel, model.sigma2)
    law = gp_predictive(sub, model.X[i])
    return LooPredictive(law.mean, law.var)


def _augmented_inverse(model: GpModel, i: int, x_new):
    """Inverse covariance of (data without i) + x_new, by deletion then bordering."""
    keep = np.arange(model.n) != i
    Si = model.Sigma_n_inv
    col = Si[keep, i]
    Sminus = Si[np.ix_(keep, keep)] - np.outer(col, col) / Si[i, i]
    Xk = model.X[keep]
    k_new = model.kernel(Xk, x_new[None, :])[:, 0]
    kappa = model.kernel.diag(x_new[None, :])[0] + model.sigma2 + JITTER * model.kernel.signal_var
    h = Sminus @ k_new
    schur = kappa - k_new @ h
    if not schur > 1e-14 * kappa:
        raise NotPositiveDefinite(f"augmented covariance for observation {i} is not positive definite")
    m = Sminus.shape[0]
    out = np.empty((m + 1, m + 1))
    out[:m, :m] = Sminus + np.outer(h, h) / schur
    out[:m, m] = out[m, :m] = -h / schur
    out[m, m] = 1.0 / schur
    Xaug = np.vstack([Xk, x_new[None, :]])
    return out, Xaug, keep


def gp_swap_coefficients(model: GpModel, i: int, x_new) -> SwapCoefficients:
    x_new = np.asarray(x_new, dtype=float).ravel()
    Sinv_aug, Xaug, keep = _augmented_inverse(model, i, x_new)
    xi = model.X[i][None, :]
    k_i = model.kernel(Xaug, xi)[:, 0]
    weights = Sinv_aug @ k_i
    m0 = model.kernel.mean_const
    resid = np.append(model.y[keep] - m0, 0.0)

    def mean_at(a):
        r = resid.copy()
        r[-1] = a - m0
        return m0 + weights @ r

    c = mean_at(0.0)
    d = mean_at(1.0) - c
    off = mean_at(-1.0) - (c - d)
    if abs(off) > COLLINEARITY_TOL * max(1.0, abs(c), abs(d)):
        raise ArithmeticError(f"swapped GP mean not affine at observation {i} (residual {off:.3e})")
    v = _clamp(float(model.kernel.diag(xi)[0] - k_i @ weights), "swapped latent")
    s1_sq = v + model.sigma2
    return SwapCoefficients(float(c), float(d), s1_sq, s1_sq / model.sigma2 - 1.0)


def gp_swapped_mean_naive(model: GpModel, i: int, x_new, a: float) -> float:
    """Refit on the swapped data set and predict at ``x_i`` (oracle)."""
    keep = np.arange(model.n) != i
    X = np.vstack([model.X[keep], np.atleast_2d(x_new)])
    y = np.append(model.y[keep], a)
    return gp_predictive(fit_gp(X, y, model.kernel, model.sigma2), model.X[i]).mean


def gp_terms(model: GpModel, x_new):
    """Arrays ``(m2, s2_sq, c, d, s1_sq)`` over all observations."""
    m2, s2_sq = gp_loo_all(model)
    swaps = [gp_swap_coefficients(model, i, x_new) for i in range(model.n)]
    c = np.array([s.c for s in swaps])
    d = np.array([s.d for s in swaps])
    s1_sq = np.array([s.s1_sq for s in swaps])
    return m2, s2_sq, c, d, s1_sq
