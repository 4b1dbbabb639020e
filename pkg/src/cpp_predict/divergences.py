"""Closed-form divergences between univariate Gaussian laws.

Every per-term divergence used by the CPP objective depends on the two laws
only through the mean gap ``delta = mean_p - mean_q`` and the two variances.
The ``*_gap`` functions below are written in that form and broadcast over
numpy arrays; the law-level functions are thin wrappers.

Conventions
-----------
``p`` is the leave-one-out law N(m2, s2_sq) and ``q`` the swapped law
N(m1, s1_sq). For the density power divergence ``p`` plays the role of the
model density and ``q`` the role of the data density::

    dpd(p, q) = int p^(1+a) - (1 + 1/a) int q p^a + (1/a) int q^(1+a)

which is the convention under which the decay rate of the score is
``kappa = a / (2 (s2_sq + a s1_sq))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOGBC = "logbc"
HELLINGER = "hellinger"
DPD = "dpd"
KIND_CODES = {LOGBC: 0, HELLINGER: 1, DPD: 2}


@dataclass(frozen=True)
class GaussianLaw:
    mean: float
    var: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.var)):
            raise ValueError(f"non-finite Gaussian law {self!r}")
        if self.var <= 0:
            raise ValueError(f"variance must be positive, got {self.var!r}")

    @property
    def sd(self):
        return math.sqrt(self.var)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return -0.5 * (np.log(2 * np.pi * self.var) + (x - self.mean) ** 2 / self.var)


@dataclass(frozen=True)
class DivergenceKind:
    kind: str
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise ValueError(f"unknown divergence {self.kind!r}; expected one of {sorted(KIND_CODES)}")
        if self.kind == DPD:
            if self.alpha is None or not self.alpha > 0:
                raise ValueError("DPD requires alpha > 0")
        elif self.alpha is not None:
            object.__setattr__(self, "alpha", None)

    @classmethod
    def parse(cls, name, alpha=None):
        name = name.lower()
        if name in ("bc", "log-bc", "logbc", "bhattacharyya"):
            return cls(LOGBC)
        if name in ("h", "hellinger"):
            return cls(HELLINGER)
        if name == DPD:
            return cls(DPD, 1.0 if alpha is None else float(alpha))
        raise ValueError(f"unknown divergence {name!r}")

    @property
    def code(self):
        return KIND_CODES[self.kind]

    @property
    def alpha_value(self):
        return 0.0 if self.alpha is None else float(self.alpha)

    def __str__(self):
        return f"dpd(alpha={self.alpha:g})" if self.kind == DPD else self.kind


# ---------------------------------------------------------------------------
# gap-parametrized forms (s1_sq: swapped variance, s2_sq: leave-one-out variance)


def log_bc_gap(delta, s1_sq, s2_sq):
    """log of the Bhattacharyya coefficient; never underflows."""
    delta = np.asarray(delta, dtype=float)
    S = s1_sq + s2_sq
    return 0.5 * np.log(2.0 * np.sqrt(s1_sq * s2_sq) / S) - delta**2 / (4.0 * S)


def hellinger_gap(delta, s1_sq, s2_sq):
    return -np.expm1(log_bc_gap(delta, s1_sq, s2_sq))


def _dpd_constants(s1_sq, s2_sq, alpha):
    # D(delta) = P - K exp(-kappa delta^2) + Q
    s1_sq = np.asarray(s1_sq, dtype=float)
    s2_sq = np.asarray(s2_sq, dtype=float)
    root = 1.0 / math.sqrt(1.0 + alpha)
    P = (2 * np.pi * s2_sq) ** (-alpha / 2) * root
    Q = (2 * np.pi * s1_sq) ** (-alpha / 2) * root / alpha
    K = (1.0 + 1.0 / alpha) * (2 * np.pi * s2_sq) ** (-alpha / 2) * np.sqrt(s2_sq / (s2_sq + alpha * s1_sq))
    kappa = alpha / (2.0 * (s2_sq + alpha * s1_sq))
    return P, Q, K, kappa


def dpd_gap(delta, s1_sq, s2_sq, alpha):
    delta = np.asarray(delta, dtype=float)
    P, Q, K, kappa = _dpd_constants(s1_sq, s2_sq, alpha)
    return (P + Q - K) - K * np.expm1(-kappa * delta**2)


def dpd_kappa(s1_sq, s2_sq, alpha):
    return alpha / (2.0 * (s2_sq + alpha * s1_sq))


def divergence_gap(kind: DivergenceKind, delta, s1_sq, s2_sq):
    """Per-term divergence D(p, q) as a function of the mean gap."""
    if kind.kind == LOGBC:
        return -log_bc_gap(delta, s1_sq, s2_sq)
    if kind.kind == HELLINGER:
        return hellinger_gap(delta, s1_sq, s2_sq)
    return dpd_gap(delta, s1_sq, s2_sq, kind.alpha)


# ---------------------------------------------------------------------------
# law-level API


def bhattacharyya_coefficient(p: GaussianLaw, q: GaussianLaw) -> float:
    return float(np.exp(log_bc_gap(p.mean - q.mean, q.var, p.var)))


def hellinger_sq(p: GaussianLaw, q: GaussianLaw) -> float:
    """Squared Hellinger distance ``1 - BC(p, q)``."""
    return float(hellinger_gap(p.mean - q.mean, q.var, p.var))


def dpd(p: GaussianLaw, q: GaussianLaw, alpha: float) -> float:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return float(dpd_gap(p.mean - q.mean, q.var, p.var, alpha))


def kl(p: GaussianLaw, q: GaussianLaw) -> float:
    """KL(p || q)."""
    return 0.5 * (math.log(q.var / p.var) + (p.var + (p.mean - q.mean) ** 2) / q.var - 1.0)


# ---------------------------------------------------------------------------
# scores g(delta) = dD/d(delta); the score in the candidate is -d_i g(delta_i)


def score_logbc(delta, s1_sq, s2_sq):
    return np.asarray(delta, dtype=float) / (2.0 * (s1_sq + s2_sq))


def score_hellinger(delta, s1_sq, s2_sq):
    delta = np.asarray(delta, dtype=float)
    S = s1_sq + s2_sq
    C = np.sqrt(2.0 * np.sqrt(s1_sq * s2_sq) / S)
    return C * delta / (2.0 * S) * np.exp(-delta**2 / (4.0 * S))


def score_dpd(delta, s1_sq, s2_sq, alpha):
    delta = np.asarray(delta, dtype=float)
    _, _, K, kappa = _dpd_constants(s1_sq, s2_sq, alpha)
    return 2.0 * K * kappa * delta * np.exp(-kappa * delta**2)


def score_gap(kind: DivergenceKind, delta, s1_sq, s2_sq):
    if kind.kind == LOGBC:
        return score_logbc(delta, s1_sq, s2_sq)
    if kind.kind == HELLINGER:
        return score_hellinger(delta, s1_sq, s2_sq)
    return score_dpd(delta, s1_sq, s2_sq, kind.alpha)


def second_derivative_gap(kind: DivergenceKind, delta, s1_sq, s2_sq):
    """d^2 D / d(delta)^2 in closed form."""
    delta = np.asarray(delta, dtype=float)
    if kind.kind == LOGBC:
        return np.broadcast_to(1.0 / (2.0 * (s1_sq + s2_sq)), delta.shape).astype(float)
    if kind.kind == HELLINGER:
        S = s1_sq + s2_sq
        C = np.sqrt(2.0 * np.sqrt(s1_sq * s2_sq) / S)
        return C * np.exp(-delta**2 / (4.0 * S)) * (1.0 / (2.0 * S) - delta**2 / (4.0 * S**2))
    _, _, K, kappa = _dpd_constants(s1_sq, s2_sq, kind.alpha)
    return 2.0 * K * kappa * np.exp(-kappa * delta**2) * (1.0 - 2.0 * kappa * delta**2)


def convexity_radius(kind: DivergenceKind, s1_sq, s2_sq):
    """Half-width of the interval of gaps on which the per-term divergence is convex.

    Returns ``inf`` for log-BC, which is a convex quadratic in the gap.
    """
    if kind.kind == LOGBC:
        return np.broadcast_to(np.inf, np.shape(s1_sq + s2_sq)).astype(float)[()]
    if kind.kind == HELLINGER:
        return np.sqrt(2.0 * (s1_sq + s2_sq))
    return 1.0 / np.sqrt(2.0 * dpd_kappa(s1_sq, s2_sq, kind.alpha))


def score_bound(kind: DivergenceKind, s1_sq, s2_sq):
    """sup over delta of |g(delta)|, attained at the convexity radius.

    Returns ``inf`` for log-BC, whose score is linear in the gap.
    """
    if kind.kind == LOGBC:
        return np.broadcast_to(np.inf, np.shape(s1_sq + s2_sq)).astype(float)[()]
    r = convexity_radius(kind, s1_sq, s2_sq)
    return np.abs(score_gap(kind, r, s1_sq, s2_sq))
