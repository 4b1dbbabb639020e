"""Pure-numpy kernels; reference semantics for the compiled ``_kernels`` module.

Per-term divergences are carried as ``(const, coef, rate)`` triples::

    log-BC:            D(delta) = const + rate * delta^2
    Hellinger / DPD:   D(delta) = const + coef * (1 - exp(-rate * delta^2))

with the variances of a conjugate problem at noise level ``sigma2`` equal to
``sigma2 * u1`` (swapped) and ``sigma2 * u2`` (leave-one-out). Searches only
compare the ``delta``-dependent part, which keeps full relative precision near
the minimum; the summed constant is added back at the end.
"""

from __future__ import annotations

import math

import numpy as np

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
MAX_GOLDEN_ITER = 200
TIE_RTOL = 1e-12


def term_constants(s1_sq, s2_sq, kind, alpha):
    s1_sq = np.asarray(s1_sq, dtype=float)
    s2_sq = np.asarray(s2_sq, dtype=float)
    S = s1_sq + s2_sq
    if kind == 0:
        const = -0.5 * np.log(2.0 * np.sqrt(s1_sq * s2_sq) / S)
        return const, np.zeros_like(S), 1.0 / (4.0 * S)
    if kind == 1:
        coef = np.sqrt(2.0 * np.sqrt(s1_sq * s2_sq) / S)
        return 1.0 - coef, coef, 1.0 / (4.0 * S)
    root = 1.0 / math.sqrt(1.0 + alpha)
    P = (2 * np.pi * s2_sq) ** (-alpha / 2) * root
    Q = (2 * np.pi * s1_sq) ** (-alpha / 2) * root / alpha
    K = (1.0 + 1.0 / alpha) * (2 * np.pi * s2_sq) ** (-alpha / 2) * np.sqrt(s2_sq / (s2_sq + alpha * s1_sq))
    return P + Q - K, K, alpha / (2.0 * (s2_sq + alpha * s1_sq))


def variable_part(a_vals, r, d, coef, rate, kind):
    """The ``delta``-dependent part of J at each candidate; ``r = m2 - c``."""
    a_vals = np.atleast_1d(np.asarray(a_vals, dtype=float))
    delta = r[None, :] - d[None, :] * a_vals[:, None]
    if kind == 0:
        return (rate[None, :] * delta**2).sum(axis=1)
    return -(coef[None, :] * np.expm1(-rate[None, :] * delta**2)).sum(axis=1)


def objective(a_vals, m2, c, d, const, coef, rate, kind):
    """J(a) for each entry of ``a_vals``."""
    return const.sum() + variable_part(a_vals, m2 - c, d, coef, rate, kind)


def _best_index(grid, vals, center):
    vmin = vals.min()
    ties = np.flatnonzero(vals <= vmin + TIE_RTOL * max(1.0, abs(vmin)))
    return int(ties[np.argmin(np.abs(grid[ties] - center))])


def grid_refine(fun, center, half_width, grid_len, tol):
    """Grid search on ``center +- half_width`` then golden section in the best cell.

    ``fun`` maps an array of candidates to objective values. A minimum on the
    grid edge doubles the window once; if it is still on the edge the result
    is flagged as a boundary minimum. Returns ``(a, fun(a), boundary, converged)``.
    """
    hw = float(half_width)
    for attempt in range(2):
        grid = center + hw * (-1.0 + 2.0 * np.arange(grid_len) / (grid_len - 1))
        vals = np.asarray(fun(grid), dtype=float)
        k = _best_index(grid, vals, center)
        if 0 < k < grid_len - 1:
            break
        if attempt == 0:
            hw *= 2.0
    boundary = k == 0 or k == grid_len - 1
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid_len - 1)]
    x1 = hi - INVPHI * (hi - lo)
    x2 = lo + INVPHI * (hi - lo)
    f1 = float(fun(np.array([x1]))[0])
    f2 = float(fun(np.array([x2]))[0])
    it = 0
    while hi - lo > tol and it < MAX_GOLDEN_ITER:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INVPHI * (hi - lo)
            f1 = float(fun(np.array([x1]))[0])
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INVPHI * (hi - lo)
            f2 = float(fun(np.array([x2]))[0])
        it += 1
    a = 0.5 * (lo + hi)
    fa = float(fun(np.array([a]))[0])
    if vals[k] <= fa:
        a, fa = float(grid[k]), float(vals[k])
    return float(a), fa, bool(boundary), bool(hi - lo <= tol)


def solve_scaled(m2, c, d, u1, u2, sigma2s, center, half_width, grid_len, tol, kind, alpha):
    """Solve one CPP problem per noise draw; returns ``(a_star, j_star, boundary)``."""
    if grid_len < 3:
        raise ValueError("grid_len must be >= 3")
    m2, c, d, u1, u2 = (np.ascontiguousarray(v, dtype=float) for v in (m2, c, d, u1, u2))
    sigma2s = np.ascontiguousarray(sigma2s, dtype=float)
    r = m2 - c
    T = sigma2s.size
    a_star = np.empty(T)
    j_star = np.empty(T)
    boundary = np.zeros(T, dtype=np.uint8)
    for t in range(T):
        const, coef, rate = term_constants(sigma2s[t] * u1, sigma2s[t] * u2, kind, alpha)
        fun = lambda a: variable_part(a, r, d, coef, rate, kind)  # noqa: E731
        a, fa, bnd, _ = grid_refine(fun, center, half_width, grid_len, tol)
        a_star[t], j_star[t], boundary[t] = a, const.sum() + fa, bnd
    return a_star, j_star, boundary


def objective_scaled_mean(m2, c, d, u1, u2, sigma2s, a_vals, kind, alpha):
    """Draw-averaged objective split as ``(mean constant, mean variable part per a)``."""
    a_vals = np.atleast_1d(np.asarray(a_vals, dtype=float))
    m2, c, d, u1, u2 = (np.asarray(v, dtype=float) for v in (m2, c, d, u1, u2))
    r = m2 - c
    out = np.zeros(a_vals.size)
    const_total = 0.0
    sigma2s = np.asarray(sigma2s, dtype=float)
    for s2 in sigma2s:
        const, coef, rate = term_constants(s2 * u1, s2 * u2, kind, alpha)
        const_total += const.sum()
        out += variable_part(a_vals, r, d, coef, rate, kind)
    return const_total / sigma2s.size, out / sigma2s.size
