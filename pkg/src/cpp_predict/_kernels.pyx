# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport expm1, log, sqrt, fabs, pow, M_PI

cnp.import_array()

cdef double INVPHI = (sqrt(5.0) - 1.0) / 2.0
cdef int MAX_GOLDEN_ITER = 200
cdef double TIE_RTOL = 1e-12


cdef void _constants(const double[::1] u1, const double[::1] u2, double sigma2, int kind, double alpha,
                     double[::1] coef, double[::1] rate, double* const_sum) noexcept nogil:
    cdef Py_ssize_t i, n = u1.shape[0]
    cdef double s1, s2, S, root, P, Q, K, total = 0.0
    for i in range(n):
        s1 = sigma2 * u1[i]
        s2 = sigma2 * u2[i]
        S = s1 + s2
        if kind == 0:
            total += -0.5 * log(2.0 * sqrt(s1 * s2) / S)
            coef[i] = 0.0
            rate[i] = 1.0 / (4.0 * S)
        elif kind == 1:
            coef[i] = sqrt(2.0 * sqrt(s1 * s2) / S)
            rate[i] = 1.0 / (4.0 * S)
            total += 1.0 - coef[i]
        else:
            root = 1.0 / sqrt(1.0 + alpha)
            P = pow(2.0 * M_PI * s2, -alpha / 2.0) * root
            Q = pow(2.0 * M_PI * s1, -alpha / 2.0) * root / alpha
            K = (1.0 + 1.0 / alpha) * pow(2.0 * M_PI * s2, -alpha / 2.0) * sqrt(s2 / (s2 + alpha * s1))
            total += P + Q - K
            coef[i] = K
            rate[i] = alpha / (2.0 * (s2 + alpha * s1))
    const_sum[0] = total


cdef inline double _eval(double a, const double[::1] r, const double[::1] d, const double[::1] coef,
                         const double[::1] rate, double const_sum, int kind) noexcept nogil:
    # variable part of J only; J = const_sum + _eval(...)
    cdef Py_ssize_t i, n = r.shape[0]
    cdef double delta, acc = 0.0
    if kind == 0:
        for i in range(n):
            delta = r[i] - d[i] * a
            acc += rate[i] * delta * delta
        return acc
    for i in range(n):
        delta = r[i] - d[i] * a
        acc -= coef[i] * expm1(-rate[i] * delta * delta)
    return acc


cdef void _grid_refine(double center, double half_width, int grid_len, double tol,
                       const double[::1] r, const double[::1] d, const double[::1] coef,
                       const double[::1] rate, double const_sum, int kind,
                       double[::1] grid, double[::1] vals,
                       double* a_out, double* f_out, int* boundary_out) noexcept nogil:
    cdef int attempt, k, j, it
    cdef double hw = half_width, vmin, thr, best_dist, dist
    cdef double lo, hi, x1, x2, f1, f2, a, fa
    k = 0
    for attempt in range(2):
        vmin = 1e308
        for j in range(grid_len):
            grid[j] = center + hw * (-1.0 + 2.0 * j / (grid_len - 1))
            vals[j] = _eval(grid[j], r, d, coef, rate, const_sum, kind)
            if vals[j] < vmin:
                vmin = vals[j]
        thr = vmin + TIE_RTOL * (fabs(vmin) if fabs(vmin) > 1.0 else 1.0)
        best_dist = 1e308
        for j in range(grid_len):
            if vals[j] <= thr:
                dist = fabs(grid[j] - center)
                if dist < best_dist:
                    best_dist = dist
                    k = j
        if 0 < k < grid_len - 1:
            break
        if attempt == 0:
            hw *= 2.0
    boundary_out[0] = 1 if (k == 0 or k == grid_len - 1) else 0
    lo = grid[k - 1] if k > 0 else grid[0]
    hi = grid[k + 1] if k < grid_len - 1 else grid[grid_len - 1]
    x1 = hi - INVPHI * (hi - lo)
    x2 = lo + INVPHI * (hi - lo)
    f1 = _eval(x1, r, d, coef, rate, const_sum, kind)
    f2 = _eval(x2, r, d, coef, rate, const_sum, kind)
    it = 0
    while hi - lo > tol and it < MAX_GOLDEN_ITER:
        if f1 <= f2:
            hi = x2
            x2 = x1
            f2 = f1
            x1 = hi - INVPHI * (hi - lo)
            f1 = _eval(x1, r, d, coef, rate, const_sum, kind)
        else:
            lo = x1
            x1 = x2
            f1 = f2
            x2 = lo + INVPHI * (hi - lo)
            f2 = _eval(x2, r, d, coef, rate, const_sum, kind)
        it += 1
    a = 0.5 * (lo + hi)
    fa = _eval(a, r, d, coef, rate, const_sum, kind)
    if vals[k] <= fa:
        a = grid[k]
        fa = vals[k]
    a_out[0] = a
    f_out[0] = const_sum + fa


def solve_scaled(m2, c, d, u1, u2, sigma2s, double center, double half_width, int grid_len,
                 double tol, int kind, double alpha):
    cdef const double[::1] m2v = np.ascontiguousarray(m2, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef const double[::1] u1v = np.ascontiguousarray(u1, dtype=np.float64)
    cdef const double[::1] u2v = np.ascontiguousarray(u2, dtype=np.float64)
    cdef const double[::1] s2v = np.ascontiguousarray(sigma2s, dtype=np.float64)
    cdef Py_ssize_t n = m2v.shape[0], T = s2v.shape[0], t, i
    cdef double[::1] r = np.empty(n)
    cdef double[::1] coef = np.empty(n)
    cdef double[::1] rate = np.empty(n)
    cdef double[::1] grid = np.empty(grid_len)
    cdef double[::1] vals = np.empty(grid_len)
    a_np = np.empty(T)
    j_np = np.empty(T)
    b_np = np.zeros(T, dtype=np.uint8)
    cdef double[::1] a_star = a_np
    cdef double[::1] j_star = j_np
    cdef unsigned char[::1] bnd = b_np
    cdef double const_sum, a, fa
    cdef int flag
    if grid_len < 3:
        raise ValueError("grid_len must be >= 3")
    with nogil:
        for i in range(n):
            r[i] = m2v[i] - cv[i]
        for t in range(T):
            _constants(u1v, u2v, s2v[t], kind, alpha, coef, rate, &const_sum)
            _grid_refine(center, half_width, grid_len, tol, r, dv, coef, rate, const_sum, kind,
                         grid, vals, &a, &fa, &flag)
            a_star[t] = a
            j_star[t] = fa
            bnd[t] = flag
    return a_np, j_np, b_np


def objective_scaled_mean(m2, c, d, u1, u2, sigma2s, a_vals, int kind, double alpha):
    cdef const double[::1] m2v = np.ascontiguousarray(m2, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef const double[::1] u1v = np.ascontiguousarray(u1, dtype=np.float64)
    cdef const double[::1] u2v = np.ascontiguousarray(u2, dtype=np.float64)
    cdef const double[::1] s2v = np.ascontiguousarray(sigma2s, dtype=np.float64)
    cdef const double[::1] av = np.ascontiguousarray(np.atleast_1d(a_vals), dtype=np.float64)
    cdef Py_ssize_t n = m2v.shape[0], T = s2v.shape[0], A = av.shape[0], t, i, k
    cdef double[::1] r = np.empty(n)
    cdef double[::1] coef = np.empty(n)
    cdef double[::1] rate = np.empty(n)
    out_np = np.zeros(A)
    cdef double[::1] out = out_np
    cdef double const_sum, const_total = 0.0
    with nogil:
        for i in range(n):
            r[i] = m2v[i] - cv[i]
        for t in range(T):
            _constants(u1v, u2v, s2v[t], kind, alpha, coef, rate, &const_sum)
            const_total += const_sum
            for k in range(A):
                out[k] += _eval(av[k], r, dv, coef, rate, const_sum, kind)
        for k in range(A):
            out[k] /= T
    return const_total / T, out_np
