# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled two-phase dense simplex kernel.

Mirrors ``_simplex_py.simplex_solve`` exactly (same standard form, pivot
rules, tie-breaking, and iteration budgets); the extension is built with
floating-point contraction disabled so both kernels follow identical pivot
trajectories.
"""

import numpy as np

cimport cython
from libc.math cimport fabs, INFINITY

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
STALLED = 3

cdef double _COST_TOL = 1e-9
cdef double _PIVOT_TOL = 1e-11

cdef int _OPT = 0
cdef int _INF = 1
cdef int _UNB = 2
cdef int _STL = 3


cdef inline Py_ssize_t _entering(double[:, ::1] T, Py_ssize_t cost_row,
                                 Py_ssize_t hi, bint bland) noexcept:
    cdef Py_ssize_t j, best = -1
    cdef double v, best_val = -_COST_TOL
    for j in range(hi):
        v = T[cost_row, j]
        if v < best_val:
            if bland:
                return j
            best = j
            best_val = v
    return best


cdef inline Py_ssize_t _leaving(double[:, ::1] T, long long[::1] basis,
                                unsigned char[::1] alive, Py_ssize_t m,
                                Py_ssize_t col, Py_ssize_t rhs,
                                bint bland) noexcept:
    cdef Py_ssize_t i, best = -1
    cdef double a, ratio, best_ratio = INFINITY
    for i in range(m):
        if not alive[i]:
            continue
        a = T[i, col]
        if a <= _PIVOT_TOL:
            continue
        ratio = T[i, rhs] / a
        if ratio < best_ratio:
            best_ratio = ratio
            best = i
        elif bland and ratio == best_ratio and basis[i] < basis[best]:
            # Bland's leaving rule: smallest basis index among exact ties
            best = i
    return best


cdef inline void _pivot(double[:, ::1] T, long long[::1] basis,
                        Py_ssize_t nrows, Py_ssize_t ncols,
                        Py_ssize_t row, Py_ssize_t col) noexcept:
    cdef Py_ssize_t i, j
    cdef double piv = T[row, col]
    cdef double factor
    for j in range(ncols):
        T[row, j] /= piv
    for i in range(nrows):
        if i == row:
            continue
        factor = T[i, col]
        if factor != 0.0:
            for j in range(ncols):
                T[i, j] -= factor * T[row, j]
    for i in range(nrows):
        T[i, col] = 0.0
    T[row, col] = 1.0
    basis[row] = col


def simplex_solve(c, A, b, max_dantzig=0, max_total=0):
    """Solve max c@z s.t. A@z <= b (z free). Returns (status, z, iterations)."""
    A_arr = np.ascontiguousarray(A, dtype=np.float64)
    b_arr = np.ascontiguousarray(b, dtype=np.float64)
    c_arr = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t m = A_arr.shape[0]
    cdef Py_ssize_t n = A_arr.shape[1]
    cdef long long cap_dantzig = max_dantzig
    cdef long long cap_total = max_total
    if cap_dantzig <= 0:
        cap_dantzig = 200 + 25 * (m + n)
    if cap_total <= 0:
        cap_total = cap_dantzig + 400 + 50 * (m + n)

    if m == 0:
        if np.any(np.abs(c_arr) > _COST_TOL):
            return UNBOUNDED, None, 0
        return OPTIMAL, np.zeros(n), 0

    cdef double[::1] bv = b_arr
    cdef double[:, ::1] Av = A_arr
    cdef Py_ssize_t i, j, ai
    cdef Py_ssize_t art0 = 2 * n + m
    cdef Py_ssize_t k = 0
    for i in range(m):
        if bv[i] < 0.0:
            k += 1
    cdef Py_ssize_t ncols = art0 + k + 1
    cdef Py_ssize_t rhs = ncols - 1

    T_arr = np.zeros((m + 2, ncols))
    basis_arr = np.empty(m, dtype=np.int64)
    alive_arr = np.ones(m, dtype=np.uint8)
    cdef double[:, ::1] T = T_arr
    cdef long long[::1] basis = basis_arr
    cdef unsigned char[::1] alive = alive_arr

    cdef double sgn
    ai = 0
    for i in range(m):
        sgn = -1.0 if bv[i] < 0.0 else 1.0
        for j in range(n):
            T[i, j] = Av[i, j] * sgn
            T[i, n + j] = -T[i, j]
        T[i, 2 * n + i] = sgn
        T[i, rhs] = bv[i] * sgn
        if bv[i] < 0.0:
            T[i, art0 + ai] = 1.0
            basis[i] = art0 + ai
            ai += 1
        else:
            basis[i] = 2 * n + i

    cdef double[::1] cv = c_arr
    for j in range(n):
        T[m, j] = -cv[j]
        T[m, n + j] = cv[j]

    cdef long long iters = 0
    cdef Py_ssize_t col, row, piv
    cdef int st
    cdef bint bland
    cdef double best, bmax, p1_tol

    if k > 0:
        for i in range(m):
            if bv[i] < 0.0:
                for j in range(ncols):
                    T[m + 1, j] = T[m + 1, j] + T[i, j]
        for j in range(ncols):
            T[m + 1, j] = -T[m + 1, j]
        for j in range(art0, art0 + k):
            T[m + 1, j] = 0.0

        st = _OPT
        while True:
            if iters >= cap_total:
                return STALLED, None, iters
            bland = iters >= cap_dantzig
            col = _entering(T, m + 1, art0, bland)
            if col < 0:
                break
            row = _leaving(T, basis, alive, m, col, rhs, bland)
            if row < 0:
                return STALLED, None, iters  # phase 1 is bounded below
            _pivot(T, basis, m + 2, ncols, row, col)
            iters += 1

        bmax = 0.0
        for i in range(m):
            if fabs(bv[i]) > bmax:
                bmax = fabs(bv[i])
        p1_tol = 1e-9 * (1.0 + bmax)
        if -T[m + 1, rhs] > p1_tol:
            return INFEASIBLE, None, iters

        for i in range(m):
            if basis[i] >= art0:
                piv = -1
                best = 0.0
                for j in range(art0):
                    if fabs(T[i, j]) > best:
                        best = fabs(T[i, j])
                        piv = j
                if piv >= 0 and best > 1e-9:
                    _pivot(T, basis, m + 2, ncols, i, piv)
                    iters += 1
                else:
                    alive[i] = 0

    while True:
        if iters >= cap_total:
            return STALLED, None, iters
        bland = iters >= cap_dantzig
        col = _entering(T, m, art0, bland)
        if col < 0:
            break
        row = _leaving(T, basis, alive, m, col, rhs, bland)
        if row < 0:
            return UNBOUNDED, None, iters
        _pivot(T, basis, m + 2, ncols, row, col)
        iters += 1

    z_arr = np.zeros(n)
    cdef double[::1] z = z_arr
    cdef long long bj
    for i in range(m):
        if not alive[i]:
            continue
        bj = basis[i]
        if bj < n:
            z[bj] += T[i, rhs]
        elif bj < 2 * n:
            z[bj - n] -= T[i, rhs]
    return OPTIMAL, z_arr, iters
