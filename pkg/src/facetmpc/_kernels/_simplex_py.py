"""Pure-NumPy two-phase dense simplex kernel.

Fallback for the compiled Cython kernel in ``_simplex.pyx``; both expose the
same ``simplex_solve`` contract, pivot rules, and tie-breaking, so they follow
identical pivot trajectories.  Problems are maximized over free variables:

    max c @ z   s.t.   A @ z <= b

Free variables are split into positive parts, slacks are appended, and rows
with negative right-hand sides receive phase-1 artificials.  Pivoting uses
Dantzig's rule and switches to Bland's rule once ``max_dantzig`` pivots have
been spent (anti-cycling).
"""

from __future__ import annotations

import numpy as np

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
STALLED = 3

# reduced-cost admission / minimum usable pivot magnitude; callers are
# expected to pass row-normalized A and O(1)-scaled objectives
_COST_TOL = 1e-9
_PIVOT_TOL = 1e-11


def _entering(cost_row, hi, bland):
    seg = cost_row[:hi]
    if bland:
        idx = np.nonzero(seg < -_COST_TOL)[0]
        return int(idx[0]) if idx.size else -1
    j = int(np.argmin(seg))
    return j if seg[j] < -_COST_TOL else -1


def _leaving(T, basis, alive, m, col, bland):
    colv = T[:m, col]
    mask = alive & (colv > _PIVOT_TOL)
    if not mask.any():
        return -1
    ratios = np.full(m, np.inf)
    ratios[mask] = T[:m, -1][mask] / colv[mask]
    rmin = ratios.min()
    if bland:
        # Bland's leaving rule: smallest basis index among exact ties
        ties = np.nonzero(ratios == rmin)[0]
        return int(ties[np.argmin(basis[ties])])
    return int(np.argmin(ratios))


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, T[row])
    T[:, col] = 0.0
    T[row, col] = 1.0
    basis[row] = col


def simplex_solve(c, A, b, max_dantzig=0, max_total=0):
    """Solve max c@z s.t. A@z <= b (z free). Returns (status, z, iterations)."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    m, n = A.shape
    if max_dantzig <= 0:
        max_dantzig = 200 + 25 * (m + n)
    if max_total <= 0:
        max_total = max_dantzig + 400 + 50 * (m + n)

    if m == 0:
        if np.any(np.abs(c) > _COST_TOL):
            return UNBOUNDED, None, 0
        return OPTIMAL, np.zeros(n), 0

    neg = b < 0.0
    k = int(neg.sum())
    art0 = 2 * n + m
    ncols = art0 + k + 1
    T = np.zeros((m + 2, ncols))
    basis = np.empty(m, dtype=np.int64)
    alive = np.ones(m, dtype=bool)

    sgn = np.where(neg, -1.0, 1.0)
    T[:m, :n] = A * sgn[:, None]
    T[:m, n:2 * n] = -T[:m, :n]
    T[np.arange(m), 2 * n + np.arange(m)] = sgn
    T[:m, -1] = b * sgn

    ai = 0
    for i in range(m):
        if neg[i]:
            T[i, art0 + ai] = 1.0
            basis[i] = art0 + ai
            ai += 1
        else:
            basis[i] = 2 * n + i

    # phase-2 objective: minimize -c@z
    T[m, :n] = -c
    T[m, n:2 * n] = c

    iters = 0

    def run(cost_row):
        nonlocal iters
        while True:
            if iters >= max_total:
                return STALLED
            bland = iters >= max_dantzig
            col = _entering(T[cost_row], art0, bland)
            if col < 0:
                return OPTIMAL
            row = _leaving(T, basis, alive, m, col, bland)
            if row < 0:
                return UNBOUNDED
            _pivot(T, basis, row, col)
            iters += 1

    if k > 0:
        # canonical phase-1 objective: negated sum of artificial rows
        # (sequential accumulation, mirrored by the compiled kernel)
        acc = np.zeros(ncols)
        for i in range(m):
            if neg[i]:
                acc += T[i]
        T[m + 1] = -acc
        T[m + 1, art0:art0 + k] = 0.0
        st = run(m + 1)
        if st != OPTIMAL:
            return STALLED, None, iters  # phase 1 is bounded below
        p1_tol = 1e-9 * (1.0 + float(np.abs(b).max()))
        if -T[m + 1, -1] > p1_tol:
            return INFEASIBLE, None, iters
        # drive leftover artificials out of the basis, or drop redundant rows
        for i in range(m):
            if basis[i] >= art0:
                seg = np.abs(T[i, :art0])
                piv = int(np.argmax(seg))
                if seg[piv] > 1e-9:
                    _pivot(T, basis, i, piv)
                    iters += 1
                else:
                    alive[i] = False

    st = run(m)
    if st != OPTIMAL:
        return st, None, iters

    z = np.zeros(n)
    for i in range(m):
        if not alive[i]:
            continue
        bj = basis[i]
        if bj < n:
            z[bj] += T[i, -1]
        elif bj < 2 * n:
            z[bj - n] -= T[i, -1]
    return OPTIMAL, z, iters
