"""Dense linear algebra, LP, and active-set QP underneath the toolkit.

All operations are pure functions over NumPy arrays.  LP solving goes through
the simplex kernel selected in :mod:`facetmpc._kernels` (compiled extension or
NumPy fallback).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import errors
from ._kernels import INFEASIBLE, OPTIMAL, STALLED, UNBOUNDED, simplex_solve


@dataclass(frozen=True)
class ToleranceConfig:
    """Central numeric tolerances referenced across modules and tests."""

    feas_tol: float = 1e-9
    kkt_tol: float = 1e-8
    dual_tol: float = 1e-9
    rank_tol: float = 1e-8


DEFAULT_TOL = ToleranceConfig()

# relative pivot threshold declaring a square system singular
SINGULAR_PIVOT_RTOL = 1e-12


def as_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise errors.DimensionMismatch(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise errors.DimensionMismatch(f"{name} has non-finite entries")
    return a


def as_vector(a, name="vector"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1:
        raise errors.DimensionMismatch(f"{name} must be 1-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise errors.DimensionMismatch(f"{name} has non-finite entries")
    return a


def solve_linear(A, b, *, pivot_rtol=SINGULAR_PIVOT_RTOL):
    """Solve A @ x = b by partially pivoted LU.

    Raises SingularMatrix when an elimination pivot falls below
    ``pivot_rtol * ||A||_inf``.  ``b`` may be a vector or a matrix of
    stacked right-hand sides.
    """
    A = as_matrix(A, "A")
    b = np.asarray(b, dtype=np.float64)
    n = A.shape[0]
    if A.shape[1] != n:
        raise errors.DimensionMismatch("A must be square")
    vector_rhs = b.ndim == 1
    rhs = b.reshape(n, -1).copy() if vector_rhs else b.copy()
    if rhs.shape[0] != n:
        raise errors.DimensionMismatch("b length does not match A")

    norm = float(np.linalg.norm(A, np.inf)) if n else 0.0
    if norm == 0.0:
        raise errors.SingularMatrix("zero matrix")
    threshold = pivot_rtol * norm

    lu = A.copy()
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) < threshold:
            raise errors.SingularMatrix(f"pivot {lu[p, k]:.3e} below {threshold:.3e}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            rhs[[k, p]] = rhs[[p, k]]
        factors = lu[k + 1:, k] / lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(factors, lu[k, k + 1:])
        rhs[k + 1:] -= np.outer(factors, rhs[k])
    x = np.empty_like(rhs)
    for k in range(n - 1, -1, -1):
        x[k] = (rhs[k] - lu[k, k + 1:] @ x[k + 1:]) / lu[k, k]
    return x[:, 0] if vector_rhs else x


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpProblem:
    """max objective @ z  s.t.  A_ub @ z <= b_ub (plus optional var bounds)."""

    objective: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def validated(self):
        c = as_vector(self.objective, "objective")
        A = as_matrix(self.A_ub, "A_ub")
        b = as_vector(self.b_ub, "b_ub")
        if A.shape[0] != b.shape[0]:
            raise errors.DimensionMismatch("A_ub and b_ub row counts differ")
        if A.shape[1] != c.shape[0]:
            raise errors.DimensionMismatch("A_ub column count != objective length")
        return c, A, b


@dataclass(frozen=True)
class LpResult:
    status: LpStatus
    z: np.ndarray | None
    value: float | None


def _bound_rows(n, lb, ub):
    rows = []
    rhs = []
    if lb is not None:
        lb = np.asarray(lb, dtype=np.float64)
        for j in range(n):
            if np.isfinite(lb[j]):
                row = np.zeros(n)
                row[j] = -1.0
                rows.append(row)
                rhs.append(-lb[j])
    if ub is not None:
        ub = np.asarray(ub, dtype=np.float64)
        for j in range(n):
            if np.isfinite(ub[j]):
                row = np.zeros(n)
                row[j] = 1.0
                rows.append(row)
                rhs.append(ub[j])
    return rows, rhs


def lp_solve(problem: LpProblem, *, tol: ToleranceConfig = DEFAULT_TOL) -> LpResult:
    """Solve an inequality-form LP with the dense simplex kernel.

    Rows are normalized to unit Euclidean norm before solving; primal
    feasibility of optimal points is certified within ``tol.feas_tol`` on
    the normalized rows.
    """
    c, A, b = problem.validated()
    n = c.shape[0]
    extra_rows, extra_rhs = _bound_rows(n, problem.lb, problem.ub)
    if extra_rows:
        A = np.vstack([A] + [np.asarray(extra_rows)])
        b = np.concatenate([b, np.asarray(extra_rhs)])

    norms = np.linalg.norm(A, axis=1)
    zero = norms < 1e-12
    if np.any(zero):
        if np.any(b[zero] < -tol.feas_tol):
            return LpResult(LpStatus.INFEASIBLE, None, None)
        A, b, norms = A[~zero], b[~zero], norms[~zero]
    if A.shape[0]:
        A = A / norms[:, None]
        b = b / norms

    status, z, _ = simplex_solve(c, A, b)
    if status == STALLED:
        raise errors.NumericalFailure("simplex exceeded its pivot budget")
    if status == INFEASIBLE:
        return LpResult(LpStatus.INFEASIBLE, None, None)
    if status == UNBOUNDED:
        return LpResult(LpStatus.UNBOUNDED, None, None)
    z = np.asarray(z)
    if A.shape[0]:
        resid = float((A @ z - b).max())
        if resid > tol.feas_tol * (1.0 + float(np.abs(b).max())):
            raise errors.NumericalFailure(f"optimal point infeasible by {resid:.3e}")
    return LpResult(LpStatus.OPTIMAL, z, float(c @ z))


def lp_feasible_point(A, b, *, tol: ToleranceConfig = DEFAULT_TOL):
    """Find z with A @ z <= b, or None.  Pure phase-1 solve (zero objective)."""
    A = as_matrix(A, "A")
    b = as_vector(b, "b")
    res = lp_solve(LpProblem(np.zeros(A.shape[1]), A, b), tol=tol)
    return res.z if res.status is LpStatus.OPTIMAL else None


class QpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class QpResult:
    status: QpStatus
    u: np.ndarray | None
    active_set: tuple[int, ...]
    multipliers: np.ndarray | None


def _min_eigenvalue(H):
    try:
        return float(np.linalg.eigvalsh(H).min())
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise errors.NotPositiveDefinite(str(exc)) from exc


def qp_active_set(H, f, G=None, b=None, theta_shift=None, *,
                  tol: ToleranceConfig = DEFAULT_TOL,
                  max_iter=None, check_definite=True) -> QpResult:
    """Primal active-set solve of min 0.5 u'Hu + f'u  s.t.  G u <= b.

    ``theta_shift`` is an optional additive right-hand-side term (the
    parametric F @ theta contribution), so callers can keep constant ``b``
    and per-solve shifts separate.  Returns the minimizer together with the
    final working set and its multipliers.
    """
    H = as_matrix(H, "H")
    f = as_vector(f, "f")
    n = H.shape[0]
    if H.shape[1] != n or f.shape[0] != n:
        raise errors.DimensionMismatch("H/f dimensions disagree")
    if check_definite:
        if np.abs(H - H.T).max() > 1e-8 * (1.0 + np.abs(H).max()):
            raise errors.NotPositiveDefinite("H is not symmetric")
        if _min_eigenvalue(H) <= 1e-10:
            raise errors.NotPositiveDefinite("H fails the eigenvalue screen")

    if G is None or np.size(G) == 0:
        u = solve_linear(H, -f)
        return QpResult(QpStatus.OPTIMAL, u, (), np.zeros(0))

    G = as_matrix(G, "G")
    b = as_vector(b, "b")
    if G.shape[1] != n or G.shape[0] != b.shape[0]:
        raise errors.DimensionMismatch("G/b dimensions disagree")
    if theta_shift is not None:
        shift = as_vector(theta_shift, "theta_shift")
        if shift.shape[0] != b.shape[0]:
            raise errors.DimensionMismatch("theta_shift length != b length")
        b = b + shift
    m = G.shape[0]
    if max_iter is None:
        max_iter = 50 + 10 * (m + n)

    scale = 1.0 + float(np.abs(b).max())
    u = np.zeros(n)
    if np.any(-b > tol.feas_tol * scale):
        # phase 1: max -s  s.t.  G u - s <= b, -s <= 0
        rows = np.hstack([G, -np.ones((m, 1))])
        rows = np.vstack([rows, np.append(np.zeros(n), -1.0)])
        rhs = np.append(b, 0.0)
        obj = np.append(np.zeros(n), -1.0)
        res = lp_solve(LpProblem(obj, rows, rhs), tol=tol)
        if res.status is not LpStatus.OPTIMAL or res.z[-1] > tol.feas_tol * scale:
            return QpResult(QpStatus.INFEASIBLE, None, (), None)
        u = res.z[:n]

    work: list[int] = []
    lam = np.zeros(0)
    for _ in range(max_iter):
        a = len(work)
        kkt = np.zeros((n + a, n + a))
        kkt[:n, :n] = H
        rhs = np.empty(n + a)
        rhs[:n] = -f
        if a:
            Gw = G[work]
            kkt[:n, n:] = Gw.T
            kkt[n:, :n] = Gw
            rhs[n:] = b[work]
        try:
            sol = solve_linear(kkt, rhs, pivot_rtol=1e-12)
        except errors.SingularMatrix as exc:
            raise errors.NumericalFailure(
                f"degenerate working set {tuple(work)}") from exc
        u_eq = sol[:n]
        lam = sol[n:]
        step = u_eq - u
        if np.abs(step).max() <= 1e-11 * (1.0 + np.abs(u).max()):
            if a == 0 or lam.min() >= -tol.dual_tol:
                order = np.argsort(work)
                active = tuple(int(work[i]) for i in order)
                return QpResult(QpStatus.OPTIMAL, u_eq, active, lam[order])
            work.pop(int(np.argmin(lam)))
            continue
        # ratio test against constraints outside the working set
        alpha = 1.0
        blocker = -1
        gd = G @ step
        slack = b - G @ u
        for i in range(m):
            if i in work or gd[i] <= 1e-12 * scale:
                continue
            ratio = slack[i] / gd[i]
            if ratio < alpha:
                alpha = max(ratio, 0.0)
                blocker = i
        u = u + alpha * step
        if blocker >= 0:
            work.append(blocker)
        # alpha == 1 with no blocker loops back and terminates on zero step
    raise errors.NumericalFailure("active-set iteration cap exceeded")


def spectral_radius(A) -> float:
    """Largest eigenvalue magnitude of a square matrix."""
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise errors.DimensionMismatch("A must be square")
    try:
        eig = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise errors.NonConvergence(str(exc)) from exc
    return float(np.abs(eig).max()) if eig.size else 0.0


def controllability_rank(A, B, *, tol: ToleranceConfig = DEFAULT_TOL) -> int:
    """Rank of the controllability matrix [B, AB, ..., A^(n-1) B]."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    n = A.shape[0]
    if A.shape[1] != n or B.shape[0] != n:
        raise errors.DimensionMismatch("A/B dimensions disagree")
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    ctrb = np.hstack(blocks)
    sv = np.linalg.svd(ctrb, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int((sv > tol.rank_tol * sv[0]).sum())
