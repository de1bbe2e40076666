"""Halfspace-representation polytope operations.

A polytope is the set {theta : Phi @ theta <= phi}.  Rows keep insertion
order; most operations assume (and `normalize` establishes) unit-norm rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import errors
from .numeric import DEFAULT_TOL, LpProblem, LpStatus, ToleranceConfig, lp_solve

# two normalized rows describe the same hyperplane with opposite orientation
# when normals and offsets cancel within this tolerance (an order above the
# LP feasibility tolerance, absorbing KKT-derived rounding)
HYPERPLANE_MATCH_TOL = 1e-7

# regions thinner than this Chebyshev radius are treated as lower-dimensional
MIN_FULLDIM_RADIUS = 1e-9

# inscribed radii reaching this cap are reported as unbounded (+inf)
_RADIUS_CAP = 1e6


@dataclass(frozen=True)
class Polytope:
    Phi: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        Phi = np.atleast_2d(np.asarray(self.Phi, dtype=np.float64))
        phi = np.asarray(self.phi, dtype=np.float64).ravel()
        if Phi.shape[0] != phi.shape[0]:
            raise errors.DimensionMismatch("Phi/phi row counts differ")
        if Phi.shape[0] < 1:
            raise errors.DimensionMismatch("polytope needs at least one row")
        if not (np.all(np.isfinite(Phi)) and np.all(np.isfinite(phi))):
            raise errors.DimensionMismatch("non-finite polytope data")
        object.__setattr__(self, "Phi", Phi)
        object.__setattr__(self, "phi", phi)

    @property
    def dim(self) -> int:
        return self.Phi.shape[1]

    @property
    def n_rows(self) -> int:
        return self.Phi.shape[0]

    @classmethod
    def from_box(cls, lb, ub) -> "Polytope":
        lb = np.asarray(lb, dtype=np.float64).ravel()
        ub = np.asarray(ub, dtype=np.float64).ravel()
        d = lb.shape[0]
        eye = np.eye(d)
        return cls(np.vstack([eye, -eye]), np.concatenate([ub, -lb]))


def normalize(P: Polytope) -> Polytope:
    """Scale every row to unit Euclidean norm; zero rows are an error."""
    norms = np.linalg.norm(P.Phi, axis=1)
    if np.any(norms < 1e-12):
        raise errors.ZeroRow("cannot normalize a zero hyperplane row")
    return Polytope(P.Phi / norms[:, None], P.phi / norms)


def chebyshev(P: Polytope, *, tol: ToleranceConfig = DEFAULT_TOL):
    """Largest inscribed ball: returns (center, radius).

    A negative radius certifies emptiness.  Radii at the internal cap are
    reported as +inf (unbounded inscribed ball); the center returned with
    them is a point of the capped solution and still lies inside P.
    """
    d = P.dim
    norms = np.linalg.norm(P.Phi, axis=1)
    rows = np.hstack([P.Phi, norms[:, None]])
    cap_row = np.zeros(d + 1)
    cap_row[d] = 1.0
    A = np.vstack([rows, cap_row])
    b = np.concatenate([P.phi, [_RADIUS_CAP]])
    obj = np.zeros(d + 1)
    obj[d] = 1.0
    res = lp_solve(LpProblem(obj, A, b), tol=tol)
    if res.status is not LpStatus.OPTIMAL:  # pragma: no cover - cap keeps it bounded
        raise errors.NumericalFailure(f"chebyshev LP returned {res.status}")
    center = res.z[:d]
    radius = float(res.z[d])
    if radius >= _RADIUS_CAP * (1.0 - 1e-9):
        return center, math.inf
    return center, radius


def is_empty(P: Polytope, *, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    _, radius = chebyshev(P, tol=tol)
    return radius < -tol.feas_tol


def contains(P: Polytope, theta, tol: float = DEFAULT_TOL.feas_tol) -> bool:
    theta = np.asarray(theta, dtype=np.float64).ravel()
    if theta.shape[0] != P.dim:
        raise errors.DimensionMismatch("point dimension != polytope dimension")
    return bool(np.all(P.Phi @ theta <= P.phi + tol))


def remove_redundant(P: Polytope, *, tol: ToleranceConfig = DEFAULT_TOL) -> Polytope:
    """Drop rows whose removal leaves the point set unchanged.

    A retained row is irredundant: maximizing its normal over the polytope
    built from the other retained rows exceeds its offset by more than
    ``feas_tol`` (the objective is capped at offset+1 to keep the LP
    bounded).  Rows keep their original scaling and insertion order.
    """
    from ._kernels import OPTIMAL as _OPT, STALLED as _STL, simplex_solve

    if is_empty(P, tol=tol):
        raise errors.EmptyInput("cannot reduce an empty polytope")
    norms = np.linalg.norm(P.Phi, axis=1)
    if np.any(norms < 1e-12):
        raise errors.ZeroRow("zero hyperplane row")
    Phi = P.Phi / norms[:, None]
    phi = P.phi / norms
    m = P.n_rows
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        mask = keep.copy()
        mask[i] = False
        if not mask.any():
            continue
        rows = np.vstack([Phi[mask], Phi[i][None, :]])
        rhs = np.concatenate([phi[mask], [phi[i] + 1.0]])
        status, z, _ = simplex_solve(Phi[i], rows, rhs)
        if status == _STL:
            raise errors.NumericalFailure("redundancy LP stalled")
        if status == _OPT and float(Phi[i] @ z) <= phi[i] + tol.feas_tol:
            keep[i] = False
    return Polytope(P.Phi[keep], P.phi[keep])


def same_hyperplane_opposed(a, beta, a_other, beta_other,
                            tol: float = HYPERPLANE_MATCH_TOL) -> bool:
    """True when two normalized rows describe one hyperplane from opposite
    sides, i.e. (a, beta) ~ (-a', -beta')."""
    return (float(np.abs(np.asarray(a) + np.asarray(a_other)).max()) <= tol
            and abs(float(beta) + float(beta_other)) <= tol)
